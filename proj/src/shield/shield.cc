#include "oshield/shield/shield.h"

#include "oshield/errors.h"

namespace oshield::shield {
namespace {

using Clock = std::chrono::steady_clock;

std::int64_t elapsed_ns(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();
}

}  // namespace

std::string branch_name(Branch b) {
  switch (b) {
    case Branch::kLearned:
      return "learned";
    case Branch::kLqr:
      return "lqr";
    case Branch::kRecovery:
      return "recovery";
  }
  return "?";
}

Branch parse_branch(const std::string& s) {
  if (s == "learned") return Branch::kLearned;
  if (s == "lqr") return Branch::kLqr;
  if (s == "recovery") return Branch::kRecovery;
  throw ConfigError("unknown branch '" + s + "'");
}

std::string outcome_name(Outcome o) {
  switch (o) {
    case Outcome::kStable:
      return "stable";
    case Outcome::kUnsafe:
      return "unsafe";
    case Outcome::kHorizon:
      return "horizon";
    case Outcome::kTimeout:
      return "timeout";
    case Outcome::kNumeric:
      return "numeric";
  }
  return "?";
}

void ShieldConfig::validate() const {
  if (horizon < 0) throw ConfigError("shield horizon T must be >= 0");
  if (timeout && timeout->count() < 0) throw ConfigError("shield timeout must be >= 0");
}

Recoverability is_recoverable(const dyn::Environment& env, const policy::MlpPolicy& pi_rec, const Vec& x,
                              const ShieldConfig& cfg, certify::CertificateCache& cache) {
  const Clock::time_point start = Clock::now();
  Recoverability r;
  Vec y = x;
  for (int t = 0; t < cfg.horizon; ++t) {
    if (cfg.timeout && elapsed_ns(start) > cfg.timeout->count()) {
      r.outcome = Outcome::kTimeout;
      return r;
    }
    if (certify::is_stable_fast(y, env, cache)) {
      r.recoverable = true;
      r.first_stable_index = t;
      r.outcome = Outcome::kStable;
      return r;
    }
    if (!env.is_safe(y)) {
      r.outcome = Outcome::kUnsafe;
      return r;
    }
    try {
      y = env.step(y, pi_rec.act(env, y), cfg.use_surrogate_for_checks);
    } catch (const NumericError&) {
      r.outcome = Outcome::kNumeric;
      return r;
    }
  }
  r.outcome = Outcome::kHorizon;
  return r;
}

void ShieldState::retarget(dyn::Target t) {
  target = std::move(t);
  set_resolved = false;
  set.reset();
}

ShieldState initial_state(const dyn::Environment& env, const Vec& x0) {
  ShieldState st;
  st.target = env.lqr_target(x0);
  return st;
}

Vec shield_step(const dyn::Environment& env, const policy::MlpPolicy& pi_hat,
                const policy::MlpPolicy& pi_rec, const Vec& x, ShieldState& st, const ShieldConfig& cfg,
                certify::CertificateCache& cache) {
  // With T = 0 nothing is recoverable, so the first branch cannot fire.
  if (cfg.horizon > 0) {
    const Vec u = pi_hat.act(env, x);
    std::optional<Vec> next;
    try {
      next = env.step(x, u, cfg.use_surrogate_for_checks);
    } catch (const NumericError&) {
    }
    if (next && is_recoverable(env, pi_rec, *next, cfg, cache).recoverable) {
      st.retarget(env.lqr_target(*next));
      st.last_branch = Branch::kLearned;
      return env.clamp_action(u);
    }
  }

  if (!st.set_resolved) {
    st.set = cache.set_for(env, st.target);
    st.set_resolved = true;
  }
  if (st.set && st.set->contains(x)) {
    st.last_branch = Branch::kLqr;
    return env.clamp_action(st.set->controller.action(x));
  }

  const Vec u = pi_rec.act(env, x);
  Vec next;
  try {
    next = env.step(x, u, cfg.use_surrogate_for_checks);
  } catch (const NumericError&) {
    next = x;
  }
  st.retarget(env.lqr_target(next));
  st.last_branch = Branch::kRecovery;
  return env.clamp_action(u);
}

std::size_t Trajectory::unsafe_states() const {
  std::size_t n = final_safe ? 0 : 1;
  for (const StepLog& s : steps) n += s.safe ? 0 : 1;
  return n;
}

Trajectory run_with_shield(const dyn::Environment& env, const policy::MlpPolicy& pi_hat,
                           const policy::MlpPolicy& pi_rec, const Vec& x0, int steps,
                           const ShieldConfig& cfg, certify::CertificateCache& cache,
                           const RunOptions& opts) {
  cfg.validate();
  Trajectory out;
  ShieldState st = initial_state(env, x0);
  Vec x = x0;
  out.steps.reserve(steps);
  for (int t = 0; t < steps; ++t) {
    StepLog log;
    log.t = t;
    log.x = x;
    log.safe = env.is_safe(x);
    const Clock::time_point start = Clock::now();
    log.u = shield_step(env, pi_hat, pi_rec, x, st, cfg, cache);
    log.wall_ns = opts.timing ? elapsed_ns(start) : 0;
    log.branch = st.last_branch;
    log.target = st.target;
    if (opts.audit && log.branch == Branch::kRecovery) {
      const Recoverability r = is_recoverable(env, pi_rec, x, cfg, cache);
      log.audit_recoverable = r.recoverable;
      log.audit_first_stable = r.first_stable_index;
    }
    out.steps.push_back(std::move(log));
    x = env.step(x, out.steps.back().u, opts.world_surrogate);
  }
  out.final_state = x;
  out.final_safe = env.is_safe(x);
  return out;
}

Trajectory run_unshielded(const dyn::Environment& env, const policy::MlpPolicy& pi_hat, const Vec& x0,
                          int steps, const RunOptions& opts) {
  Trajectory out;
  Vec x = x0;
  out.steps.reserve(steps);
  for (int t = 0; t < steps; ++t) {
    StepLog log;
    log.t = t;
    log.x = x;
    log.safe = env.is_safe(x);
    const Clock::time_point start = Clock::now();
    log.u = env.clamp_action(pi_hat.act(env, x));
    log.wall_ns = opts.timing ? elapsed_ns(start) : 0;
    log.branch = Branch::kLearned;
    out.steps.push_back(std::move(log));
    x = env.step(x, out.steps.back().u, opts.world_surrogate);
  }
  out.final_state = x;
  out.final_safe = env.is_safe(x);
  return out;
}

}  // namespace oshield::shield
