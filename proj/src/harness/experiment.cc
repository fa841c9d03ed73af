#include "oshield/harness/experiment.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "oshield/errors.h"
#include "oshield/parallel.h"

namespace oshield::harness {

std::string mode_name(Mode m) { return m == Mode::kNone ? "none" : "shield"; }

Mode parse_mode(const std::string& s) {
  if (s == "none") return Mode::kNone;
  if (s == "shield") return Mode::kShield;
  throw ConfigError("unknown mode '" + s + "' (expected none or shield)");
}

void ExperimentSpec::validate() const {
  if (T < 0) throw ConfigError("T must be >= 0");
  if (rollouts < 1) throw ConfigError("rollouts must be >= 1");
  if (horizon < 0) throw ConfigError("horizon must be >= 1 (or 0 for the default)");
  if (max_draws < 1) throw ConfigError("max_draws must be >= 1");
}

shield::ShieldConfig ExperimentSpec::shield_config() const {
  shield::ShieldConfig c;
  c.horizon = T;
  c.timeout = timeout;
  c.use_surrogate_for_checks = surrogate_checks;
  return c;
}

namespace {

RolloutResult run_one(const ExperimentSpec& spec, const dyn::Environment& base, int horizon, int run_id,
                      const policy::MlpPolicy& pi_hat, const policy::MlpPolicy& pi_rec,
                      certify::CertificateCache& cache) {
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(run_id)};
  std::mt19937_64 rng(seq);
  const shield::ShieldConfig cfg = spec.shield_config();
  RolloutResult r;
  r.run_id = run_id;
  std::shared_ptr<const dyn::Environment> env;
  for (;;) {
    if (r.draws >= spec.max_draws) {
      throw ConfigError("no stable or recoverable initial state after " + std::to_string(r.draws) +
                        " draws (rollout " + std::to_string(run_id) + ")");
    }
    ++r.draws;
    r.layout = base.has_layouts() ? rng() : base.scenario_key();
    env = base.has_layouts() ? base.instance(r.layout) : nullptr;
    const dyn::Environment& e = env ? *env : base;
    r.x0 = e.sample_initial(rng);
    if (certify::is_stable_fast(r.x0, e, cache)) break;
    if (shield::is_recoverable(e, pi_rec, r.x0, cfg, cache).recoverable) break;
  }
  const dyn::Environment& e = env ? *env : base;
  shield::RunOptions opts;
  opts.world_surrogate = spec.world_surrogate;
  opts.timing = spec.timing;
  opts.audit = spec.audit;
  r.trajectory = spec.mode == Mode::kShield
                     ? shield::run_with_shield(e, pi_hat, pi_rec, r.x0, horizon, cfg, cache, opts)
                     : shield::run_unshielded(e, pi_hat, r.x0, horizon, opts);
  std::vector<Vec> states;
  for (const auto& s : r.trajectory.steps) states.push_back(s.x);
  states.push_back(r.trajectory.final_state);
  r.reward = e.task_metric(states);
  return r;
}

}  // namespace

Metrics summarize(const ExperimentSpec& spec, const dyn::Environment& env,
                  const std::vector<RolloutResult>& rollouts, std::int64_t draws) {
  Metrics m;
  m.env = spec.env;
  m.variant = dyn::variant_name(spec.variant);
  m.mode = mode_name(spec.mode);
  m.T = spec.T;
  const double n = static_cast<double>(rollouts.size());
  if (rollouts.empty()) return m;

  double sum = 0.0, capped = 0.0;
  for (const auto& r : rollouts) {
    sum += r.reward;
    capped += std::min(r.reward, 2.0);
  }
  m.reward_mean = sum / n;
  m.reward_thresholded_mean = capped / n;
  double ss = 0.0;
  for (const auto& r : rollouts) ss += (r.reward - m.reward_mean) * (r.reward - m.reward_mean);
  m.reward_se = rollouts.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;

  int safe_traj = 0;
  double wall = 0.0;
  std::int64_t steps = 0;
  std::size_t longest = 0;
  for (const auto& r : rollouts) longest = std::max(longest, r.trajectory.steps.size());
  std::vector<std::array<double, 3>> counts(longest, {0.0, 0.0, 0.0});
  std::vector<double> present(longest, 0.0);
  for (const auto& r : rollouts) {
    const auto& tr = r.trajectory;
    const std::size_t unsafe = tr.unsafe_states();
    m.states += static_cast<std::int64_t>(tr.steps.size()) + 1;
    m.unsafe_states += static_cast<std::int64_t>(unsafe);
    safe_traj += unsafe == 0;
    dyn::Target prev = env.lqr_target(r.x0);
    for (std::size_t t = 0; t < tr.steps.size(); ++t) {
      const auto& s = tr.steps[t];
      counts[t][static_cast<int>(s.branch == shield::Branch::kLearned ? 0
                                 : s.branch == shield::Branch::kRecovery ? 1
                                                                          : 2)] += 1.0;
      present[t] += 1.0;
      wall += static_cast<double>(s.wall_ns);
      ++steps;
      if (spec.mode == Mode::kShield) {
        if (s.branch == shield::Branch::kRecovery) {
          ++m.recovery_steps;
          if (spec.audit && !(s.audit_recoverable && s.audit_first_stable.value_or(0) > 0)) ++m.audit_violations;
        }
        if (s.branch == shield::Branch::kLqr && !(s.target.x == prev.x && s.target.u == prev.u)) {
          ++m.freeze_violations;
        }
        prev = s.target;
      }
    }
  }
  m.p_safe_state = m.states ? 1.0 - static_cast<double>(m.unsafe_states) / static_cast<double>(m.states) : 1.0;
  m.p_safe_traj = safe_traj / n;
  m.reject_rate = draws ? static_cast<double>(draws - static_cast<std::int64_t>(rollouts.size())) /
                              static_cast<double>(draws)
                        : 0.0;
  m.latency_mean_ns = steps ? wall / static_cast<double>(steps) : 0.0;
  m.usage.resize(longest);
  for (std::size_t t = 0; t < longest; ++t) {
    for (int b = 0; b < 3; ++b) m.usage[t][b] = counts[t][b] / present[t];
  }
  return m;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const policy::MlpPolicy& pi_hat,
                                const policy::MlpPolicy& pi_rec, certify::CertificateCache& cache) {
  spec.validate();
  const auto env = dyn::make_environment(spec.env, spec.variant, spec.env_config);
  const int horizon = spec.horizon > 0 ? spec.horizon : env->default_horizon();
  ExperimentResult out;
  out.rollouts.resize(spec.rollouts);
  parallel_for(out.rollouts.size(), spec.threads, [&](std::size_t i) {
    out.rollouts[i] = run_one(spec, *env, horizon, static_cast<int>(i), pi_hat, pi_rec, cache);
  });
  std::int64_t draws = 0;
  for (const auto& r : out.rollouts) draws += r.draws;
  out.metrics = summarize(spec, *env, out.rollouts, draws);
  return out;
}

std::vector<Metrics> sweep_T(ExperimentSpec base, const std::vector<int>& Ts, const policy::MlpPolicy& pi_hat,
                             const policy::MlpPolicy& pi_rec, certify::CertificateCache& cache) {
  std::vector<Metrics> rows;
  for (int t : Ts) {
    base.T = t;
    rows.push_back(run_experiment(base, pi_hat, pi_rec, cache).metrics);
  }
  return rows;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("line fit needs two or more points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw InputError("line fit needs distinct x values");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.intercept + f.slope * x[i]);
    sse += e * e;
  }
  f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return f;
}

namespace {

policy::MlpPolicy zero_policy(const dyn::Environment& env, int hidden) {
  return policy::MlpPolicy(env.policy_input_dim(), hidden, env.action_low(), env.action_high());
}

Vec coasting_state(const dyn::Environment& env, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (env.name() == "cartpole") {
    const double speed = 2.0 + 2.0 * u(rng);
    return Eigen::Vector4d(0.0, u(rng) < 0.5 ? speed : -speed, 0.0, 0.0);
  }
  if (env.name() == "bicycle") {
    // Heading +x one unit to the side of the obstacle row.
    const double y = 1.0 + 0.2 * u(rng);
    Vec x(5);
    x << 0.0, y, -0.1, y, 0.02 + 0.03 * u(rng);
    return x;
  }
  throw ConfigError("no latency probes for environment " + env.name());
}

}  // namespace

std::vector<Vec> never_recoverable_probes(const dyn::Environment& env, int count, int t_max,
                                          std::uint64_t seed, certify::CertificateCache& cache) {
  std::mt19937_64 rng(seed);
  const policy::MlpPolicy zero = zero_policy(env, 4);
  shield::ShieldConfig cfg;
  cfg.horizon = t_max;
  std::vector<Vec> out;
  for (int tries = 0; static_cast<int>(out.size()) < count; ++tries) {
    if (tries > 100 * count) throw ConfigError("could not find never-recoverable probe states");
    const Vec x = coasting_state(env, rng);
    if (!env.is_safe(x)) continue;
    // Must also defeat the learned-successor check, which starts one step later.
    const Vec next = env.step(x, Vec::Zero(env.action_dim()), cfg.use_surrogate_for_checks);
    if (shield::is_recoverable(env, zero, x, cfg, cache).outcome != shield::Outcome::kHorizon) continue;
    if (shield::is_recoverable(env, zero, next, cfg, cache).outcome != shield::Outcome::kHorizon) continue;
    out.push_back(x);
  }
  return out;
}

std::vector<Vec> stable_probes(const dyn::Environment& env, int count, std::uint64_t seed,
                               certify::CertificateCache& cache) {
  std::mt19937_64 rng(seed);
  std::vector<Vec> out;
  for (int tries = 0; static_cast<int>(out.size()) < count; ++tries) {
    if (tries > 1000 * count) throw ConfigError("could not find stable probe states");
    const Vec x = env.sample_initial(rng) * 0.1;
    const Vec next = env.step(x, Vec::Zero(env.action_dim()), true);
    if (certify::is_stable_fast(x, env, cache) && certify::is_stable_fast(next, env, cache)) out.push_back(x);
  }
  return out;
}

std::vector<LatencyPoint> measure_latency(const dyn::Environment& env, const std::vector<int>& Ts,
                                          const std::vector<Vec>& probes, int reps,
                                          certify::CertificateCache& cache, int hidden) {
  using Clock = std::chrono::steady_clock;
  const policy::MlpPolicy zero = zero_policy(env, hidden);
  std::vector<LatencyPoint> out;
  for (int t : Ts) {
    shield::ShieldConfig cfg;
    cfg.horizon = t;
    std::vector<double> samples;
    for (const Vec& x : probes) {
      for (int r = 0; r < reps; ++r) {
        shield::ShieldState st = shield::initial_state(env, x);
        const auto start = Clock::now();
        const Vec u = shield::shield_step(env, zero, zero, x, st, cfg, cache);
        const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();
        if (!u.allFinite()) throw NumericError("non-finite shield action");
        samples.push_back(static_cast<double>(ns));
      }
    }
    LatencyPoint p;
    p.T = t;
    p.samples = static_cast<int>(samples.size());
    for (double s : samples) p.mean_ns += s / samples.size();
    double ss = 0.0;
    for (double s : samples) ss += (s - p.mean_ns) * (s - p.mean_ns);
    p.se_ns = samples.size() > 1 ? std::sqrt(ss / (samples.size() - 1.0) / samples.size()) : 0.0;
    out.push_back(p);
  }
  return out;
}

}  // namespace oshield::harness
