#include "oshield/policy/recovery.h"

#include <optional>

#include "oshield/errors.h"

namespace oshield::policy {

RecoveryStates sample_recovery_states(std::shared_ptr<const dyn::Environment> env, const MlpPolicy& pi_hat,
                                      int count, std::uint64_t seed, const RecoverySampling& opts) {
  if (opts.t_prime < 1) throw ConfigError("T' must be >= 1");
  if (count < 0) throw ConfigError("sample count must be >= 0");
  const StartSampler d0 = env_starts(env);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> horizon(0, opts.t_prime - 1);
  RecoveryStates out;
  while (static_cast<int>(out.size()) < count) {
    if (out.drawn >= opts.probe && out.acceptance() < opts.min_acceptance) {
      throw ConfigError("recovery sampling accepted " + std::to_string(out.size()) + " of " +
                        std::to_string(out.drawn) + " draws (below 1%)");
    }
    Start s = d0(rng);
    const int t = horizon(rng);
    ++out.drawn;
    try {
      for (int k = 0; k < t; ++k) s.x = s.env->step(s.x, pi_hat.act(*s.env, s.x), opts.use_surrogate);
    } catch (const NumericError&) {
      continue;
    }
    if (!s.env->is_safe(s.x)) continue;
    out.starts.push_back(std::move(s));
    out.steps.push_back(t);
  }
  return out;
}

RecoveryReward parse_recovery_reward(const std::string& s) {
  if (s == "shaped") return RecoveryReward::kShaped;
  if (s == "indicator") return RecoveryReward::kIndicator;
  throw ConfigError("unknown recovery reward '" + s + "' (expected shaped or indicator)");
}

std::string recovery_reward_name(RecoveryReward r) {
  return r == RecoveryReward::kShaped ? "shaped" : "indicator";
}

double shaped_recovery_reward(const dyn::Environment& env, const Vec& x, Vec* grad) {
  const Vec d = x - env.lqr_target(x).x;
  if (grad) {
    const int n = static_cast<int>(x.size());
    Mat j(n, n);  // d rho(x).x / dx
    for (int k = 0; k < n; ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(x(k)));
      Vec xp = x, xm = x;
      xp(k) += h;
      xm(k) -= h;
      j.col(k) = (env.lqr_target(xp).x - env.lqr_target(xm).x) / (2.0 * h);
    }
    *grad = -2.0 * (Mat::Identity(n, n) - j).transpose() * d;
  }
  return -d.squaredNorm();
}

RecoveryTrainResult train_recovery(const dyn::Environment& env, const RecoveryStates& d_rec,
                                   const TrainConfig& cfg, RecoveryReward mode,
                                   const PolicySelector& selector, int select_every) {
  if (d_rec.size() == 0) throw ConfigError("d_rec is empty");
  if (mode == RecoveryReward::kIndicator && !selector) {
    throw ConfigError("indicator recovery training needs a stability selector");
  }
  const StartSampler starts = [&d_rec](std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, d_rec.size() - 1);
    return d_rec.starts[pick(rng)];
  };
  const RewardFn reward = [](const dyn::Environment& e, const Vec& x, Vec* g) {
    return shaped_recovery_reward(e, x, g);
  };

  RecoveryTrainResult out;
  if (mode == RecoveryReward::kShaped) {
    out.train = train_bptt(env, cfg, reward, starts);
    return out;
  }

  select_every = std::max(1, select_every);
  std::optional<MlpPolicy> best;
  double best_score = 0.0;
  auto consider = [&](int it, const MlpPolicy& pi) {
    const double score = selector(pi);
    out.selection.emplace_back(it, score);
    if (!best || score > best_score) {
      best = pi;
      best_score = score;
    }
  };
  out.train = train_bptt(env, cfg, reward, starts, nullptr, [&](int it, const MlpPolicy& pi) {
    if (it == 1 || it % select_every == 0 || it == cfg.iterations) consider(it, pi);
  });
  if (best) out.train.policy = *best;
  return out;
}

}  // namespace oshield::policy
