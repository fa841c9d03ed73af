#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "oshield/certify/cache.h"
#include "oshield/dynamics/config.h"
#include "oshield/policy/mlp.h"
#include "oshield/shield/shield.h"

namespace oshield::harness {

using dyn::Vec;

enum class Mode { kNone, kShield };
std::string mode_name(Mode m);
Mode parse_mode(const std::string& s);

struct ExperimentSpec {
  std::string env = "cartpole";
  dyn::Variant variant = dyn::Variant::kOriginal;
  dyn::EnvConfig env_config;
  Mode mode = Mode::kShield;
  int T = 100;  // shield horizon; in mode none, the horizon of the initial-state check
  int rollouts = 100;
  int horizon = 0;  // 0: the environment's default
  std::uint64_t seed = 1;
  int threads = 1;
  bool world_surrogate = false;
  bool timing = true;  // false writes wall_ns = 0 so logs are byte-reproducible
  bool audit = true;
  std::optional<std::chrono::nanoseconds> timeout;
  bool surrogate_checks = true;
  int max_draws = 10000;  // initial-state draws per rollout before giving up

  void validate() const;
  shield::ShieldConfig shield_config() const;
};

struct Metrics {
  std::string env;
  std::string variant;
  std::string mode;
  int T = 0;
  double reward_mean = 0.0;
  double reward_se = 0.0;
  double p_safe_state = 1.0;
  double p_safe_traj = 1.0;
  double reject_rate = 0.0;

  // Not part of summary.csv.
  double reward_thresholded_mean = 0.0;  // rewards capped at 2.0
  std::int64_t states = 0;
  std::int64_t unsafe_states = 0;
  std::int64_t recovery_steps = 0;
  std::int64_t audit_violations = 0;   // recovery steps whose own check is not (true, t' > 0)
  std::int64_t freeze_violations = 0;  // lqr steps that moved the target
  double latency_mean_ns = 0.0;
  std::vector<std::array<double, 3>> usage;  // per t: learned, recovery, lqr

  bool operator==(const Metrics&) const = default;
};

struct RolloutResult {
  int run_id = 0;
  std::uint64_t layout = 0;
  int draws = 0;
  Vec x0;
  double reward = 0.0;
  shield::Trajectory trajectory;
};

struct ExperimentResult {
  Metrics metrics;
  std::vector<RolloutResult> rollouts;  // sorted by run_id
};

// Rollouts from d0; each initial state is redrawn until it is stable or
// recoverable at horizon T. The cache must serve spec.env's configuration.
ExperimentResult run_experiment(const ExperimentSpec& spec, const policy::MlpPolicy& pi_hat,
                                const policy::MlpPolicy& pi_rec, certify::CertificateCache& cache);

Metrics summarize(const ExperimentSpec& spec, const dyn::Environment& env,
                  const std::vector<RolloutResult>& rollouts, std::int64_t draws);

// One Metrics row per T, same seeds throughout.
std::vector<Metrics> sweep_T(ExperimentSpec base, const std::vector<int>& Ts, const policy::MlpPolicy& pi_hat,
                             const policy::MlpPolicy& pi_rec, certify::CertificateCache& cache);

struct LatencyPoint {
  int T = 0;
  double mean_ns = 0.0;
  double se_ns = 0.0;
  int samples = 0;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Safe states that zero-output recovery cannot stabilize within t_max steps:
// coasting carts (cart-pole) or coasting bicycles clear of the obstacles.
std::vector<Vec> never_recoverable_probes(const dyn::Environment& env, int count, int t_max,
                                          std::uint64_t seed, certify::CertificateCache& cache);
// Stable states (recoverable at index 0).
std::vector<Vec> stable_probes(const dyn::Environment& env, int count, std::uint64_t seed,
                               certify::CertificateCache& cache);

// Mean shield_step time per T over the probes, with zero-output pi_hat and
// pi_rec of the standard width so every step pays the full check.
std::vector<LatencyPoint> measure_latency(const dyn::Environment& env, const std::vector<int>& Ts,
                                          const std::vector<Vec>& probes, int reps,
                                          certify::CertificateCache& cache, int hidden = 200);

}  // namespace oshield::harness
