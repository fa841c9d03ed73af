#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "oshield/certify/cache.h"
#include "oshield/dynamics/config.h"
#include "oshield/harness/experiment.h"
#include "oshield/policy/bptt.h"
#include "oshield/policy/recovery.h"

namespace oshield::harness {

struct RecoverySettings {
  policy::TrainConfig train;
  policy::RecoverySampling sampling;
  int samples = 2000;
  policy::RecoveryReward reward = policy::RecoveryReward::kShaped;
  int select_every = 100;  // indicator mode
  int select_states = 200;

  RecoverySettings();
};

struct EvalSettings {
  int T = 100;
  int rollouts = 100;
  int horizon = 0;
  std::uint64_t seed = 1;
  int threads = 1;
  bool world_surrogate = false;
  bool surrogate_checks = true;
  bool timing = true;
  bool audit = true;
  double timeout_ms = 0.0;  // 0 disables
};

struct BenchSettings {
  std::vector<int> Ts = {0, 25, 50, 75, 100};
  int probes = 20;
  int reps = 5;
};

// Everything --config can set. Missing keys keep their defaults; unknown keys
// raise ConfigError. Layout:
//   {"env": {"cartpole": {...}, "bicycle": {...}},
//    "train": {horizon, gamma, iterations, batch, lr, beta1, beta2, adam_eps,
//              clip_norm, hidden, init_output_scale, seed, use_surrogate, threads},
//    "recovery": {"train": {...same keys...}, t_prime, probe, samples,
//                 reward: "shaped"|"indicator", select_every, select_states},
//    "verify": {multiplier_degree, safety_multiplier_degree, bisection_tol, eps_start, action_rows},
//    "eval": {T, rollouts, horizon, seed, threads, world_surrogate, surrogate_checks,
//             timing, audit, timeout_ms},
//    "bench": {Ts, probes, reps}}
struct RunConfig {
  dyn::EnvConfig env;
  policy::TrainConfig train;
  RecoverySettings recovery;
  certify::VerifyConfig verify;
  EvalSettings eval;
  BenchSettings bench;

  RunConfig();
  certify::CacheOptions cache_options() const;
  ExperimentSpec spec(const std::string& env_name, dyn::Variant variant, Mode mode, int T) const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);
RunConfig load_run_config(const std::string& path);

}  // namespace oshield::harness
