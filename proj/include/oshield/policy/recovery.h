#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "oshield/policy/bptt.h"

namespace oshield::policy {

// Empirical d_rec: safe states reached by pi_hat after a uniform number of steps.
struct RecoveryStates {
  std::vector<Start> starts;  // state plus the layout it was reached in
  std::vector<int> steps;     // the t drawn for each accepted state
  int drawn = 0;

  std::size_t size() const { return starts.size(); }
  double acceptance() const { return drawn ? static_cast<double>(size()) / drawn : 0.0; }
};

struct RecoverySampling {
  int t_prime = 200;
  int probe = 200;  // draws checked before the 1% acceptance floor applies
  double min_acceptance = 0.01;
  bool use_surrogate = false;
};

// x0 ~ d0, t ~ U{0..T'-1}, roll pi_hat t steps, keep x_t when safe.
// Raises ConfigError if fewer than 1% of the probe draws are accepted.
RecoveryStates sample_recovery_states(std::shared_ptr<const dyn::Environment> env, const MlpPolicy& pi_hat,
                                      int count, std::uint64_t seed, const RecoverySampling& opts = {});

enum class RecoveryReward { kShaped, kIndicator };
RecoveryReward parse_recovery_reward(const std::string& s);
std::string recovery_reward_name(RecoveryReward r);

// -||x - x~||^2 with (x~, u~) = rho(x). The gradient differentiates rho by
// central differences.
double shaped_recovery_reward(const dyn::Environment& env, const Vec& x, Vec* grad);

// Scores a candidate recovery policy (higher is better), e.g. the fraction of
// held-out d_rec states it makes recoverable.
using PolicySelector = std::function<double(const MlpPolicy&)>;

struct RecoveryTrainResult {
  TrainResult train;
  std::vector<std::pair<int, double>> selection;  // (iteration, score) of scored checkpoints
};

// Trains pi_rec by BPTT from starts drawn out of d_rec. Both modes backpropagate
// the shaped reward; indicator mode scores checkpoints with `selector` every
// `select_every` iterations and returns the best one.
RecoveryTrainResult train_recovery(const dyn::Environment& env, const RecoveryStates& d_rec,
                                   const TrainConfig& cfg, RecoveryReward mode,
                                   const PolicySelector& selector = {}, int select_every = 50);

}  // namespace oshield::policy
