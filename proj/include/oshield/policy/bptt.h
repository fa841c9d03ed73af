#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "oshield/errors.h"
#include "oshield/policy/adam.h"
#include "oshield/policy/mlp.h"

namespace oshield::policy {

struct TrainConfig {
  int horizon = 200;
  double gamma = 0.99;
  int iterations = 1000;
  int batch = 8;
  AdamOptions adam;
  double clip_norm = 10.0;  // global gradient norm, <= 0 disables
  int hidden = 200;
  double init_output_scale = 0.1;
  std::uint64_t seed = 1;
  // Backprop through the polynomial surrogate instead of the true step. Off by
  // default: the Taylor surrogate overflows once a falling pole leaves |theta| < 1.
  bool use_surrogate = false;
  int threads = 1;

  void validate() const;
};

// Reward of a state in the given (possibly layout-specific) environment;
// writes the gradient when grad is non-null.
using RewardFn = std::function<double(const dyn::Environment&, const Vec&, Vec*)>;

struct Start {
  std::shared_ptr<const dyn::Environment> env;
  Vec x;
};
using StartSampler = std::function<Start(std::mt19937_64&)>;

RewardFn env_reward();
// x0 ~ d0; environments with layouts also draw a fresh layout per start.
StartSampler env_starts(std::shared_ptr<const dyn::Environment> env);

// J = sum_{t=1..N} gamma^(t-1) r(x_t) along x_{t+1} = f(x_t, pi(x_t)).
// When grad is non-null it receives dJ/dparams (overwritten).
double rollout_objective(const MlpPolicy& pi, const Start& start, const RewardFn& reward, int horizon,
                         double gamma, bool use_surrogate, std::vector<double>* grad = nullptr);

double mean_objective(const MlpPolicy& pi, const std::vector<Start>& starts, const RewardFn& reward,
                      const TrainConfig& cfg);

struct TrainResult {
  MlpPolicy policy;
  std::vector<double> trace;  // mean batch objective per iteration
};

// Raised when an iteration produces a non-finite objective or parameters;
// carries the parameters from the last finite iteration.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, MlpPolicy last, int iteration)
      : NumericError(what), last_finite(std::move(last)), iteration(iteration) {}
  MlpPolicy last_finite;
  int iteration;
};

// Called after each update with the 1-based iteration count.
using IterationHook = std::function<void(int, const MlpPolicy&)>;

// Maximizes the batch-mean of J by ADAM ascent. Starts from `init` when given,
// otherwise from a seeded random initialization.
TrainResult train_bptt(const dyn::Environment& env, const TrainConfig& cfg, const RewardFn& reward,
                       const StartSampler& starts, const MlpPolicy* init = nullptr,
                       const IterationHook& hook = {});

}  // namespace oshield::policy
