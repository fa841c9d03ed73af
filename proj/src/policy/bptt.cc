#include "oshield/policy/bptt.h"

#include <cmath>

#include "oshield/parallel.h"

namespace oshield::policy {

void TrainConfig::validate() const {
  if (horizon < 1) throw ConfigError("training horizon must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("discount must lie in [0, 1]");
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  if (batch < 1) throw ConfigError("batch size must be >= 1");
  if (hidden < 1) throw ConfigError("hidden width must be >= 1");
}

RewardFn env_reward() {
  return [](const dyn::Environment& env, const Vec& x, Vec* g) { return env.training_reward(x, g); };
}

StartSampler env_starts(std::shared_ptr<const dyn::Environment> env) {
  return [env](std::mt19937_64& rng) {
    Start s;
    s.env = env->has_layouts() ? env->instance(rng()) : env;
    s.x = s.env->sample_initial(rng);
    return s;
  };
}

double rollout_objective(const MlpPolicy& pi, const Start& start, const RewardFn& reward, int horizon,
                         double gamma, bool use_surrogate, std::vector<double>* grad) {
  const dyn::Environment& env = *start.env;
  const int n = env.state_dim();
  if (env.policy_input_dim() < n) throw InputError("policy input must begin with the state");
  std::vector<Vec> xs{start.x};
  std::vector<Vec> us;
  std::vector<MlpPolicy::Tape> tapes(grad ? horizon : 1);
  std::vector<Vec> rgrad(grad ? horizon : 0);
  double j = 0.0;
  double disc = 1.0;
  for (int t = 0; t < horizon; ++t) {
    MlpPolicy::Tape& tape = tapes[grad ? t : 0];
    const Vec u = pi.forward(env.policy_input(xs.back()), tape);
    xs.push_back(env.step(xs.back(), u, use_surrogate));
    us.push_back(u);
    j += disc * reward(env, xs.back(), grad ? &rgrad[t] : nullptr);
    disc *= gamma;
  }
  if (!grad) return j;

  grad->assign(pi.num_params(), 0.0);
  std::vector<double> weight(horizon);
  for (int t = 0; t < horizon; ++t) weight[t] = t ? weight[t - 1] * gamma : 1.0;
  Vec lam = Vec::Zero(n);  // dJ/dx_{t+1}
  Mat a, b;
  for (int t = horizon - 1; t >= 0; --t) {
    lam += weight[t] * rgrad[t];
    env.step_jacobian(xs[t], us[t], use_surrogate, a, b);
    const Vec g_in = pi.backward(tapes[t], b.transpose() * lam, *grad);
    lam = a.transpose() * lam + g_in.head(n);
  }
  return j;
}

double mean_objective(const MlpPolicy& pi, const std::vector<Start>& starts, const RewardFn& reward,
                      const TrainConfig& cfg) {
  std::vector<double> j(starts.size());
  parallel_for(starts.size(), cfg.threads, [&](std::size_t i) {
    j[i] = rollout_objective(pi, starts[i], reward, cfg.horizon, cfg.gamma, cfg.use_surrogate);
  });
  double s = 0.0;
  for (double v : j) s += v;
  return starts.empty() ? 0.0 : s / static_cast<double>(starts.size());
}

TrainResult train_bptt(const dyn::Environment& env, const TrainConfig& cfg, const RewardFn& reward,
                       const StartSampler& starts, const MlpPolicy* init, const IterationHook& hook) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  TrainResult out;
  out.policy = init ? *init : MlpPolicy::for_env(env, cfg.hidden, rng, cfg.init_output_scale);
  MlpPolicy& pi = out.policy;
  Adam adam(pi.num_params(), cfg.adam);
  std::vector<std::vector<double>> grads(cfg.batch);
  std::vector<double> obj(cfg.batch);
  std::vector<double> total(pi.num_params());

  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<Start> batch;
    for (int i = 0; i < cfg.batch; ++i) batch.push_back(starts(rng));
    try {
      parallel_for(batch.size(), cfg.threads, [&](std::size_t i) {
        obj[i] = rollout_objective(pi, batch[i], reward, cfg.horizon, cfg.gamma, cfg.use_surrogate,
                                   &grads[i]);
      });
    } catch (const NumericError& e) {
      throw TrainingDiverged(std::string("rollout diverged: ") + e.what(), pi, it);
    }
    double mean = 0.0;
    std::fill(total.begin(), total.end(), 0.0);
    for (int i = 0; i < cfg.batch; ++i) {
      mean += obj[i] / cfg.batch;
      for (std::size_t k = 0; k < total.size(); ++k) total[k] += grads[i][k] / cfg.batch;
    }
    double norm2 = 0.0;
    for (double g : total) norm2 += g * g;
    if (!std::isfinite(mean) || !std::isfinite(norm2)) {
      throw TrainingDiverged("non-finite objective at iteration " + std::to_string(it), pi, it);
    }
    if (cfg.clip_norm > 0.0 && norm2 > cfg.clip_norm * cfg.clip_norm) {
      const double s = cfg.clip_norm / std::sqrt(norm2);
      for (double& g : total) g *= s;
    }
    const MlpPolicy last = pi;
    adam.ascend(pi.params(), total);
    if (!pi.finite()) throw TrainingDiverged("non-finite parameters after update", last, it);
    out.trace.push_back(mean);
    if (hook) hook(it + 1, pi);
  }
  return out;
}

}  // namespace oshield::policy
