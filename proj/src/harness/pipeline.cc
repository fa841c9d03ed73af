#include "oshield/harness/pipeline.h"

#include "oshield/errors.h"
#include "oshield/shield/shield.h"

namespace oshield::harness {

std::string learned_policy_path(const std::string& dir, const std::string& env) {
  return dir + "/pi_hat_" + env + ".txt";
}

std::string recovery_policy_path(const std::string& dir, const std::string& env) {
  return dir + "/pi_rec_" + env + ".txt";
}

std::string certificate_path(const std::string& dir, const std::string& env, dyn::Variant variant) {
  return dir + "/certificate_" + env + "_" + dyn::variant_name(variant) + ".json";
}

policy::TrainResult train_learned(const RunConfig& cfg, const std::string& env, dyn::Variant variant) {
  const auto e = dyn::make_environment(env, variant, cfg.env);
  return policy::train_bptt(*e, cfg.train, policy::env_reward(), policy::env_starts(e));
}

double recoverable_fraction(const dyn::Environment& env, const policy::MlpPolicy& pi_rec,
                            const std::vector<policy::Start>& states, int T, certify::CertificateCache& cache) {
  if (states.empty()) return 0.0;
  shield::ShieldConfig sc;
  sc.horizon = T;
  int n = 0;
  for (const auto& s : states) {
    const dyn::Environment& e = s.env ? *s.env : env;
    n += shield::is_recoverable(e, pi_rec, s.x, sc, cache).recoverable;
  }
  return static_cast<double>(n) / static_cast<double>(states.size());
}

policy::RecoveryTrainResult train_recovery_policy(const RunConfig& cfg, const std::string& env,
                                                  dyn::Variant variant, const policy::MlpPolicy& pi_hat,
                                                  certify::CertificateCache& cache, policy::RecoveryStates* d_rec) {
  const auto e = dyn::make_environment(env, variant, cfg.env);
  const auto& r = cfg.recovery;
  policy::RecoveryStates d = policy::sample_recovery_states(e, pi_hat, r.samples, r.train.seed ^ 0x5eedULL, r.sampling);
  policy::RecoveryTrainResult out;
  if (r.reward == policy::RecoveryReward::kIndicator) {
    // Hold the last select_states samples out of training for selection.
    const std::size_t held = std::min<std::size_t>(r.select_states, d.size() / 2);
    if (held == 0) throw ConfigError("too few d_rec samples for indicator selection");
    policy::RecoveryStates train_part = d;
    train_part.starts.resize(d.size() - held);
    train_part.steps.resize(d.size() - held);
    const std::vector<policy::Start> holdout(d.starts.end() - held, d.starts.end());
    const int T = cfg.eval.T;
    out = policy::train_recovery(*e, train_part, r.train, r.reward,
                                 [&](const policy::MlpPolicy& p) { return recoverable_fraction(*e, p, holdout, T, cache); },
                                 r.select_every);
  } else {
    out = policy::train_recovery(*e, d, r.train, r.reward);
  }
  if (d_rec) *d_rec = std::move(d);
  return out;
}

}  // namespace oshield::harness
