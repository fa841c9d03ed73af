#pragma once

#include <string>

#include "oshield/harness/config.h"

namespace oshield::harness {

// Checkpoint and certificate names inside an output directory.
std::string learned_policy_path(const std::string& dir, const std::string& env);
std::string recovery_policy_path(const std::string& dir, const std::string& env);
std::string certificate_path(const std::string& dir, const std::string& env, dyn::Variant variant);

// pi_hat by BPTT on the environment's training reward from d0.
policy::TrainResult train_learned(const RunConfig& cfg, const std::string& env, dyn::Variant variant);

// d_rec from pi_hat, then pi_rec. Indicator mode selects checkpoints by the
// recoverable fraction (at cfg.eval.T) of held-out d_rec states.
policy::RecoveryTrainResult train_recovery_policy(const RunConfig& cfg, const std::string& env,
                                                  dyn::Variant variant, const policy::MlpPolicy& pi_hat,
                                                  certify::CertificateCache& cache,
                                                  policy::RecoveryStates* d_rec = nullptr);

// Fraction of the given states that pi_rec recovers within T steps.
double recoverable_fraction(const dyn::Environment& env, const policy::MlpPolicy& pi_rec,
                            const std::vector<policy::Start>& states, int T, certify::CertificateCache& cache);

}  // namespace oshield::harness
