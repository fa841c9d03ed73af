#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oshield/certify/cache.h"
#include "oshield/policy/mlp.h"

namespace oshield::shield {

using dyn::Vec;

enum class Branch { kLearned, kLqr, kRecovery };
std::string branch_name(Branch b);
Branch parse_branch(const std::string& s);

struct ShieldConfig {
  int horizon = 100;  // T
  // Wall-clock budget per recoverability check; a check that runs out of
  // time reports "not recoverable".
  std::optional<std::chrono::nanoseconds> timeout;
  bool use_surrogate_for_checks = true;

  void validate() const;
};

enum class Outcome { kStable, kUnsafe, kHorizon, kTimeout, kNumeric };
std::string outcome_name(Outcome o);

struct Recoverability {
  bool recoverable = false;
  std::optional<int> first_stable_index;
  Outcome outcome = Outcome::kHorizon;
};

// Rolls pi_rec from x for t = 0..T-1 and succeeds at the first stable state.
// Fails on the first unsafe state before that, after T steps, or on timeout.
Recoverability is_recoverable(const dyn::Environment& env, const policy::MlpPolicy& pi_rec, const Vec& x,
                              const ShieldConfig& cfg, certify::CertificateCache& cache);

struct ShieldState {
  dyn::Target target;
  Branch last_branch = Branch::kLqr;
  // Invariant set of `target`, resolved on first use and dropped when the
  // target moves.
  bool set_resolved = false;
  std::optional<certify::InvariantSet> set;

  void retarget(dyn::Target t);
};

ShieldState initial_state(const dyn::Environment& env, const Vec& x0);

// One step of the shield: the learned action if its successor is recoverable,
// else the LQR action if x is in the current target's invariant set, else the
// recovery action. Updates the target and branch in `st`.
Vec shield_step(const dyn::Environment& env, const policy::MlpPolicy& pi_hat,
                const policy::MlpPolicy& pi_rec, const Vec& x, ShieldState& st, const ShieldConfig& cfg,
                certify::CertificateCache& cache);

struct StepLog {
  int t = 0;
  Vec x;
  Vec u;
  Branch branch = Branch::kLqr;
  bool safe = true;
  std::int64_t wall_ns = 0;
  dyn::Target target;  // after the step
  // Recoverability of x itself, checked on recovery steps.
  std::optional<int> audit_first_stable;
  bool audit_recoverable = false;
};

struct Trajectory {
  std::vector<StepLog> steps;
  Vec final_state;
  bool final_safe = true;

  std::size_t unsafe_states() const;
};

struct RunOptions {
  bool world_surrogate = false;  // step the world with the surrogate instead of the true dynamics
  bool timing = true;            // record wall_ns (zero otherwise)
  bool audit = true;
};

Trajectory run_with_shield(const dyn::Environment& env, const policy::MlpPolicy& pi_hat,
                           const policy::MlpPolicy& pi_rec, const Vec& x0, int steps,
                           const ShieldConfig& cfg, certify::CertificateCache& cache,
                           const RunOptions& opts = {});

// pi_hat alone, logged in the same shape (every branch is learned).
Trajectory run_unshielded(const dyn::Environment& env, const policy::MlpPolicy& pi_hat, const Vec& x0,
                          int steps, const RunOptions& opts = {});

}  // namespace oshield::shield
