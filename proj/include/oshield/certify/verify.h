#pragma once

#include <optional>
#include <vector>

#include "oshield/certify/invariant_set.h"

namespace oshield::certify {

struct VerifyConfig {
  int multiplier_degree = 8;         // lambda in the decrease condition
  int safety_multiplier_degree = 0;  // mu in each safety row
  double bisection_tol = 1e-4;       // relative to the bracketing eps_max
  double eps_start = 1e-2;
  double eps_cap = 1e6;
  bool action_rows = true;  // certify |u| within bounds so clamping never binds
  SosOptions sos = strict_sos();

  static SosOptions strict_sos() {
    SosOptions o;
    o.eig_tolerance = 0.0;
    o.min_margin = 0.0;
    return o;
  }
};

struct VerifyReport {
  double eps_safety = 0.0;
  double eps_decrease = 0.0;
  int sdp_solves = 0;
  double seconds = 0.0;
  std::vector<std::pair<double, bool>> decrease_trace;
};

// Largest certified epsilon for the controller's sublevel sets under the
// polynomial surrogate. Empty when the target itself violates a safety row
// or verification fails numerically.
std::optional<InvariantSet> lqr_verify(const dyn::Environment& env, const lqr::LqrController& ctrl,
                                       const VerifyConfig& cfg = {}, VerifyReport* report = nullptr);

// Closed form for controllers whose closed loop is exactly linear (on the
// reduced manifold when ctrl.reduced is set). Empty action bounds skip the
// action rows.
InvariantSet exact_linear_invariant(const lqr::LqrController& ctrl, const dyn::SafeRegion& safe,
                                    const Vec& action_low = {}, const Vec& action_high = {});

// Pieces of the SOS path, exposed for tests.
// Closed-loop surrogate step in displacement coordinates d = x - x~.
poly::PolynomialMap closed_loop(const dyn::Environment& env, const lqr::LqrController& ctrl);
std::optional<SosCertificate> certify_at(const dyn::Environment& env, const lqr::LqrController& ctrl,
                                         double epsilon, const VerifyConfig& cfg);

}  // namespace oshield::certify
