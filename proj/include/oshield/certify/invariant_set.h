#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "oshield/certify/sos.h"
#include "oshield/dynamics/environment.h"
#include "oshield/lqr/lqr.h"

namespace oshield::certify {

enum class Method { kSos, kExactLinear };

std::string method_name(Method m);
Method parse_method(const std::string& s);

// Proofs are stated in whitened coordinates y, where x - x~ = scaling * y and
// the sublevel set V <= epsilon is the unit ball.
struct SosCertificate {
  double epsilon = 0.0;
  int multiplier_degree = 0;         // lambda
  int safety_multiplier_degree = 0;  // each mu
  Mat scaling;
  Polynomial lambda;
  std::vector<Polynomial> mu;
  SosProof decrease;
  std::vector<SosProof> safety;
};

struct InvariantSet {
  lqr::LqrController controller;
  Polynomial v;  // d' P d in displacement coordinates
  double epsilon = 0.0;
  Method method = Method::kSos;
  std::shared_ptr<const SosCertificate> certificate;
  // World-frame rows that must vanish on x - x~ (exact linear path only).
  Mat manifold;
  double manifold_tol = 1e-9;

  double value(const Vec& x) const { return controller.value(x); }
  bool contains(const Vec& x) const;
  // Same set for a target moved by `map` (map applied to a canonical set).
  InvariantSet recentred(const dyn::Recentering& map) const;
};

InvariantSet make_invariant_set(const lqr::LqrController& ctrl, double epsilon, Method method);

}  // namespace oshield::certify
