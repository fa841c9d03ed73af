#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "oshield/poly/jet.h"
#include "oshield/poly/polynomial.h"

namespace oshield::poly {

// A smooth map R^n -> R^m. `jet` is optional; when present it evaluates the map
// on truncated Taylor arithmetic and yields exact Taylor coefficients.
struct SmoothMap {
  int input_dim = 0;
  int output_dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> value;
  std::function<std::vector<Jet>(const std::vector<Jet>&)> jet;
};

// Taylor polynomial of total degree <= `degree` about `center`, in the
// displacement coordinates delta = z - center. Uses `map.jet` when available,
// otherwise interpolation on the simplex lattice center + h * beta,
// |beta| <= degree (error O(h) in the top-order coefficients).
PolynomialMap taylor_expand(const SmoothMap& map, const Eigen::VectorXd& center,
                            int degree, double fallback_step = 1e-2);

// Jacobian by central differences; used to cross-check analytic derivatives.
Eigen::MatrixXd finite_difference_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& point, double step = 1e-6);

}  // namespace oshield::poly
