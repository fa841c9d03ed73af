#include "oshield/poly/taylor.h"

#include <cmath>
#include <memory>

#include "oshield/errors.h"

namespace oshield::poly {
namespace {

PolynomialMap expand_with_jets(const SmoothMap& map, const Eigen::VectorXd& center,
                               int degree) {
  auto space = std::make_shared<const JetSpace>(map.input_dim, degree);
  std::vector<Jet> args;
  args.reserve(map.input_dim);
  for (int i = 0; i < map.input_dim; ++i) args.push_back(Jet::variable(space, i, center(i)));
  std::vector<Jet> out = map.jet(args);
  if (static_cast<int>(out.size()) != map.output_dim) {
    throw InputError("jet evaluator returned wrong output size");
  }
  std::vector<Polynomial> comps;
  comps.reserve(out.size());
  for (const Jet& j : out) {
    for (double c : j.coefficients()) {
      if (!std::isfinite(c)) throw NumericError("non-finite Taylor coefficient");
    }
    comps.push_back(j.to_polynomial());
  }
  return PolynomialMap(map.input_dim, std::move(comps));
}

PolynomialMap expand_by_interpolation(const SmoothMap& map,
                                      const Eigen::VectorXd& center, int degree,
                                      double h) {
  const int n = map.input_dim;
  const std::vector<Exponent> basis = monomials_up_to(n, 0, degree);
  const int size = static_cast<int>(basis.size());
  // Lattice points beta with |beta| <= degree, same enumeration as the basis.
  Eigen::MatrixXd vander(size, size);
  Eigen::MatrixXd values(size, map.output_dim);
  for (int r = 0; r < size; ++r) {
    const Exponent& beta = basis[r];
    Eigen::VectorXd z = center;
    for (int i = 0; i < n; ++i) z(i) += h * beta[i];
    const Eigen::VectorXd fz = map.value(z);
    if (fz.size() != map.output_dim || !fz.allFinite()) {
      throw NumericError("evaluator failed on the interpolation lattice");
    }
    values.row(r) = fz.transpose();
    for (int c = 0; c < size; ++c) {
      double m = 1.0;
      for (int i = 0; i < n; ++i) m *= std::pow(double(beta[i]), basis[c][i]);
      vander(r, c) = m;
    }
  }
  const Eigen::MatrixXd coeffs = vander.fullPivLu().solve(values);
  std::vector<Polynomial> comps(map.output_dim, Polynomial(n));
  for (int c = 0; c < size; ++c) {
    const double scale = std::pow(h, -total_degree(basis[c]));
    for (int k = 0; k < map.output_dim; ++k) {
      comps[k].add_term(basis[c], coeffs(c, k) * scale);
    }
  }
  return PolynomialMap(n, std::move(comps));
}

}  // namespace

PolynomialMap taylor_expand(const SmoothMap& map, const Eigen::VectorXd& center,
                            int degree, double fallback_step) {
  if (degree < 1) throw InputError("taylor_expand: degree must be >= 1");
  if (center.size() != map.input_dim) throw InputError("taylor_expand: bad center");
  if (map.jet) return expand_with_jets(map, center, degree);
  if (!map.value) throw InputError("taylor_expand: map has no evaluator");
  return expand_by_interpolation(map, center, degree, fallback_step);
}

Eigen::MatrixXd finite_difference_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& point, double step) {
  const Eigen::VectorXd f0 = f(point);
  Eigen::MatrixXd jac(f0.size(), point.size());
  for (int j = 0; j < point.size(); ++j) {
    Eigen::VectorXd plus = point;
    Eigen::VectorXd minus = point;
    plus(j) += step;
    minus(j) -= step;
    jac.col(j) = (f(plus) - f(minus)) / (2.0 * step);
  }
  return jac;
}

}  // namespace oshield::poly
