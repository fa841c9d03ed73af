#pragma once

#include <span>
#include <vector>

#include "oshield/poly/polynomial.h"

namespace oshield::poly {

// Flattened PolynomialMap for repeated evaluation. Monomials are generated by
// the recurrence m[k] = m[parent[k]] * x[var[k]] and contracted against a dense
// row-major coefficient matrix with the active SIMD kernels.
class CompiledPolyMap {
 public:
  CompiledPolyMap() = default;
  explicit CompiledPolyMap(const PolynomialMap& map);

  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  int num_monomials() const { return static_cast<int>(parent_.size()); }
  bool empty() const { return output_dim_ == 0; }

  // out.size() == output_dim(); `scratch` must hold num_monomials() doubles.
  void eval(std::span<const double> x, std::span<double> out,
            std::span<double> scratch) const;
  // Convenience overload with an internal thread-local scratch buffer.
  void eval(std::span<const double> x, std::span<double> out) const;
  Eigen::VectorXd eval(const Eigen::VectorXd& x) const;

 private:
  int input_dim_ = 0;
  int output_dim_ = 0;
  std::vector<int> parent_;
  std::vector<int> var_;
  std::vector<double> coeffs_;  // output_dim x num_monomials
  std::vector<double> zero_bias_;
};

// Map plus its Jacobian, compiled together (derivative components flattened
// row-major as d f_i / d x_j at index i * input_dim + j).
class CompiledPolyMapWithJacobian {
 public:
  CompiledPolyMapWithJacobian() = default;
  explicit CompiledPolyMapWithJacobian(const PolynomialMap& map);

  const CompiledPolyMap& value() const { return value_; }
  const CompiledPolyMap& jacobian() const { return jacobian_; }

 private:
  CompiledPolyMap value_;
  CompiledPolyMap jacobian_;
};

}  // namespace oshield::poly
