#include "oshield/poly/compiled.h"

#include <set>

#include "oshield/errors.h"
#include "oshield/simd/kernels.h"

namespace oshield::poly {

CompiledPolyMap::CompiledPolyMap(const PolynomialMap& map)
    : input_dim_(map.input_dim()), output_dim_(map.output_dim()) {
  // Collect the support and close it under "drop one power of the first
  // nonzero variable" so every monomial has its parent in the table.
  std::set<Exponent, GradedLex> support;
  support.insert(Exponent(input_dim_, 0));
  for (const auto& comp : map.components()) {
    for (const auto& [e, c] : comp.terms()) {
      Exponent cur = e;
      while (support.insert(cur).second) {
        int v = 0;
        while (v < input_dim_ && cur[v] == 0) ++v;
        if (v == input_dim_) break;
        cur[v] -= 1;
      }
    }
  }
  std::vector<Exponent> order(support.begin(), support.end());
  std::map<Exponent, int, GradedLex> index;
  for (int k = 0; k < static_cast<int>(order.size()); ++k) index.emplace(order[k], k);

  parent_.assign(order.size(), -1);
  var_.assign(order.size(), -1);
  for (int k = 1; k < static_cast<int>(order.size()); ++k) {
    Exponent p = order[k];
    int v = 0;
    while (p[v] == 0) ++v;
    p[v] -= 1;
    parent_[k] = index.at(p);
    var_[k] = v;
  }

  coeffs_.assign(static_cast<std::size_t>(output_dim_) * order.size(), 0.0);
  for (int i = 0; i < output_dim_; ++i) {
    for (const auto& [e, c] : map[i].terms()) {
      coeffs_[i * order.size() + index.at(e)] = c;
    }
  }
  zero_bias_.assign(output_dim_, 0.0);
}

void CompiledPolyMap::eval(std::span<const double> x, std::span<double> out,
                           std::span<double> scratch) const {
  if (static_cast<int>(x.size()) != input_dim_ ||
      static_cast<int>(out.size()) != output_dim_ ||
      scratch.size() < parent_.size()) {
    throw InputError("compiled polynomial map: size mismatch");
  }
  double* m = scratch.data();
  m[0] = 1.0;
  for (std::size_t k = 1; k < parent_.size(); ++k) m[k] = m[parent_[k]] * x[var_[k]];
  simd::active().gemv(coeffs_.data(), m, zero_bias_.data(), out.data(),
                      static_cast<std::size_t>(output_dim_), parent_.size());
}

void CompiledPolyMap::eval(std::span<const double> x, std::span<double> out) const {
  thread_local std::vector<double> scratch;
  if (scratch.size() < parent_.size()) scratch.resize(parent_.size());
  eval(x, out, scratch);
}

Eigen::VectorXd CompiledPolyMap::eval(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(output_dim_);
  eval(std::span<const double>(x.data(), x.size()), std::span<double>(out.data(), out.size()));
  return out;
}

CompiledPolyMapWithJacobian::CompiledPolyMapWithJacobian(const PolynomialMap& map)
    : value_(map) {
  std::vector<Polynomial> derivs;
  derivs.reserve(static_cast<std::size_t>(map.output_dim()) * map.input_dim());
  for (int i = 0; i < map.output_dim(); ++i) {
    for (int j = 0; j < map.input_dim(); ++j) derivs.push_back(map[i].derivative(j));
  }
  jacobian_ = CompiledPolyMap(PolynomialMap(map.input_dim(), std::move(derivs)));
}

}  // namespace oshield::poly
