#include "oshield/poly/jet.h"

#include <cmath>

#include "oshield/errors.h"

namespace oshield::poly {

JetSpace::JetSpace(int num_vars, int order) : num_vars_(num_vars), order_(order) {
  if (num_vars <= 0 || order < 0) throw InputError("invalid jet space");
  exponents_ = monomials_up_to(num_vars, 0, order);
  for (int i = 0; i < size(); ++i) index_.emplace(exponents_[i], i);
  Exponent sum(num_vars, 0);
  for (int i = 0; i < size(); ++i) {
    const int di = total_degree(exponents_[i]);
    for (int j = 0; j < size(); ++j) {
      if (di + total_degree(exponents_[j]) > order) continue;
      for (int v = 0; v < num_vars; ++v) sum[v] = exponents_[i][v] + exponents_[j][v];
      products_.push_back({i, j, index_.at(sum)});
    }
  }
}

int JetSpace::index_of(const Exponent& e) const {
  auto it = index_.find(e);
  return it == index_.end() ? -1 : it->second;
}

Jet::Jet(std::shared_ptr<const JetSpace> space, double value)
    : space_(std::move(space)), coeffs_(space_->size(), 0.0) {
  coeffs_[0] = value;
}

Jet Jet::variable(std::shared_ptr<const JetSpace> space, int index, double value) {
  Jet j(space, value);
  if (space->order() >= 1) {
    Exponent e(space->num_vars(), 0);
    e[index] = 1;
    j.coeffs_[space->index_of(e)] = 1.0;
  }
  return j;
}

Polynomial Jet::to_polynomial() const {
  Polynomial p(space_->num_vars());
  for (int k = 0; k < space_->size(); ++k) p.add_term(space_->exponents()[k], coeffs_[k]);
  return p;
}

namespace {

void require_same(const Jet& a, const Jet& b) {
  if (a.space() != b.space()) throw InputError("jets live in different spaces");
}

}  // namespace

Jet& Jet::operator+=(const Jet& o) {
  require_same(*this, o);
  for (std::size_t k = 0; k < coeffs_.size(); ++k) coeffs_[k] += o.coeffs_[k];
  return *this;
}

Jet& Jet::operator-=(const Jet& o) {
  require_same(*this, o);
  for (std::size_t k = 0; k < coeffs_.size(); ++k) coeffs_[k] -= o.coeffs_[k];
  return *this;
}

Jet& Jet::operator*=(const Jet& o) {
  require_same(*this, o);
  std::vector<double> out(coeffs_.size(), 0.0);
  for (const auto& p : space_->products()) out[p.out] += coeffs_[p.lhs] * o.coeffs_[p.rhs];
  coeffs_ = std::move(out);
  return *this;
}

Jet& Jet::operator/=(const Jet& o) {
  *this *= (1.0 / o);
  return *this;
}

Jet& Jet::operator+=(double c) {
  coeffs_[0] += c;
  return *this;
}

Jet& Jet::operator-=(double c) {
  coeffs_[0] -= c;
  return *this;
}

Jet& Jet::operator*=(double c) {
  for (double& x : coeffs_) x *= c;
  return *this;
}

Jet& Jet::operator/=(double c) {
  for (double& x : coeffs_) x /= c;
  return *this;
}

Jet Jet::operator-() const {
  Jet j = *this;
  for (double& x : j.coeffs_) x = -x;
  return j;
}

Jet Jet::apply_series(const std::vector<double>& series) const {
  const int d = space_->order();
  if (static_cast<int>(series.size()) != d + 1) {
    throw InputError("series length must be order + 1");
  }
  Jet h = *this;
  h.coeffs_[0] = 0.0;
  // Horner in the nilpotent part: h^(d+1) vanishes.
  Jet acc(space_, series[d]);
  for (int k = d - 1; k >= 0; --k) {
    acc *= h;
    acc.coeffs_[0] += series[k];
  }
  return acc;
}

Jet operator/(double c, const Jet& a) {
  const double a0 = a.value();
  if (a0 == 0.0 || !std::isfinite(a0)) throw NumericError("jet division by zero");
  const int d = a.space()->order();
  // 1/(a0 + h) = sum_k (-1)^k h^k / a0^(k+1)
  std::vector<double> series(d + 1);
  double term = c / a0;
  for (int k = 0; k <= d; ++k) {
    series[k] = term;
    term *= -1.0 / a0;
  }
  return a.apply_series(series);
}

int linear_index(const JetSpace& space, int var) {
  Exponent e(space.num_vars(), 0);
  e[var] = 1;
  const int idx = space.index_of(e);
  if (idx < 0) throw InputError("jet space has no linear terms");
  return idx;
}

Jet sin(const Jet& a) {
  const int d = a.space()->order();
  const double s = std::sin(a.value());
  const double c = std::cos(a.value());
  // k-th derivative of sin cycles through sin, cos, -sin, -cos.
  const double cycle[4] = {s, c, -s, -c};
  std::vector<double> series(d + 1);
  double fact = 1.0;
  for (int k = 0; k <= d; ++k) {
    if (k > 0) fact *= k;
    series[k] = cycle[k % 4] / fact;
  }
  return a.apply_series(series);
}

Jet cos(const Jet& a) {
  const int d = a.space()->order();
  const double s = std::sin(a.value());
  const double c = std::cos(a.value());
  const double cycle[4] = {c, -s, -c, s};
  std::vector<double> series(d + 1);
  double fact = 1.0;
  for (int k = 0; k <= d; ++k) {
    if (k > 0) fact *= k;
    series[k] = cycle[k % 4] / fact;
  }
  return a.apply_series(series);
}

Jet tan(const Jet& a) { return sin(a) / cos(a); }

Jet sqrt(const Jet& a) {
  const double a0 = a.value();
  if (!(a0 > 0.0)) throw NumericError("jet sqrt of non-positive value");
  const int d = a.space()->order();
  // sqrt(a0) * (1 + h/a0)^(1/2), binomial series.
  std::vector<double> series(d + 1);
  double binom = 1.0;
  const double root = std::sqrt(a0);
  for (int k = 0; k <= d; ++k) {
    series[k] = root * binom / std::pow(a0, k);
    binom *= (0.5 - k) / (k + 1);
  }
  return a.apply_series(series);
}

Jet exp(const Jet& a) {
  const int d = a.space()->order();
  const double e = std::exp(a.value());
  std::vector<double> series(d + 1);
  double fact = 1.0;
  for (int k = 0; k <= d; ++k) {
    if (k > 0) fact *= k;
    series[k] = e / fact;
  }
  return a.apply_series(series);
}

}  // namespace oshield::poly
