#pragma once

// Truncated multivariate Taylor arithmetic ("jets"). A Jet over a JetSpace
// (n variables, order d) stores the Taylor coefficients of a smooth function
// in the displacement variables; arithmetic drops every term above order d.
// Order 1 is ordinary forward-mode dual numbers.

#include <memory>
#include <vector>

#include "oshield/poly/polynomial.h"

namespace oshield::poly {

class JetSpace {
 public:
  JetSpace(int num_vars, int order);

  int num_vars() const { return num_vars_; }
  int order() const { return order_; }
  int size() const { return static_cast<int>(exponents_.size()); }
  const std::vector<Exponent>& exponents() const { return exponents_; }
  int index_of(const Exponent& e) const;  // -1 if not representable

  struct Product {
    int lhs;
    int rhs;
    int out;
  };
  // Every (i, j) whose exponent sum stays within order, grouped by `out`.
  const std::vector<Product>& products() const { return products_; }

 private:
  int num_vars_;
  int order_;
  std::vector<Exponent> exponents_;
  std::map<Exponent, int, GradedLex> index_;
  std::vector<Product> products_;
};

class Jet {
 public:
  Jet() = default;
  Jet(std::shared_ptr<const JetSpace> space, double value);

  // The jet of x_i = value + delta_i.
  static Jet variable(std::shared_ptr<const JetSpace> space, int index, double value);

  const std::shared_ptr<const JetSpace>& space() const { return space_; }
  double value() const { return coeffs_.empty() ? 0.0 : coeffs_[0]; }
  const std::vector<double>& coefficients() const { return coeffs_; }
  std::vector<double>& coefficients() { return coeffs_; }

  // Taylor polynomial in the displacement variables.
  Polynomial to_polynomial() const;

  Jet& operator+=(const Jet& o);
  Jet& operator-=(const Jet& o);
  Jet& operator*=(const Jet& o);
  Jet& operator/=(const Jet& o);
  Jet& operator+=(double c);
  Jet& operator-=(double c);
  Jet& operator*=(double c);
  Jet& operator/=(double c);
  Jet operator-() const;

  // f(value + h) = sum_k series[k] h^k, where h is the non-constant part.
  // series.size() must be order + 1.
  Jet apply_series(const std::vector<double>& series) const;

 private:
  std::shared_ptr<const JetSpace> space_;
  std::vector<double> coeffs_;
};

inline Jet operator+(Jet a, const Jet& b) { return a += b; }
inline Jet operator-(Jet a, const Jet& b) { return a -= b; }
inline Jet operator*(Jet a, const Jet& b) { return a *= b; }
inline Jet operator/(Jet a, const Jet& b) { return a /= b; }
inline Jet operator+(Jet a, double c) { return a += c; }
inline Jet operator+(double c, Jet a) { return a += c; }
inline Jet operator-(Jet a, double c) { return a -= c; }
inline Jet operator-(double c, const Jet& a) { return (-a) += c; }
inline Jet operator*(Jet a, double c) { return a *= c; }
inline Jet operator*(double c, Jet a) { return a *= c; }
inline Jet operator/(Jet a, double c) { return a /= c; }
Jet operator/(double c, const Jet& a);

// Coefficient slot of d/d(delta_var) in jets over `space` (order >= 1).
int linear_index(const JetSpace& space, int var);

Jet sin(const Jet& a);
Jet cos(const Jet& a);
Jet tan(const Jet& a);
Jet sqrt(const Jet& a);
Jet exp(const Jet& a);

}  // namespace oshield::poly
