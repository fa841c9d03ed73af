#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace oshield::poly {

// Exponent multi-index; one entry per variable.
using Exponent = std::vector<std::uint8_t>;

int total_degree(const Exponent& e);

// Graded lexicographic order: lower total degree first, ties broken
// lexicographically with x_0 most significant (x_0^2 > x_0 x_1 > x_1^2).
struct GradedLex {
  bool operator()(const Exponent& a, const Exponent& b) const;
};

// All exponents in `n` variables with total degree in [lo, hi], graded-lex.
std::vector<Exponent> monomials_up_to(int n, int lo, int hi);

class Polynomial {
 public:
  using TermMap = std::map<Exponent, double, GradedLex>;

  // Coefficients below this magnitude are dropped when canonicalizing.
  static constexpr double kDropTolerance = 1e-14;

  explicit Polynomial(int dimension = 1);

  static Polynomial constant(int dimension, double c);
  static Polynomial variable(int dimension, int index);
  static Polynomial monomial(Exponent exponent, double c);
  // x^T Q x + g^T x + c over Q.rows() variables.
  static Polynomial quadratic(const Eigen::MatrixXd& q, const Eigen::VectorXd& g,
                              double c);
  // a^T x + b
  static Polynomial affine(const Eigen::VectorXd& a, double b);

  int dimension() const { return dimension_; }
  int degree() const;
  int min_degree() const;  // 0 for the zero polynomial
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }
  const TermMap& terms() const { return terms_; }
  double coefficient(const Exponent& e) const;
  double max_abs_coefficient() const;
  double coefficient_norm() const;  // Euclidean norm of the coefficient vector

  // Every term has even total degree (p(-x) = p(x)).
  bool is_even() const;

  // Accumulates c into the coefficient of e, then canonicalizes that term.
  void add_term(const Exponent& e, double c);

  double operator()(std::span<const double> point) const;
  double operator()(const Eigen::VectorXd& point) const {
    return (*this)(std::span<const double>(point.data(), point.size()));
  }

  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  Polynomial& operator*=(double c);
  Polynomial operator-() const;

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(Polynomial a, double c) { return a *= c; }
  friend Polynomial operator*(double c, Polynomial a) { return a *= c; }

  Polynomial pow(int k) const;
  Polynomial derivative(int var) const;
  Polynomial truncate(int max_degree) const;

  // Substitutes x = M y + v, where y has M.cols() variables. M has one row per
  // variable of this polynomial.
  Polynomial compose_affine(const Eigen::MatrixXd& m, const Eigen::VectorXd& v) const;

  // Substitutes x_i = g[i](y); all g[i] share one dimension.
  Polynomial substitute(const std::vector<Polynomial>& g) const;

  std::string to_string() const;

  friend bool operator==(const Polynomial& a, const Polynomial& b) {
    return a.dimension_ == b.dimension_ && a.terms_ == b.terms_;
  }

 private:
  int dimension_;
  TermMap terms_;
};

// Vector-valued polynomial sharing one input space.
class PolynomialMap {
 public:
  PolynomialMap() = default;
  PolynomialMap(int input_dim, std::vector<Polynomial> components);

  int input_dim() const { return input_dim_; }
  int output_dim() const { return static_cast<int>(components_.size()); }
  int degree() const;
  const Polynomial& operator[](int i) const { return components_[i]; }
  Polynomial& operator[](int i) { return components_[i]; }
  const std::vector<Polynomial>& components() const { return components_; }

  Eigen::VectorXd operator()(const Eigen::VectorXd& point) const;
  // Entry (i, j) = d f_i / d x_j at `point`.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& point) const;

  PolynomialMap compose_affine(const Eigen::MatrixXd& m, const Eigen::VectorXd& v) const;
  PolynomialMap substitute(const std::vector<Polynomial>& g) const;

 private:
  int input_dim_ = 0;
  std::vector<Polynomial> components_;
};

}  // namespace oshield::poly
