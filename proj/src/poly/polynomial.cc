#include "oshield/poly/polynomial.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "oshield/errors.h"

namespace oshield::poly {

int total_degree(const Exponent& e) {
  return std::accumulate(e.begin(), e.end(), 0);
}

bool GradedLex::operator()(const Exponent& a, const Exponent& b) const {
  const int da = total_degree(a);
  const int db = total_degree(b);
  if (da != db) return da < db;
  // Same degree: the exponent with the larger leading power sorts later.
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

namespace {

void enumerate(int n, int var, int remaining, Exponent& cur,
               std::vector<Exponent>& out) {
  if (var == n - 1) {
    cur[var] = static_cast<std::uint8_t>(remaining);
    out.push_back(cur);
    return;
  }
  for (int k = remaining; k >= 0; --k) {
    cur[var] = static_cast<std::uint8_t>(k);
    enumerate(n, var + 1, remaining - k, cur, out);
  }
  cur[var] = 0;
}

void check_dims(int a, int b) {
  if (a != b) {
    throw InputError("polynomial dimension mismatch: " + std::to_string(a) +
                     " vs " + std::to_string(b));
  }
}

}  // namespace

std::vector<Exponent> monomials_up_to(int n, int lo, int hi) {
  std::vector<Exponent> out;
  Exponent cur(n, 0);
  for (int d = std::max(lo, 0); d <= hi; ++d) {
    std::vector<Exponent> level;
    enumerate(n, 0, d, cur, level);
    std::sort(level.begin(), level.end(), GradedLex{});
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

Polynomial::Polynomial(int dimension) : dimension_(dimension) {
  if (dimension <= 0) throw InputError("polynomial dimension must be positive");
}

Polynomial Polynomial::constant(int dimension, double c) {
  Polynomial p(dimension);
  p.add_term(Exponent(dimension, 0), c);
  return p;
}

Polynomial Polynomial::variable(int dimension, int index) {
  if (index < 0 || index >= dimension) throw InputError("variable index out of range");
  Exponent e(dimension, 0);
  e[index] = 1;
  return monomial(std::move(e), 1.0);
}

Polynomial Polynomial::monomial(Exponent exponent, double c) {
  Polynomial p(static_cast<int>(exponent.size()));
  p.add_term(exponent, c);
  return p;
}

Polynomial Polynomial::quadratic(const Eigen::MatrixXd& q, const Eigen::VectorXd& g,
                                 double c) {
  const int n = static_cast<int>(q.rows());
  if (q.cols() != n || g.size() != n) throw InputError("quadratic: shape mismatch");
  Polynomial p = constant(n, c);
  for (int i = 0; i < n; ++i) {
    Exponent e(n, 0);
    e[i] = 1;
    p.add_term(e, g(i));
    for (int j = i; j < n; ++j) {
      Exponent f(n, 0);
      f[i] += 1;
      f[j] += 1;
      p.add_term(f, i == j ? q(i, i) : q(i, j) + q(j, i));
    }
  }
  return p;
}

Polynomial Polynomial::affine(const Eigen::VectorXd& a, double b) {
  const int n = static_cast<int>(a.size());
  Polynomial p = constant(n, b);
  for (int i = 0; i < n; ++i) {
    Exponent e(n, 0);
    e[i] = 1;
    p.add_term(e, a(i));
  }
  return p;
}

int Polynomial::degree() const {
  return terms_.empty() ? 0 : total_degree(terms_.rbegin()->first);
}

int Polynomial::min_degree() const {
  return terms_.empty() ? 0 : total_degree(terms_.begin()->first);
}

double Polynomial::coefficient(const Exponent& e) const {
  auto it = terms_.find(e);
  return it == terms_.end() ? 0.0 : it->second;
}

double Polynomial::max_abs_coefficient() const {
  double m = 0.0;
  for (const auto& [e, c] : terms_) m = std::max(m, std::abs(c));
  return m;
}

double Polynomial::coefficient_norm() const {
  double s = 0.0;
  for (const auto& [e, c] : terms_) s += c * c;
  return std::sqrt(s);
}

bool Polynomial::is_even() const {
  return std::all_of(terms_.begin(), terms_.end(),
                     [](const auto& t) { return total_degree(t.first) % 2 == 0; });
}

void Polynomial::add_term(const Exponent& e, double c) {
  if (static_cast<int>(e.size()) != dimension_) {
    throw InputError("exponent length does not match polynomial dimension");
  }
  if (c == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(e, c);
  if (!inserted) it->second += c;
  if (std::abs(it->second) < kDropTolerance) terms_.erase(it);
}

double Polynomial::operator()(std::span<const double> point) const {
  if (static_cast<int>(point.size()) != dimension_) {
    throw InputError("evaluation point has wrong dimension");
  }
  double sum = 0.0;
  for (const auto& [e, c] : terms_) {
    double m = c;
    for (int i = 0; i < dimension_; ++i) {
      for (int k = 0; k < e[i]; ++k) m *= point[i];
    }
    sum += m;
  }
  return sum;
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  check_dims(dimension_, other.dimension_);
  for (const auto& [e, c] : other.terms_) add_term(e, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
  check_dims(dimension_, other.dimension_);
  for (const auto& [e, c] : other.terms_) add_term(e, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double c) {
  if (c == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto it = terms_.begin(); it != terms_.end();) {
    it->second *= c;
    if (std::abs(it->second) < kDropTolerance) {
      it = terms_.erase(it);
    } else {
      ++it;
    }
  }
  return *this;
}

Polynomial Polynomial::operator-() const {
  Polynomial p = *this;
  for (auto& [e, c] : p.terms_) c = -c;
  return p;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  check_dims(a.dimension_, b.dimension_);
  Polynomial::TermMap acc;
  Exponent e(a.dimension_, 0);
  for (const auto& [ea, ca] : a.terms_) {
    for (const auto& [eb, cb] : b.terms_) {
      for (int i = 0; i < a.dimension_; ++i) e[i] = ea[i] + eb[i];
      acc[e] += ca * cb;
    }
  }
  Polynomial out(a.dimension_);
  for (auto it = acc.begin(); it != acc.end();) {
    if (std::abs(it->second) < Polynomial::kDropTolerance) {
      it = acc.erase(it);
    } else {
      ++it;
    }
  }
  out.terms_ = std::move(acc);
  return out;
}

Polynomial Polynomial::pow(int k) const {
  if (k < 0) throw InputError("negative polynomial power");
  Polynomial result = constant(dimension_, 1.0);
  Polynomial base = *this;
  while (k > 0) {
    if (k & 1) result = result * base;
    k >>= 1;
    if (k > 0) base = base * base;
  }
  return result;
}

Polynomial Polynomial::derivative(int var) const {
  if (var < 0 || var >= dimension_) throw InputError("derivative variable out of range");
  Polynomial d(dimension_);
  for (const auto& [e, c] : terms_) {
    if (e[var] == 0) continue;
    Exponent f = e;
    f[var] -= 1;
    d.add_term(f, c * e[var]);
  }
  return d;
}

Polynomial Polynomial::truncate(int max_degree) const {
  Polynomial p(dimension_);
  for (const auto& [e, c] : terms_) {
    if (total_degree(e) <= max_degree) p.terms_.emplace_hint(p.terms_.end(), e, c);
  }
  return p;
}

Polynomial Polynomial::compose_affine(const Eigen::MatrixXd& m,
                                      const Eigen::VectorXd& v) const {
  if (m.rows() != dimension_ || v.size() != dimension_) {
    throw InputError("compose_affine: map rows must equal polynomial dimension");
  }
  std::vector<Polynomial> g;
  g.reserve(dimension_);
  for (int i = 0; i < dimension_; ++i) {
    g.push_back(affine(m.row(i).transpose(), v(i)));
  }
  return substitute(g);
}

Polynomial Polynomial::substitute(const std::vector<Polynomial>& g) const {
  if (static_cast<int>(g.size()) != dimension_) {
    throw InputError("substitute: need one polynomial per variable");
  }
  const int out_dim = g.empty() ? 1 : g.front().dimension();
  for (const auto& gi : g) check_dims(out_dim, gi.dimension());

  // powers[i][k] = g[i]^k, built lazily.
  std::vector<std::vector<Polynomial>> powers(dimension_);
  auto power = [&](int i, int k) -> const Polynomial& {
    auto& list = powers[i];
    if (list.empty()) list.push_back(constant(out_dim, 1.0));
    while (static_cast<int>(list.size()) <= k) list.push_back(list.back() * g[i]);
    return list[k];
  };

  Polynomial result(out_dim);
  for (const auto& [e, c] : terms_) {
    Polynomial term = constant(out_dim, c);
    for (int i = 0; i < dimension_; ++i) {
      if (e[i] > 0) term = term * power(i, e[i]);
    }
    result += term;
  }
  return result;
}

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  os.precision(6);
  bool first = true;
  for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
    const auto& [e, c] = *it;
    if (!first) os << (c < 0 ? " - " : " + ");
    else if (c < 0) os << "-";
    first = false;
    const double a = std::abs(c);
    const bool unit = total_degree(e) > 0 && a == 1.0;
    if (!unit) os << a;
    bool first_var = unit;
    for (int i = 0; i < dimension_; ++i) {
      if (e[i] == 0) continue;
      if (!first_var) os << "*";
      first_var = false;
      os << "x" << i;
      if (e[i] > 1) os << "^" << int(e[i]);
    }
  }
  return os.str();
}

PolynomialMap::PolynomialMap(int input_dim, std::vector<Polynomial> components)
    : input_dim_(input_dim), components_(std::move(components)) {
  for (const auto& c : components_) {
    if (c.dimension() != input_dim_) {
      throw InputError("polynomial map component has wrong input dimension");
    }
  }
}

int PolynomialMap::degree() const {
  int d = 0;
  for (const auto& c : components_) d = std::max(d, c.degree());
  return d;
}

Eigen::VectorXd PolynomialMap::operator()(const Eigen::VectorXd& point) const {
  if (point.size() != input_dim_) throw InputError("polynomial map: wrong input size");
  Eigen::VectorXd out(output_dim());
  for (int i = 0; i < output_dim(); ++i) out(i) = components_[i](point);
  return out;
}

Eigen::MatrixXd PolynomialMap::jacobian(const Eigen::VectorXd& point) const {
  if (point.size() != input_dim_) throw InputError("polynomial map: wrong input size");
  Eigen::MatrixXd jac(output_dim(), input_dim_);
  for (int i = 0; i < output_dim(); ++i) {
    for (int j = 0; j < input_dim_; ++j) {
      jac(i, j) = components_[i].derivative(j)(point);
    }
  }
  return jac;
}

PolynomialMap PolynomialMap::compose_affine(const Eigen::MatrixXd& m,
                                            const Eigen::VectorXd& v) const {
  std::vector<Polynomial> out;
  out.reserve(components_.size());
  for (const auto& c : components_) out.push_back(c.compose_affine(m, v));
  return PolynomialMap(static_cast<int>(m.cols()), std::move(out));
}

PolynomialMap PolynomialMap::substitute(const std::vector<Polynomial>& g) const {
  std::vector<Polynomial> out;
  out.reserve(components_.size());
  for (const auto& c : components_) out.push_back(c.substitute(g));
  const int dim = g.empty() ? input_dim_ : g.front().dimension();
  return PolynomialMap(dim, std::move(out));
}

}  // namespace oshield::poly
