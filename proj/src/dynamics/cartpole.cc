#include "oshield/dynamics/cartpole.h"

#include <array>
#include <cmath>

#include "oshield/errors.h"
#include "oshield/poly/jet.h"
#include "oshield/poly/taylor.h"

namespace oshield::dyn {
namespace {

// Euler step of the classic cart-pole equations; T is double or a Jet.
template <class T>
std::array<T, 4> euler_step(const CartPoleParams& p, const T& z, const T& v, const T& th,
                            const T& om, const T& u) {
  using std::cos;
  using std::sin;
  const double total = p.cart_mass + p.pole_mass;
  const double pml = p.pole_mass * p.half_length;
  const T s = sin(th);
  const T c = cos(th);
  const T temp = u + pml * om * om * s / total;
  const T thacc = (p.gravity * s - c * temp) /
                  (p.half_length * (4.0 / 3.0 - p.pole_mass * c * c / total));
  const T xacc = temp - pml * thacc * c / total;
  return {z + p.dt * v, v + p.dt * xacc, th + p.dt * om, om + p.dt * thacc};
}

std::vector<poly::Jet> jet_step(const CartPoleParams& p, const std::vector<poly::Jet>& in) {
  auto out = euler_step(p, in[0], in[1], in[2], in[3], in[4]);
  return {out[0], out[1], out[2], out[3]};
}

}  // namespace

CartPole::CartPole(const CartPoleParams& params, Variant variant)
    : params_(params), variant_(variant) {
  safe_.a = Mat::Zero(2, 4);
  safe_.a(0, 2) = 1.0;
  safe_.a(1, 2) = -1.0;
  safe_.b = Vec::Constant(2, params_.theta_max);
  low_ = Vec::Constant(1, -params_.action_bound);
  high_ = Vec::Constant(1, params_.action_bound);

  poly::SmoothMap f;
  f.input_dim = 5;
  f.output_dim = 4;
  f.value = [p = params_](const Eigen::VectorXd& w) {
    auto o = euler_step<double>(p, w(0), w(1), w(2), w(3), w(4));
    return Vec(Eigen::Vector4d(o[0], o[1], o[2], o[3]));
  };
  f.jet = [p = params_](const std::vector<poly::Jet>& w) { return jet_step(p, w); };
  surrogate_ = poly::taylor_expand(f, Vec::Zero(5), params_.surrogate_degree);
  compiled_ = std::make_shared<poly::CompiledPolyMapWithJacobian>(surrogate_);
}

int CartPole::default_horizon() const {
  return variant_ == Variant::kModified ? params_.horizon_modified : params_.horizon_original;
}

Vec CartPole::true_step(const Vec& x, const Vec& u) const {
  auto o = euler_step<double>(params_, x(0), x(1), x(2), x(3), u(0));
  return Eigen::Vector4d(o[0], o[1], o[2], o[3]);
}

Vec CartPole::surrogate_step(const Vec& x, const Vec& u) const {
  double in[5] = {x(0), x(1), x(2), x(3), u(0)};
  Vec out(4);
  compiled_->value().eval(in, std::span<double>(out.data(), 4));
  return out;
}

void CartPole::step_jacobian(const Vec& x, const Vec& u, bool use_surrogate, Mat& dx,
                             Mat& du) const {
  const Vec uc = clamp_action(u);
  Eigen::Matrix<double, 4, 5, Eigen::RowMajor> j;
  if (use_surrogate) {
    double in[5] = {x(0), x(1), x(2), x(3), uc(0)};
    compiled_->jacobian().eval(in, std::span<double>(j.data(), 20));
  } else {
    static const auto space = std::make_shared<const poly::JetSpace>(5, 1);
    std::vector<poly::Jet> in;
    for (int i = 0; i < 5; ++i) in.push_back(poly::Jet::variable(space, i, i < 4 ? x(i) : uc(0)));
    const auto out = jet_step(params_, in);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 5; ++c) j(r, c) = out[r].coefficients()[poly::linear_index(*space, c)];
    }
  }
  dx = j.leftCols(4);
  du = j.rightCols(1);
}

Vec CartPole::sample_initial(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> d(-params_.init_half_width, params_.init_half_width);
  Vec x(4);
  for (int i = 0; i < 4; ++i) x(i) = d(rng);
  return x;
}

double CartPole::training_reward(const Vec& x, Vec* grad) const {
  const double dv = x(1) - params_.target_velocity;
  const double r = -dv * dv - params_.theta_weight * x(2) * x(2) -
                   params_.omega_weight * x(3) * x(3);
  if (grad) {
    grad->setZero(4);
    (*grad)(1) = -2.0 * dv;
    (*grad)(2) = -2.0 * params_.theta_weight * x(2);
    (*grad)(3) = -2.0 * params_.omega_weight * x(3);
  }
  return r;
}

double CartPole::task_metric(const std::vector<Vec>& trajectory) const {
  if (trajectory.empty()) return 0.0;
  return trajectory.back()(0) - trajectory.front()(0);
}

Target CartPole::lqr_target(const Vec& x) const {
  Target t;
  t.x = Vec::Zero(4);
  t.x(0) = x(0);
  t.u = Vec::Zero(1);
  return t;
}

CanonicalTarget CartPole::canonicalize(const Target& t) const {
  CanonicalTarget c;
  c.target.x = t.x;
  c.target.x(0) = 0.0;
  c.target.u = t.u;
  c.map.offset = Vec::Zero(4);
  c.map.offset(0) = t.x(0);
  c.map.rotation = Mat::Identity(4, 4);
  return c;
}

std::shared_ptr<const Environment> CartPole::instance(std::uint64_t) const {
  return std::make_shared<CartPole>(*this);
}

}  // namespace oshield::dyn
