#include "oshield/dynamics/bicycle.h"

#include <cmath>

#include "oshield/errors.h"
#include "oshield/poly/jet.h"

namespace oshield::dyn {
namespace {

template <class T>
std::array<T, 5> kinematic_step(double dt, const T& xf, const T& yf, const T& xb, const T& yb,
                                const T& v, const T& a, const T& steer) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  using std::tan;
  const T dx = xf - xb;
  const T dy = yf - yb;
  const T len = sqrt(dx * dx + dy * dy);
  const T cx = dx / len;
  const T cy = dy / len;
  const T bx = xb + v * cx;
  const T by = yb + v * cy;
  const T turn = v * tan(steer) / len;
  const T ct = cos(turn);
  const T st = sin(turn);
  const T nx = cx * ct - cy * st;
  const T ny = cx * st + cy * ct;
  return {bx + len * nx, by + len * ny, bx, by, v + dt * a};
}

Eigen::Matrix2d heading_rotation(const Vec& x) {
  const double dx = x(0) - x(2);
  const double dy = x(1) - x(3);
  const double len = std::hypot(dx, dy);
  if (!(len > 0.0)) throw NumericError("bicycle front and back points coincide");
  Eigen::Matrix2d r;
  r << dx / len, -dy / len, dy / len, dx / len;
  return r;
}

}  // namespace

Bicycle::Bicycle(const BicycleParams& params, Variant variant, std::uint64_t obstacle_seed)
    : params_(params), variant_(variant), seed_(obstacle_seed) {
  std::mt19937_64 rng(obstacle_seed);
  std::uniform_real_distribution<double> d(-params_.obstacle_y_half_width,
                                           params_.obstacle_y_half_width);
  for (double& y : obstacle_y_) y = d(rng);

  safe_.a = Mat::Zero(0, 5);
  safe_.b = Vec::Zero(0);
  for (int k = 0; k < 2; ++k) {
    for (int point = 0; point < 2; ++point) {
      DiskExclusion disk;
      disk.ix = 2 * point;
      disk.iy = 2 * point + 1;
      disk.center = Eigen::Vector2d(params_.obstacle_x[k], obstacle_y_[k]);
      disk.radius = radius();
      safe_.disks.push_back(disk);
    }
  }
  low_ = Eigen::Vector2d(-params_.accel_bound, -params_.steer_bound);
  high_ = Eigen::Vector2d(params_.accel_bound, params_.steer_bound);
}

double Bicycle::radius() const {
  return variant_ == Variant::kModified ? params_.radius_modified : params_.radius_original;
}

Vec Bicycle::true_step(const Vec& x, const Vec& u) const {
  auto o = kinematic_step<double>(params_.dt, x(0), x(1), x(2), x(3), x(4), u(0), u(1));
  Vec out(5);
  for (int i = 0; i < 5; ++i) out(i) = o[i];
  return out;
}

void Bicycle::step_jacobian(const Vec& x, const Vec& u, bool, Mat& dx, Mat& du) const {
  static const auto space = std::make_shared<const poly::JetSpace>(7, 1);
  const Vec uc = clamp_action(u);
  std::vector<poly::Jet> in;
  for (int i = 0; i < 7; ++i) in.push_back(poly::Jet::variable(space, i, i < 5 ? x(i) : uc(i - 5)));
  auto o = kinematic_step(params_.dt, in[0], in[1], in[2], in[3], in[4], in[5], in[6]);
  dx.resize(5, 5);
  du.resize(5, 2);
  for (int r = 0; r < 5; ++r) {
    const auto& c = o[r].coefficients();
    for (int k = 0; k < 5; ++k) dx(r, k) = c[poly::linear_index(*space, k)];
    for (int k = 0; k < 2; ++k) du(r, k) = c[poly::linear_index(*space, 5 + k)];
  }
}

Vec Bicycle::sample_initial(std::mt19937_64&) const {
  Vec x(5);
  for (int i = 0; i < 5; ++i) x(i) = params_.initial_state[i];
  return x;
}

double Bicycle::training_reward(const Vec& x, Vec* grad) const {
  const double ex = x(0) - params_.goal_x;
  double r = -ex * ex;
  if (grad) {
    grad->setZero(5);
    (*grad)(0) = -2.0 * ex;
  }
  const double reach = radius() + params_.penalty_margin;
  for (const DiskExclusion& disk : safe_.disks) {
    const double px = x(disk.ix) - disk.center.x();
    const double py = x(disk.iy) - disk.center.y();
    const double d = std::hypot(px, py);
    const double h = reach - d;
    if (h <= 0.0) continue;
    r -= params_.penalty_weight * h * h;
    if (grad && d > 1e-12) {
      (*grad)(disk.ix) += 2.0 * params_.penalty_weight * h * px / d;
      (*grad)(disk.iy) += 2.0 * params_.penalty_weight * h * py / d;
    }
  }
  return r;
}

double Bicycle::task_metric(const std::vector<Vec>& trajectory) const {
  if (trajectory.empty()) return 0.0;
  return trajectory.back()(0) - trajectory.front()(0);
}

Target Bicycle::lqr_target(const Vec& x) const {
  const Eigen::Matrix2d r = heading_rotation(x);
  const double v = x(4);
  Target t;
  t.x = x;
  t.x(0) += v * r(0, 0);
  t.x(1) += v * r(1, 0);
  t.x(2) += v * r(0, 0);
  t.x(3) += v * r(1, 0);
  t.x(4) = 0.0;
  t.u = Vec::Zero(2);
  return t;
}

CanonicalTarget Bicycle::canonicalize(const Target& t) const {
  const Eigen::Matrix2d r = heading_rotation(t.x);
  CanonicalTarget c;
  c.map.offset = Vec::Zero(5);
  c.map.offset << t.x(0), t.x(1), t.x(0), t.x(1), 0.0;
  c.map.rotation = Mat::Identity(5, 5);
  c.map.rotation.block<2, 2>(0, 0) = r;
  c.map.rotation.block<2, 2>(2, 2) = r;
  c.target.x = c.map.to_canonical(t.x);
  c.target.u = t.u;
  return c;
}

std::optional<LinearReduction> Bicycle::linear_reduction() const {
  LinearReduction red;
  red.a = Eigen::Matrix2d{{1.0, 1.0}, {0.0, 1.0}};
  red.b = Eigen::Vector2d(0.0, params_.dt);
  red.project = Mat::Zero(2, 5);
  red.project(0, 0) = 1.0;
  red.project(1, 4) = 1.0;
  red.lift_action = Eigen::Vector2d(1.0, 0.0);
  red.manifold = Mat::Zero(3, 5);
  red.manifold(0, 1) = 1.0;
  red.manifold(1, 3) = 1.0;
  red.manifold(2, 0) = -1.0;
  red.manifold(2, 2) = 1.0;
  red.embed = Mat::Zero(5, 2);
  red.embed(0, 0) = 1.0;
  red.embed(2, 0) = 1.0;
  red.embed(4, 1) = 1.0;
  return red;
}

double Bicycle::manifold_residual(const Vec& x, const Target& t) const {
  const CanonicalTarget c = canonicalize(t);
  const Vec d = c.map.to_canonical(x) - c.target.x;
  return std::max({std::abs(d(1)), std::abs(d(3)), std::abs(d(2) - d(0))});
}

Vec Bicycle::policy_input(const Vec& x) const {
  Vec in(7);
  in.head(5) = x;
  in(5) = obstacle_y_[0];
  in(6) = obstacle_y_[1];
  return in;
}

std::shared_ptr<const Environment> Bicycle::instance(std::uint64_t scenario_seed) const {
  return std::make_shared<Bicycle>(params_, variant_, scenario_seed);
}

}  // namespace oshield::dyn
