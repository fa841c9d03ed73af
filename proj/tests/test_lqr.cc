#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "oshield/dynamics/bicycle.h"
#include "oshield/dynamics/cartpole.h"
#include "oshield/errors.h"
#include "oshield/lqr/lqr.h"
#include "oshield/poly/taylor.h"

using namespace oshield;
using namespace oshield::lqr;

namespace {

// Linear system f(x, u) = A x + B u with no surrogate.
class LinearEnv final : public dyn::Environment {
 public:
  LinearEnv(Mat a, Mat b) : a_(std::move(a)), b_(std::move(b)) {
    safe_.a = Mat::Zero(0, a_.rows());
    safe_.b = Vec::Zero(0);
    low_ = Vec::Constant(b_.cols(), -1e9);
    high_ = Vec::Constant(b_.cols(), 1e9);
  }
  std::string name() const override { return "linear"; }
  std::string variant() const override { return "original"; }
  int state_dim() const override { return static_cast<int>(a_.rows()); }
  int action_dim() const override { return static_cast<int>(b_.cols()); }
  std::vector<std::string> state_names() const override { return {}; }
  std::vector<std::string> action_names() const override { return {}; }
  int default_horizon() const override { return 10; }
  const dyn::SafeRegion& safe_region() const override { return safe_; }
  const Vec& action_low() const override { return low_; }
  const Vec& action_high() const override { return high_; }
  Vec true_step(const Vec& x, const Vec& u) const override { return a_ * x + b_ * u; }
  void step_jacobian(const Vec&, const Vec&, bool, Mat& dx, Mat& du) const override {
    dx = a_;
    du = b_;
  }
  Vec sample_initial(std::mt19937_64&) const override { return Vec::Zero(a_.rows()); }
  double training_reward(const Vec&, Vec*) const override { return 0; }
  double task_metric(const std::vector<Vec>&) const override { return 0; }
  dyn::Target lqr_target(const Vec& x) const override { return {x * 0, Vec::Zero(b_.cols())}; }
  dyn::CanonicalTarget canonicalize(const dyn::Target& t) const override {
    return {t, {Vec::Zero(a_.rows()), Mat::Identity(a_.rows(), a_.rows())}};
  }
  std::shared_ptr<const dyn::Environment> instance(std::uint64_t) const override {
    return std::make_shared<LinearEnv>(*this);
  }

 private:
  Mat a_, b_;
  dyn::SafeRegion safe_;
  Vec low_, high_;
};

// Finite-horizon Riccati recursion, written independently of the solver.
std::pair<Mat, Mat> value_iteration(const Mat& a, const Mat& b, const Mat& q, const Mat& r,
                                    int horizon) {
  Mat p = Mat::Zero(a.rows(), a.rows());
  Mat k;
  for (int t = 0; t < horizon; ++t) {
    const Mat s = r + b.transpose() * p * b;
    k = -s.inverse() * b.transpose() * p * a;
    const Mat cl = a + b * k;
    p = q + k.transpose() * r * k + cl.transpose() * p * cl;
    p = 0.5 * (p + p.transpose());
  }
  k = -(r + b.transpose() * p * b).inverse() * b.transpose() * p * a;
  return {p, k};
}

const dyn::EnvConfig kCfg{};

dyn::Target cartpole_target(double z) {
  Vec x = Vec::Zero(4);
  x(0) = z;
  return {x, Vec::Zero(1)};
}

}  // namespace

TEST_CASE("scalar golden-ratio DARE") {
  const Mat one = Mat::Identity(1, 1);
  const auto sol = solve_dare(one, one, one, one);
  REQUIRE(sol);
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  CHECK(std::abs(sol->p(0, 0) - phi) <= 1e-10);
  CHECK(std::abs(sol->k(0, 0) + phi / (1.0 + phi)) <= 1e-10);
  CHECK(std::abs(sol->k(0, 0) + 0.6180339887) <= 1e-10);
}

TEST_CASE("degenerate DARE with A = 0, B = 0") {
  const Mat z = Mat::Zero(2, 2);
  const auto sol = solve_dare(z, z, Mat::Identity(2, 2), Mat::Identity(2, 2));
  REQUIRE(sol);
  CHECK(sol->p == Mat::Identity(2, 2));
  CHECK(sol->k.isZero(0.0));
}

TEST_CASE("weights are validated") {
  const Mat one = Mat::Identity(1, 1);
  CHECK_THROWS_AS(solve_dare(one, one, -one, one), InputError);
  CHECK_THROWS_AS(solve_dare(one, one, one, Mat::Zero(1, 1)), InputError);
  Mat ns(2, 2);
  ns << 1, 0.5, 0, 1;
  CHECK_THROWS_AS(solve_dare(Mat::Identity(2, 2), Mat::Identity(2, 2), ns, Mat::Identity(2, 2)), InputError);
}

TEST_CASE("unstabilizable systems return none") {
  // Uncontrollable unstable mode.
  Mat a(2, 2);
  a << 1.1, 0, 0, 0.5;
  Mat b(2, 1);
  b << 0, 1;
  CHECK_FALSE(solve_dare(a, b, Mat::Identity(2, 2), Mat::Identity(1, 1), {1e-12, 2000, 3}));
}

TEST_CASE("linearize a linear system") {
  Mat a(2, 2);
  a << 1, 0.1, -0.2, 0.9;
  Mat b(2, 1);
  b << 0, 0.5;
  LinearEnv env(a, b);
  const Linearization lin = linearize(env, {Vec::Zero(2), Vec::Zero(1)});
  CHECK(lin.a == a);
  CHECK(lin.b == b);
  CHECK(lin.residual == 0.0);
  const auto ctrl = lqr_control(env, {Vec::Zero(2), Vec::Zero(1)});
  REQUIRE(ctrl);
  // Non-equilibrium target.
  CHECK_FALSE(lqr_control(env, {Vec::Ones(2), Vec::Zero(1)}));
}

TEST_CASE("cart-pole linearization") {
  dyn::CartPole env(kCfg.cartpole, dyn::Variant::kOriginal);
  const Linearization lin = linearize(env, cartpole_target(0.0));
  CHECK(lin.residual <= 1e-12);
  const Eigen::MatrixXd fd = poly::finite_difference_jacobian(
      [&](const Eigen::VectorXd& w) { return env.surrogate_step(w.head(4), w.tail(1)); },
      Vec::Zero(5), 1e-6);
  CHECK((lin.a - fd.leftCols(4)).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((lin.b - fd.rightCols(1)).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("cart-pole controller matches the value-iteration oracle") {
  dyn::CartPole env(kCfg.cartpole, dyn::Variant::kOriginal);
  const auto ctrl = lqr_control(env, cartpole_target(0.0));
  REQUIRE(ctrl);
  const Linearization lin = linearize(env, cartpole_target(0.0));
  const auto [p, k] = value_iteration(lin.a, lin.b, Mat::Identity(4, 4), Mat::Identity(1, 1), 10000);
  CHECK((ctrl->p - p).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((ctrl->k - k).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(dare_residual(lin.a, lin.b, ctrl->q, ctrl->r, ctrl->p) <= 1e-9);
  CHECK(ctrl->spectral_radius < 1.0);
  Eigen::SelfAdjointEigenSolver<Mat> es(ctrl->p);
  CHECK(es.eigenvalues().minCoeff() >= 0.0);
}

TEST_CASE("closed-loop decrease under the linear model") {
  dyn::CartPole env(kCfg.cartpole, dyn::Variant::kOriginal);
  const auto ctrl = lqr_control(env, cartpole_target(0.0));
  REQUIRE(ctrl);
  const Linearization lin = linearize(env, cartpole_target(0.0));
  const Mat cl = lin.a + lin.b * ctrl->k;
  const Mat stage = ctrl->q + ctrl->k.transpose() * ctrl->r * ctrl->k;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  for (int s = 0; s < 1000; ++s) {
    Vec x(4);
    for (int i = 0; i < 4; ++i) x(i) = n(rng);
    const double drop = x.dot(ctrl->p * x) - (cl * x).dot(ctrl->p * (cl * x));
    const double expect = x.dot(stage * x);
    CHECK(drop >= -1e-9);
    CHECK(std::abs(drop - expect) <= 1e-9 * std::max(1.0, x.dot(ctrl->p * x)));
  }
}

TEST_CASE("recentering consistency for translated cart-pole targets") {
  dyn::CartPole env(kCfg.cartpole, dyn::Variant::kOriginal);
  const auto origin = lqr_control(env, cartpole_target(0.0));
  REQUIRE(origin);
  for (double z : {1.2, -7.5, 1e3}) {
    const auto moved = lqr_control(env, cartpole_target(z));
    REQUIRE(moved);
    CHECK(moved->k == origin->k);
    CHECK(moved->p == origin->p);
    const auto viaMap = origin->recentred(env.canonicalize(cartpole_target(z)).map);
    CHECK(viaMap.k == origin->k);
    CHECK(viaMap.p == origin->p);
    CHECK(viaMap.target.x == cartpole_target(z).x);
  }
}

TEST_CASE("bicycle controller uses the reduced straight-line model") {
  dyn::Bicycle env(kCfg.bicycle, dyn::Variant::kOriginal, 3);
  Vec x(5);
  x << 0.3, 0.1, 0.2 + 0.1 * std::cos(0.9), 0.1 - 0.1 * std::sin(0.9), 0.05;
  x(2) = x(0) - 0.1 * std::cos(0.4);
  x(3) = x(1) - 0.1 * std::sin(0.4);
  const dyn::Target t = env.lqr_target(x);
  const auto ctrl = lqr_control(env, t);
  REQUIRE(ctrl);
  REQUIRE(ctrl->reduced);
  CHECK(ctrl->spectral_radius < 1.0);
  // Along the line the closed loop under the true step follows the reduced model.
  Vec state = x;
  Vec r(2);
  const dyn::CanonicalTarget c = env.canonicalize(t);
  const auto reduced = [&](const Vec& s) {
    return Vec(ctrl->reduced->project * (c.map.to_canonical(s) - c.target.x));
  };
  r = reduced(state);
  for (int i = 0; i < 50; ++i) {
    const Vec u = ctrl->action(state);
    CHECK(u(1) == 0.0);
    state = env.step(state, u, false);
    const Vec w = (ctrl->reduced->k * r).cwiseMax(-0.25).cwiseMin(0.25);
    r = ctrl->reduced->a * r + ctrl->reduced->b * w;
    CHECK((reduced(state) - r).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(env.manifold_residual(state, t) <= 1e-12);
  }
  // Value agrees with the reduced quadratic form.
  const Vec d = reduced(x);
  CHECK(std::abs(ctrl->value(x) - d.dot(ctrl->reduced->p * d)) <= 1e-12);
}
