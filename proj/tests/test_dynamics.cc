#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oshield/dynamics/bicycle.h"
#include "oshield/dynamics/cartpole.h"
#include "oshield/dynamics/config.h"
#include "oshield/errors.h"
#include "oshield/poly/jet.h"
#include "oshield/poly/taylor.h"

using namespace oshield;
using namespace oshield::dyn;

namespace {

const EnvConfig kCfg{};

Vec v4(double a, double b, double c, double d) { return Eigen::Vector4d(a, b, c, d); }

}  // namespace

TEST_CASE("cart-pole safety membership") {
  CartPole env(kCfg.cartpole, Variant::kOriginal);
  CHECK(env.is_safe(v4(0, 0, 0.10, 0)));
  CHECK_FALSE(env.is_safe(v4(0, 0, 0.16, 0)));
  CHECK(env.is_safe(v4(0, 0, 0.15, 0)));
  CHECK(env.is_safe(v4(0, 0, -0.15, 0)));
  CHECK_FALSE(env.is_safe(v4(0, 0, -0.1500001, 0)));
}

TEST_CASE("cart-pole target map and canonicalization") {
  CartPole env(kCfg.cartpole, Variant::kOriginal);
  const Target t = env.lqr_target(v4(1.2, 0.3, 0.1, -0.2));
  CHECK(t.x == v4(1.2, 0, 0, 0));
  CHECK(t.u.size() == 1);
  CHECK(t.u(0) == 0.0);
  const CanonicalTarget c = env.canonicalize(t);
  CHECK(c.target.x == v4(0, 0, 0, 0));
  CHECK(c.map.offset == v4(1.2, 0, 0, 0));
  CHECK(c.map.to_world(c.target.x) == t.x);
}

TEST_CASE("cart-pole equilibrium is a fixed point of both models") {
  CartPole env(kCfg.cartpole, Variant::kOriginal);
  for (double z : {0.0, -3.0, 1.2}) {
    const Vec x = v4(z, 0, 0, 0);
    CHECK(env.step(x, Vec::Zero(1), false) == x);
    CHECK((env.step(x, Vec::Zero(1), true) - x).cwiseAbs().maxCoeff() <= 1e-12);
    const Target t = env.lqr_target(x);
    CHECK((env.true_step(t.x, t.u) - t.x).norm() <= 1e-9);
  }
}

TEST_CASE("cart-pole surrogate accuracy on a small ball") {
  CartPole env(kCfg.cartpole, Variant::kOriginal);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u01(0, 1);
  for (int s = 0; s < 2000; ++s) {
    Eigen::VectorXd w(5);
    for (int i = 0; i < 5; ++i) w(i) = n(rng);
    w *= 0.05 * std::pow(u01(rng), 0.2) / w.norm();
    const Vec x = w.head(4);
    const Vec u = w.tail(1);
    CHECK((env.step(x, u, true) - env.step(x, u, false)).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("cart-pole angular acceleration Taylor series matches direct evaluation") {
  const CartPoleParams p = kCfg.cartpole;
  auto thacc = [p](const auto& th, const auto& om, const auto& u) {
    using std::cos;
    using std::sin;
    const double total = p.cart_mass + p.pole_mass;
    const double pml = p.pole_mass * p.half_length;
    const auto temp = u + pml * om * om * sin(th) / total;
    return (p.gravity * sin(th) - cos(th) * temp) /
           (p.half_length * (4.0 / 3.0 - p.pole_mass * cos(th) * cos(th) / total));
  };
  poly::SmoothMap f;
  f.input_dim = 3;
  f.output_dim = 1;
  f.jet = [&](const std::vector<poly::Jet>& w) {
    return std::vector<poly::Jet>{thacc(w[0], w[1], w[2])};
  };
  const poly::PolynomialMap t = poly::taylor_expand(f, Vec::Zero(3), 5);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  for (int s = 0; s < 500; ++s) {
    Eigen::Vector3d d(n(rng), n(rng), n(rng));
    d *= 0.01 / d.norm();
    CHECK(std::abs(t[0](Vec(d)) - thacc(d(0), d(1), d(2))) <= 1e-8);
  }
}

TEST_CASE("cart-pole surrogate Jacobian at the origin matches finite differences") {
  CartPole env(kCfg.cartpole, Variant::kOriginal);
  const poly::PolynomialMap& f = *env.surrogate();
  const Eigen::MatrixXd j = f.jacobian(Vec::Zero(5));
  const Eigen::MatrixXd fd = poly::finite_difference_jacobian(
      [&](const Eigen::VectorXd& w) { return f(w); }, Vec::Zero(5), 1e-5);
  CHECK((j - fd).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, j.cwiseAbs().maxCoeff()));

  Mat dx, du;
  env.step_jacobian(v4(0.1, -0.2, 0.05, 0.1), Vec::Constant(1, 0.3), true, dx, du);
  Mat tx, tu;
  env.step_jacobian(v4(0.1, -0.2, 0.05, 0.1), Vec::Constant(1, 0.3), false, tx, tu);
  CHECK((dx - tx).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((du - tu).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("cart-pole translation equivariance and determinism") {
  CartPole env(kCfg.cartpole, Variant::kOriginal);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> d(-1, 1);
  for (int s = 0; s < 1000; ++s) {
    const Vec x = v4(d(rng), d(rng), d(rng) * 0.3, d(rng));
    const Vec u = Vec::Constant(1, 5 * d(rng));
    const double c = 10 * d(rng);
    Vec shifted = x;
    shifted(0) += c;
    Vec expect = env.true_step(x, u);
    expect(0) += c;
    CHECK((env.true_step(shifted, u) - expect).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(env.step(x, u, true) == env.step(x, u, true));
  }
}

TEST_CASE("bicycle target map") {
  Bicycle env(kCfg.bicycle, Variant::kOriginal, 1);
  Vec x(5);
  x << 0.3, 0.02, 0.2, 0.02, 0.0;
  Target t = env.lqr_target(x);
  CHECK(t.x == x);
  CHECK(t.u == Eigen::Vector2d::Zero());

  x(4) = 0.1;
  t = env.lqr_target(x);
  CHECK(t.x(0) == doctest::Approx(0.4));
  CHECK(t.x(2) == doctest::Approx(0.3));
  CHECK(t.x(1) == 0.02);
  CHECK(t.x(3) == 0.02);
  CHECK(t.x(4) == 0.0);
  CHECK((env.true_step(t.x, t.u) - t.x).norm() <= 1e-9);

  const CanonicalTarget c = env.canonicalize(t);
  CHECK((c.map.to_world(c.target.x) - t.x).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(std::abs(c.target.x(2) + 0.1) < 1e-15);
  CHECK(env.manifold_residual(x, t) < 1e-15);
}

TEST_CASE("bicycle straight-line kinematics") {
  Bicycle env(kCfg.bicycle, Variant::kOriginal, 1);
  Vec x(5);
  x << 0.0, 0.0, -0.1, 0.0, 0.1;
  const Vec next = env.step(x, Eigen::Vector2d::Zero(), false);
  CHECK(next(0) == doctest::Approx(0.1));
  CHECK(next(2) == doctest::Approx(0.0));
  CHECK(next(1) == 0.0);
  CHECK(next(4) == 0.1);

  // Turning keeps the wheelbase.
  const Vec turned = env.step(x, Eigen::Vector2d(0.1, 0.3), false);
  CHECK(std::hypot(turned(0) - turned(2), turned(1) - turned(3)) == doctest::Approx(0.1));
  CHECK(turned(1) > 0.0);
}

TEST_CASE("bicycle obstacles and clamping") {
  Bicycle a(kCfg.bicycle, Variant::kOriginal, 1);
  Bicycle b(kCfg.bicycle, Variant::kOriginal, 2);
  CHECK(a.obstacle_y() != b.obstacle_y());
  for (const auto* env : {&a, &b}) {
    for (double y : env->obstacle_y()) CHECK(std::abs(y) <= 0.05);
  }
  CHECK(a.radius() == 0.05);
  CHECK(Bicycle(kCfg.bicycle, Variant::kModified, 1).radius() == 0.2);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-5, 5);
  for (int s = 0; s < 200; ++s) {
    const Vec u = a.clamp_action(Eigen::Vector2d(d(rng), d(rng)));
    CHECK(std::abs(u(0)) <= 0.25);
  }
  CHECK(a.clamp_action(Eigen::Vector2d(0.9, 0))(0) == 0.25);

  // A point on an obstacle center is unsafe, the start is safe.
  Vec x(5);
  x << 0.4, a.obstacle_y()[0], 0.3, a.obstacle_y()[0], 0.0;
  CHECK_FALSE(a.is_safe(x));
  CHECK(a.is_safe(a.sample_initial(rng)));
}

TEST_CASE("bicycle Jacobian matches finite differences") {
  Bicycle env(kCfg.bicycle, Variant::kOriginal, 1);
  Vec x(5);
  x << 0.3, 0.05, 0.21, 0.01, 0.04;
  const Eigen::Vector2d u(0.1, 0.2);
  Mat dx, du;
  env.step_jacobian(x, u, false, dx, du);
  Eigen::VectorXd w(7);
  w << x, u;
  const Eigen::MatrixXd fd = poly::finite_difference_jacobian(
      [&](const Eigen::VectorXd& z) { return env.true_step(z.head(5), z.tail(2)); }, w, 1e-6);
  CHECK((dx - fd.leftCols(5)).cwiseAbs().maxCoeff() < 1e-7);
  CHECK((du - fd.rightCols(2)).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("reward gradients match finite differences") {
  CartPole cp(kCfg.cartpole, Variant::kOriginal);
  Bicycle bi(kCfg.bicycle, Variant::kOriginal, 5);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  for (const Environment* env : {static_cast<const Environment*>(&cp), static_cast<const Environment*>(&bi)}) {
    for (int s = 0; s < 50; ++s) {
      Vec x(env->state_dim());
      for (int i = 0; i < x.size(); ++i) x(i) = d(rng);
      if (env == &bi) x.head(4) = Eigen::Vector4d(0.38 + 0.1 * d(rng), 0.1 * d(rng), 0.3, 0.0);
      Vec g;
      env->training_reward(x, &g);
      for (int i = 0; i < x.size(); ++i) {
        Vec p = x, m = x;
        p(i) += 1e-6;
        m(i) -= 1e-6;
        const double fd = (env->training_reward(p, nullptr) - env->training_reward(m, nullptr)) / 2e-6;
        CHECK(std::abs(fd - g(i)) < 1e-5 * std::max(1.0, std::abs(g(i))));
      }
    }
  }
}

TEST_CASE("environment config round trip and validation") {
  EnvConfig c;
  c.cartpole.theta_max = 0.075;
  c.bicycle.radius_modified = 0.3;
  const EnvConfig back = env_config_from_json(to_json(c));
  CHECK(back.cartpole.theta_max == 0.075);
  CHECK(back.bicycle.radius_modified == 0.3);
  CHECK_THROWS_AS(env_config_from_json(nlohmann::json{{"cartpole", {{"mass", 1}}}}), ConfigError);
  CHECK_THROWS_AS(env_config_from_json(nlohmann::json{{"cartpole", {{"dt", "x"}}}}), ConfigError);
  CHECK_THROWS_AS(make_environment("pendulum", Variant::kOriginal, c), ConfigError);
  CHECK(make_environment("cartpole", Variant::kModified, c)->default_horizon() == 1000);
  CHECK(make_environment("cartpole", Variant::kOriginal, c)->default_horizon() == 200);
}

TEST_CASE("non-finite steps are rejected") {
  CartPole env(kCfg.cartpole, Variant::kOriginal);
  const Vec bad = v4(0, std::nan(""), 0, 0);
  CHECK_THROWS_AS(env.step(bad, Vec::Zero(1), false), NumericError);
  CHECK_THROWS_AS(env.step(Vec::Zero(3), Vec::Zero(1), false), InputError);
}
