#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <thread>

#include "oshield/certify/cache.h"
#include "oshield/dynamics/cartpole.h"
#include "oshield/errors.h"
#include "oshield/lqr/lqr.h"
#include "oshield/policy/bptt.h"
#include "oshield/policy/recovery.h"
#include "oshield/shield/shield.h"

using namespace oshield;
using namespace oshield::shield;
using policy::MlpPolicy;

namespace {

const dyn::EnvConfig kCfg{};

std::shared_ptr<const dyn::Environment> env(const char* name, dyn::Variant v = dyn::Variant::kOriginal,
                                            std::uint64_t layout = 3) {
  return dyn::make_environment(name, v, kCfg, layout);
}

MlpPolicy constant_policy(const dyn::Environment& e, const Vec& u) {
  MlpPolicy p(e.policy_input_dim(), 4, e.action_low(), e.action_high());
  for (int i = 0; i < u.size(); ++i) p.params()[p.b2_offset() + i] = u(i);
  return p;
}

// u = K x on the listed coordinates, written exactly with relu(s) - relu(-s).
MlpPolicy linear_policy(const dyn::Environment& e, const Eigen::RowVectorXd& k) {
  const int n = e.policy_input_dim();
  MlpPolicy p(n, 2 * n, e.action_low(), e.action_high());
  auto w = p.params();
  for (int i = 0; i < n; ++i) {
    w[p.w1_offset() + (2 * i) * n + i] = 1.0;
    w[p.w1_offset() + (2 * i + 1) * n + i] = -1.0;
    w[p.w2_offset() + 2 * i] = k(i);
    w[p.w2_offset() + 2 * i + 1] = -k(i);
  }
  return p;
}

certify::InvariantSet canonical_set(const dyn::Environment& e, certify::CertificateCache& cache) {
  const auto c = e.canonicalize(e.lqr_target(Vec::Zero(e.state_dim())));
  const auto entry = cache.canonical(e, c);
  REQUIRE(entry->ok);
  return entry->set;
}

}  // namespace

TEST_CASE("is_recoverable: stable states succeed at index 0") {
  const auto e = env("cartpole");
  certify::CertificateCache cache;
  const MlpPolicy zero = constant_policy(*e, Vec::Zero(1));
  ShieldConfig cfg;
  const Recoverability r = is_recoverable(*e, zero, Eigen::Vector4d(0.3, 0, 0.01, 0), cfg, cache);
  CHECK(r.recoverable);
  REQUIRE(r.first_stable_index);
  CHECK(*r.first_stable_index == 0);
  CHECK(r.outcome == Outcome::kStable);
}

TEST_CASE("is_recoverable: unsafe unstable states fail immediately") {
  const auto e = env("cartpole");
  certify::CertificateCache cache;
  const MlpPolicy zero = constant_policy(*e, Vec::Zero(1));
  const Recoverability r = is_recoverable(*e, zero, Eigen::Vector4d(0, 0, 0.4, 0), {}, cache);
  CHECK_FALSE(r.recoverable);
  CHECK_FALSE(r.first_stable_index);
  CHECK(r.outcome == Outcome::kUnsafe);
}

TEST_CASE("is_recoverable: T = 0 rejects every state") {
  const auto e = env("cartpole");
  certify::CertificateCache cache;
  const MlpPolicy zero = constant_policy(*e, Vec::Zero(1));
  ShieldConfig cfg;
  cfg.horizon = 0;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Vec x = e->sample_initial(rng) * 0.1;
    CHECK_FALSE(is_recoverable(*e, zero, x, cfg, cache).recoverable);
  }
}

TEST_CASE("is_recoverable: an expired budget is a defined false") {
  const auto e = env("cartpole");
  certify::CertificateCache cache;
  const MlpPolicy zero = constant_policy(*e, Vec::Zero(1));
  ShieldConfig cfg;
  cfg.timeout = std::chrono::nanoseconds(0);
  // Coasting at high speed: safe but never stable, so only the clock stops it.
  const Vec coast = Eigen::Vector4d(0, 5.0, 0, 0);
  cfg.timeout.reset();
  CHECK(is_recoverable(*e, zero, coast, cfg, cache).outcome == Outcome::kHorizon);
  cfg.timeout = std::chrono::nanoseconds(0);
  std::this_thread::sleep_for(std::chrono::microseconds(1));
  const Recoverability r = is_recoverable(*e, zero, coast, cfg, cache);
  CHECK_FALSE(r.recoverable);
  CHECK(r.outcome == Outcome::kTimeout);
}

TEST_CASE("is_recoverable: the recoverable set grows with T") {
  const auto e = env("cartpole");
  certify::CertificateCache cache;
  std::mt19937_64 rng(12);
  const MlpPolicy pi_rec = MlpPolicy::for_env(*e, 32, rng, 3.0);
  std::uniform_real_distribution<double> d(-0.3, 0.3);
  int grew = 0;
  for (int i = 0; i < 1000; ++i) {
    Vec x(4);
    for (int k = 0; k < 4; ++k) x(k) = d(rng);
    x(2) *= 0.5;
    ShieldConfig small, large;
    small.horizon = 5;
    large.horizon = 5 + 20;
    const bool a = is_recoverable(*e, pi_rec, x, small, cache).recoverable;
    const bool b = is_recoverable(*e, pi_rec, x, large, cache).recoverable;
    if (a) CHECK(b);
    grew += (!a && b) ? 1 : 0;
  }
  MESSAGE(grew << " states became recoverable with the longer horizon");
}

TEST_CASE("shield_step: branch order") {
  const auto e = env("cartpole");
  certify::CertificateCache cache;
  const certify::InvariantSet g = canonical_set(*e, cache);
  const MlpPolicy zero = constant_policy(*e, Vec::Zero(1));
  const MlpPolicy push = constant_policy(*e, Vec::Constant(1, 10.0));
  ShieldConfig cfg;

  SUBCASE("learned when the learned successor is recoverable") {
    const Vec x = Vec::Zero(4);
    ShieldState st = initial_state(*e, x);
    const Vec u = shield_step(*e, zero, push, x, st, cfg, cache);
    CHECK(st.last_branch == Branch::kLearned);
    CHECK(u(0) == 0.0);
    CHECK(st.target.x == e->lqr_target(e->step(x, u, true)).x);
  }

  SUBCASE("lqr inside the current set, target unchanged") {
    // Points near the boundary of G where one full push leaves G and the
    // pushing recovery policy cannot come back.
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    int found = 0;
    for (int trial = 0; trial < 2000 && found < 5; ++trial) {
      Vec d(4);
      d << 0.0, n(rng), n(rng), n(rng);
      const double scale = std::sqrt(0.995 * g.epsilon / d.dot(g.controller.p * d));
      const Vec x = Vec(Eigen::Vector4d(0.2, 0, 0, 0)) + scale * d;
      const Vec next = e->step(x, push.act(*e, x), true);
      if (is_recoverable(*e, push, next, cfg, cache).recoverable) continue;
      ++found;
      ShieldState st = initial_state(*e, x);
      const dyn::Target before = st.target;
      const Vec u = shield_step(*e, push, push, x, st, cfg, cache);
      CHECK(st.last_branch == Branch::kLqr);
      CHECK(st.target.x == before.x);
      CHECK(u(0) == doctest::Approx(e->clamp_action(st.set->controller.action(x))(0)));
    }
    CHECK(found == 5);
  }

  SUBCASE("recovery otherwise, re-aimed at the recovery successor") {
    const Vec x = Eigen::Vector4d(0.0, 0.5, 0.1, 0.5);
    ShieldState st = initial_state(*e, x);
    st.retarget(e->lqr_target(Eigen::Vector4d(50.0, 0, 0, 0)));
    const MlpPolicy back = constant_policy(*e, Vec::Constant(1, 3.0));
    REQUIRE_FALSE(is_recoverable(*e, back, e->step(x, push.act(*e, x), true), cfg, cache).recoverable);
    const Vec u = shield_step(*e, push, back, x, st, cfg, cache);
    CHECK(st.last_branch == Branch::kRecovery);
    CHECK(u(0) == 3.0);
    CHECK(st.target.x == e->lqr_target(e->step(x, u, true)).x);
  }
}

TEST_CASE("run_with_shield: T = 0 from a stable start uses only the LQR branch") {
  for (const char* name : {"cartpole", "bicycle"}) {
    const auto e = env(name);
    certify::CertificateCache cache;
    std::mt19937_64 rng(8);
    const MlpPolicy pi_hat = MlpPolicy::for_env(*e, 32, rng, 5.0);
    const MlpPolicy pi_rec = MlpPolicy::for_env(*e, 32, rng, 5.0);
    ShieldConfig cfg;
    cfg.horizon = 0;
    const Vec x0 = name[0] == 'c' ? Vec(Eigen::Vector4d(0.1, 0.05, 0.02, -0.05)) : e->sample_initial(rng);
    REQUIRE(certify::is_stable(x0, *e, cache).stable);
    const Trajectory tr = run_with_shield(*e, pi_hat, pi_rec, x0, 200, cfg, cache);
    for (const StepLog& s : tr.steps) CHECK(s.branch == Branch::kLqr);
    CHECK(tr.unsafe_states() == 0);
  }
}

TEST_CASE("run_with_shield: an exact LQR policy stays on the learned branch") {
  const auto e = env("cartpole");
  certify::CertificateCache cache;
  const certify::InvariantSet g = canonical_set(*e, cache);
  // The canonical controller ignores z (its target moves with the cart).
  Eigen::RowVectorXd k = g.controller.k.row(0);
  k(0) = 0.0;
  const MlpPolicy lqr = linear_policy(*e, k);
  const Vec x0 = Eigen::Vector4d(0.0, 0.05, 0.02, -0.05);
  REQUIRE(certify::is_stable(x0, *e, cache).stable);
  ShieldConfig cfg;
  const Trajectory tr = run_with_shield(*e, lqr, lqr, x0, 200, cfg, cache);
  int learned = 0;
  for (const StepLog& s : tr.steps) learned += s.branch == Branch::kLearned;
  CHECK(learned == 200);
}

TEST_CASE("run_with_shield: adversarial policies stay safe and keep the step invariants") {
  for (const char* name : {"cartpole", "bicycle"}) {
    for (dyn::Variant v : {dyn::Variant::kOriginal, dyn::Variant::kModified}) {
      certify::CertificateCache cache;
      std::mt19937_64 rng(99);
      for (int run = 0; run < 4; ++run) {
        const auto e = env(name, v, 100 + run);
        const MlpPolicy pi_hat = MlpPolicy::for_env(*e, 32, rng, 20.0);
        const MlpPolicy pi_rec = MlpPolicy::for_env(*e, 32, rng, 1.0);
        ShieldConfig cfg;
        cfg.horizon = 50;
        Vec x0;
        for (int tries = 0;; ++tries) {
          REQUIRE(tries < 1000);
          x0 = e->sample_initial(rng);
          if (certify::is_stable(x0, *e, cache).stable || is_recoverable(*e, pi_rec, x0, cfg, cache).recoverable)
            break;
        }
        const Trajectory tr = run_with_shield(*e, pi_hat, pi_rec, x0, 150, cfg, cache);
        INFO(name << " " << dyn::variant_name(v) << " run " << run);
        CHECK(tr.unsafe_states() == 0);
        for (std::size_t t = 0; t < tr.steps.size(); ++t) {
          const StepLog& s = tr.steps[t];
          if (s.branch == Branch::kRecovery) {
            CHECK(s.audit_recoverable);
            CHECK(s.audit_first_stable.value_or(0) > 0);
          }
          if (s.branch == Branch::kLqr && t > 0) CHECK(s.target.x == tr.steps[t - 1].target.x);
          // After each step the state is recoverable or in the current target's set.
          if (t % 10 == 0 && t + 1 < tr.steps.size()) {
            const Vec& next = tr.steps[t + 1].x;
            const auto set = cache.set_for(*e, s.target);
            const bool in_set = set && set->contains(next);
            CHECK((in_set || is_recoverable(*e, pi_rec, next, cfg, cache).recoverable));
          }
        }
      }
    }
  }
}

TEST_CASE("train_recovery: training raises the recoverable fraction of d_rec") {
  const auto e = env("cartpole");
  certify::CertificateCache cache;
  std::mt19937_64 rng(5);
  const MlpPolicy pi_hat = MlpPolicy::for_env(*e, 64, rng, 2.0);
  const policy::RecoveryStates d = policy::sample_recovery_states(e, pi_hat, 400, 7);
  policy::TrainConfig cfg;
  cfg.iterations = 200;
  cfg.hidden = 64;
  cfg.horizon = 100;
  cfg.seed = 13;
  std::mt19937_64 init_rng(cfg.seed);
  const MlpPolicy untrained = MlpPolicy::for_env(*e, cfg.hidden, init_rng, cfg.init_output_scale);
  const auto trained = policy::train_recovery(*e, d, cfg, policy::RecoveryReward::kShaped);
  ShieldConfig sc;
  auto count = [&](const MlpPolicy& p) {
    int n = 0;
    for (const auto& s : d.starts) n += is_recoverable(*e, p, s.x, sc, cache).recoverable;
    return n;
  };
  const int before = count(untrained), after = count(trained.train.policy);
  MESSAGE("recoverable d_rec states: " << before << " -> " << after << " of " << d.size());
  CHECK(after > before);
}
