#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oshield/errors.h"
#include "oshield/harness/config.h"
#include "oshield/harness/emit.h"
#include "oshield/harness/experiment.h"
#include "oshield/harness/pipeline.h"

using namespace oshield;
using namespace oshield::harness;
using policy::MlpPolicy;

namespace {

MlpPolicy zero_policy(const dyn::Environment& e) {
  return MlpPolicy(e.policy_input_dim(), 4, e.action_low(), e.action_high());
}

// Pushes the cart with constant force, which drives cart-pole out of G.
MlpPolicy push_policy(const dyn::Environment& e, double u) {
  MlpPolicy p = zero_policy(e);
  p.params()[p.b2_offset()] = u;
  return p;
}

ExperimentSpec small_spec(const std::string& env, dyn::Variant v, Mode mode, int T) {
  ExperimentSpec s;
  s.env = env;
  s.variant = v;
  s.mode = mode;
  s.T = T;
  s.rollouts = 6;
  s.horizon = 40;
  s.seed = 11;
  s.timing = false;
  return s;
}

struct Csvs {
  std::string rollouts, summary, usage;
};

Csvs csvs(const ExperimentSpec& spec, const MlpPolicy& pi_hat, const MlpPolicy& pi_rec) {
  certify::CertificateCache cache;
  const auto e = dyn::make_environment(spec.env, spec.variant, spec.env_config);
  const ExperimentResult r = run_experiment(spec, pi_hat, pi_rec, cache);
  std::ostringstream a, b, c;
  write_rollouts_csv(a, *e, r.rollouts);
  write_summary_csv(b, {r.metrics});
  write_usage_csv(c, r.metrics.usage);
  return {a.str(), b.str(), c.str()};
}

}  // namespace

TEST_CASE("emit: empty inputs give header-only files") {
  const auto cp = dyn::make_environment("cartpole", dyn::Variant::kOriginal, {});
  const auto bi = dyn::make_environment("bicycle", dyn::Variant::kOriginal, {});
  std::ostringstream a, b, c, d;
  write_rollouts_csv(a, *cp, {});
  write_rollouts_csv(b, *bi, {});
  write_summary_csv(c, {});
  write_usage_csv(d, {});
  CHECK(a.str() == "run_id,t,z,v,theta,omega,u,branch,safe,wall_ns\n");
  CHECK(b.str() == "run_id,t,xf,yf,xb,yb,v,a,steer,branch,safe,wall_ns\n");
  CHECK(c.str() == "env,variant,mode,T,reward_mean,reward_se,p_safe_state,p_safe_traj,reject_rate\n");
  CHECK(d.str() == "t,frac_learned,frac_recovery,frac_lqr\n");
}

TEST_CASE("emit: summary and usage round-trip exactly") {
  Metrics m;
  m.env = "cartpole";
  m.variant = "modified";
  m.mode = "shield";
  m.T = 75;
  m.reward_mean = 1.0 / 3.0;
  m.reward_se = 0.1234567890123456789;
  m.p_safe_state = 0.987654321;
  m.p_safe_traj = 0.97;
  m.reject_rate = 2.0 / 7.0;
  Metrics n = m;
  n.env = "bicycle";
  n.mode = "none";
  n.T = 0;
  n.reward_mean = -1e-300;
  std::stringstream ss;
  write_summary_csv(ss, {m, n});
  const auto back = read_summary_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == m);
  CHECK(back[1] == n);

  const std::vector<std::array<double, 3>> usage = {{1.0, 0.0, 0.0}, {0.1, 0.2, 0.7}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
  std::stringstream us;
  write_usage_csv(us, usage);
  CHECK(read_usage_csv(us) == usage);
}

TEST_CASE("emit: malformed summary is rejected") {
  std::istringstream bad("env,variant\ncartpole,original\n");
  CHECK_THROWS_AS(read_summary_csv(bad), ConfigError);
}

TEST_CASE("fit_line") {
  const std::vector<double> x = {0, 25, 50, 75, 100};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * v + 2.0);
  LineFit f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(f.intercept == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-12));
  y[2] += 40.0;
  f = fit_line(x, y);
  CHECK(f.r2 < 0.99);
  CHECK(f.r2 > 0.5);
}

TEST_CASE("run_experiment: usage fractions sum to one") {
  const auto e = dyn::make_environment("cartpole", dyn::Variant::kModified, {});
  certify::CertificateCache cache;
  const ExperimentResult r = run_experiment(small_spec("cartpole", dyn::Variant::kModified, Mode::kShield, 25),
                                            push_policy(*e, 1.0), zero_policy(*e), cache);
  REQUIRE(r.metrics.usage.size() == 40);
  for (const auto& row : r.metrics.usage) {
    CHECK(std::abs(row[0] + row[1] + row[2] - 1.0) <= 1e-12);
    for (double f : row) CHECK((f >= 0.0 && f <= 1.0));
  }
  CHECK(r.metrics.unsafe_states == 0);
  CHECK(r.metrics.p_safe_state == 1.0);
  CHECK(r.metrics.p_safe_traj == 1.0);
  CHECK(r.metrics.states == 6 * 41);
}

TEST_CASE("run_experiment: mode none uses only the learned branch") {
  const auto e = dyn::make_environment("cartpole", dyn::Variant::kModified, {});
  certify::CertificateCache cache;
  const ExperimentResult r = run_experiment(small_spec("cartpole", dyn::Variant::kModified, Mode::kNone, 100),
                                            push_policy(*e, 1.0), zero_policy(*e), cache);
  for (const auto& row : r.metrics.usage) {
    CHECK(row[0] == 1.0);
    CHECK(row[1] == 0.0);
    CHECK(row[2] == 0.0);
  }
  // A constant push topples the pole, so unshielded safety must drop.
  CHECK(r.metrics.p_safe_state < 1.0);
  CHECK(r.metrics.mode == "none");
}

TEST_CASE("run_experiment: T = 0 uses only the LQR branch") {
  for (const char* name : {"cartpole", "bicycle"}) {
    CAPTURE(std::string(name));
    const auto e = dyn::make_environment(name, dyn::Variant::kOriginal, {});
    certify::CertificateCache cache;
    const ExperimentResult r = run_experiment(small_spec(name, dyn::Variant::kOriginal, Mode::kShield, 0),
                                              zero_policy(*e), zero_policy(*e), cache);
    for (const auto& row : r.metrics.usage) CHECK(row[2] == 1.0);
    CHECK(r.metrics.unsafe_states == 0);
    CHECK(r.metrics.freeze_violations == 0);
  }
}

TEST_CASE("run_experiment: output is identical across thread counts with timing off") {
  const auto e = dyn::make_environment("bicycle", dyn::Variant::kModified, {});
  ExperimentSpec s = small_spec("bicycle", dyn::Variant::kModified, Mode::kShield, 25);
  MlpPolicy pi = zero_policy(*e);
  pi.params()[pi.b2_offset()] = 0.5;
  const Csvs one = csvs(s, pi, zero_policy(*e));
  s.threads = 3;
  const Csvs three = csvs(s, pi, zero_policy(*e));
  CHECK(one.rollouts == three.rollouts);
  CHECK(one.summary == three.summary);
  CHECK(one.usage == three.usage);
  CHECK(one.rollouts.find(",0\n") != std::string::npos);
}

TEST_CASE("run_experiment: seeds change the draws") {
  const auto e = dyn::make_environment("cartpole", dyn::Variant::kOriginal, {});
  ExperimentSpec s = small_spec("cartpole", dyn::Variant::kOriginal, Mode::kNone, 100);
  const Csvs a = csvs(s, zero_policy(*e), zero_policy(*e));
  s.seed = 12;
  const Csvs b = csvs(s, zero_policy(*e), zero_policy(*e));
  CHECK(a.rollouts != b.rollouts);
}

TEST_CASE("latency probes") {
  for (const char* name : {"cartpole", "bicycle"}) {
    CAPTURE(std::string(name));
    const auto e = dyn::make_environment(name, dyn::Variant::kOriginal, {});
    certify::CertificateCache cache;
    const auto bad = never_recoverable_probes(*e, 5, 100, 3, cache);
    REQUIRE(bad.size() == 5);
    const MlpPolicy zero(e->policy_input_dim(), 200, e->action_low(), e->action_high());
    shield::ShieldConfig sc;
    sc.horizon = 100;
    for (const Vec& x : bad) {
      CHECK(e->safe_region().contains(x));
      const auto r = shield::is_recoverable(*e, zero, x, sc, cache);
      CHECK_FALSE(r.recoverable);
      CHECK(r.outcome == shield::Outcome::kHorizon);
    }
    const auto good = stable_probes(*e, 5, 3, cache);
    REQUIRE(good.size() == 5);
    for (const Vec& x : good) CHECK(certify::is_stable_fast(x, *e, cache));

    // Stable probes return at the first check, so latency does not grow with T.
    const auto flat = measure_latency(*e, {0, 100}, good, 20, cache);
    REQUIRE(flat.size() == 2);
    CHECK(flat[1].mean_ns < 3.0 * flat[0].mean_ns + 2e4);
    const auto steep = measure_latency(*e, {0, 100}, bad, 2, cache);
    CHECK(steep[1].mean_ns > 5.0 * steep[0].mean_ns);
  }
}

TEST_CASE("RunConfig: JSON round-trip and rejection of unknown keys") {
  RunConfig c;
  CHECK(c.train.iterations == 2000);
  CHECK(c.train.adam.lr == 1e-3);
  CHECK(c.recovery.train.horizon == 100);
  const nlohmann::json j = to_json(c);
  CHECK(to_json(run_config_from_json(j)) == j);

  nlohmann::json k = {{"train", {{"iterations", 7}, {"lr", 0.5}}},
                      {"recovery", {{"reward", "indicator"}, {"train", {{"seed", 9}}}}},
                      {"eval", {{"rollouts", 3}, {"timeout_ms", 2.5}}},
                      {"bench", {{"Ts", {0, 10}}}}};
  const RunConfig d = run_config_from_json(k);
  CHECK(d.train.iterations == 7);
  CHECK(d.train.adam.lr == 0.5);
  CHECK(d.recovery.reward == policy::RecoveryReward::kIndicator);
  CHECK(d.recovery.train.seed == 9);
  CHECK(d.recovery.train.horizon == 100);
  const ExperimentSpec s = d.spec("bicycle", dyn::Variant::kModified, Mode::kShield, 50);
  CHECK(s.rollouts == 3);
  REQUIRE(s.timeout);
  CHECK(s.timeout->count() == 2500000);
  CHECK(d.bench.Ts == std::vector<int>{0, 10});

  CHECK_THROWS_AS(run_config_from_json({{"trian", nlohmann::json::object()}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"train", {{"iters", 1}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"train", {{"iterations", "many"}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"eval", {{"rollouts", 0}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"recovery", {{"reward", "sparse"}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"env", {{"cartpole", {{"dt", -1}}}}}}), ConfigError);
  CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), IoError);
}

TEST_CASE("pipeline: missing checkpoints and certificate names") {
  CHECK_THROWS_AS(policy::load_policy(learned_policy_path("/nonexistent", "cartpole")), IoError);
  CHECK(learned_policy_path("out", "bicycle") == "out/pi_hat_bicycle.txt");
  CHECK(recovery_policy_path("out", "cartpole") == "out/pi_rec_cartpole.txt");
  CHECK(certificate_path("out", "cartpole", dyn::Variant::kModified) == "out/certificate_cartpole_modified.json");
}
