// oshield: train policies, verify LQR sets, and run shielded experiments.
//
//   oshield train          --env cartpole --out runs/cp
//   oshield train-recovery --env cartpole --out runs/cp
//   oshield verify         --env bicycle --variant modified --out runs/bi
//   oshield run            --env cartpole --shield-T 50 --out runs/cp
//   oshield eval           --env cartpole --variant modified --shield-T 100 --rollouts 100 --out runs/cp
//   oshield bench          --env cartpole --variant modified --out runs/cp
//
// --shield-T none evaluates the learned policy without the shield.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "oshield/certify/cache.h"
#include "oshield/certify/certificate_io.h"
#include "oshield/errors.h"
#include "oshield/harness/config.h"
#include "oshield/harness/emit.h"
#include "oshield/harness/experiment.h"
#include "oshield/harness/pipeline.h"

using namespace oshield;
using namespace oshield::harness;

namespace {

struct Args {
  std::string env = "cartpole";
  std::string variant = "original";
  std::string shield_T;
  std::uint64_t seed = 0;
  int rollouts = 0;
  int horizon = 0;
  int threads = 0;
  std::string config;
  std::string out = "out";
  std::string policies;  // defaults to out
  bool no_timing = false;

  CLI::Option* seed_opt = nullptr;
  CLI::Option* rollouts_opt = nullptr;
  CLI::Option* horizon_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
};

void add_common(CLI::App* sub, Args& a) {
  sub->add_option("--env", a.env, "cartpole | bicycle")->capture_default_str();
  sub->add_option("--variant", a.variant, "original | modified")->capture_default_str();
  sub->add_option("--shield-T", a.shield_T, "recovery horizon T, or 'none' to run unshielded");
  a.seed_opt = sub->add_option("--seed", a.seed, "RNG seed (training seed for train/train-recovery)");
  a.rollouts_opt = sub->add_option("--rollouts", a.rollouts, "number of rollouts");
  a.horizon_opt = sub->add_option("--horizon", a.horizon, "steps per rollout (training horizon for train*)");
  a.threads_opt = sub->add_option("--threads", a.threads, "worker threads");
  sub->add_option("--config", a.config, "JSON run config");
  sub->add_option("--out", a.out, "output directory")->capture_default_str();
  sub->add_option("--policies", a.policies, "directory holding pi_hat/pi_rec checkpoints (default: --out)");
  sub->add_flag("--no-timing", a.no_timing, "write wall_ns = 0 (byte-reproducible logs)");
}

struct Resolved {
  RunConfig cfg;
  dyn::Variant variant;
  Mode mode = Mode::kShield;
};

Resolved resolve(const Args& a, bool training, bool recovery) {
  Resolved r;
  if (!a.config.empty()) r.cfg = load_run_config(a.config);
  r.variant = dyn::parse_variant(a.variant);
  dyn::make_environment(a.env, r.variant, r.cfg.env);  // validates the name
  RunConfig& c = r.cfg;
  if (!a.shield_T.empty()) {
    if (a.shield_T == "none") {
      r.mode = Mode::kNone;
    } else {
      try {
        std::size_t used = 0;
        c.eval.T = std::stoi(a.shield_T, &used);
        if (used != a.shield_T.size() || c.eval.T < 0) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw ConfigError("--shield-T must be a non-negative integer or 'none'");
      }
    }
  }
  policy::TrainConfig& t = recovery ? c.recovery.train : c.train;
  if (a.seed_opt->count()) (training ? t.seed : c.eval.seed) = a.seed;
  if (a.horizon_opt->count()) {
    if (training) {
      t.horizon = a.horizon;
    } else {
      c.eval.horizon = a.horizon;
    }
  }
  if (a.rollouts_opt->count()) c.eval.rollouts = a.rollouts;
  if (a.threads_opt->count()) {
    c.eval.threads = a.threads;
    c.train.threads = a.threads;
    c.recovery.train.threads = a.threads;
  }
  if (a.no_timing) c.eval.timing = false;
  c = run_config_from_json(to_json(c));  // re-validate after overrides
  std::filesystem::create_directories(a.out);
  return r;
}

std::string policy_dir(const Args& a) { return a.policies.empty() ? a.out : a.policies; }

policy::MlpPolicy load_checkpoint(const std::string& path, const char* what) {
  if (!std::filesystem::exists(path)) {
    throw IoError("missing " + std::string(what) + " checkpoint " + path + " (run the matching train subcommand)");
  }
  return policy::load_policy(path);
}

void write_trace(const std::string& path, const std::vector<double>& trace) {
  write_file(path, [&](std::ostream& os) {
    os << "iteration,objective\n";
    char buf[64];
    for (std::size_t i = 0; i < trace.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu,%.10g\n", i + 1, trace[i]);
      os << buf;
    }
  });
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_train(const Args& a) {
  const Resolved r = resolve(a, true, false);
  const auto t0 = std::chrono::steady_clock::now();
  const policy::TrainResult res = train_learned(r.cfg, a.env, r.variant);
  const std::string path = learned_policy_path(a.out, a.env);
  policy::save_policy(path, res.policy);
  write_trace(a.out + "/train_trace_" + a.env + ".csv", res.trace);
  std::printf("trained pi_hat for %s/%s: %d iterations, objective %.6g -> %.6g (%.1f s)\n", a.env.c_str(),
              a.variant.c_str(), r.cfg.train.iterations, res.trace.front(), res.trace.back(), seconds_since(t0));
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int cmd_train_recovery(const Args& a) {
  const Resolved r = resolve(a, true, true);
  const policy::MlpPolicy pi_hat = load_checkpoint(learned_policy_path(policy_dir(a), a.env), "pi_hat");
  certify::CertificateCache cache(r.cfg.cache_options());
  const auto t0 = std::chrono::steady_clock::now();
  policy::RecoveryStates d_rec;
  const policy::RecoveryTrainResult res = train_recovery_policy(r.cfg, a.env, r.variant, pi_hat, cache, &d_rec);
  const std::string path = recovery_policy_path(a.out, a.env);
  policy::save_policy(path, res.train.policy);
  write_trace(a.out + "/recovery_trace_" + a.env + ".csv", res.train.trace);
  std::printf("d_rec: %zu states from %d draws (acceptance %.3f)\n", d_rec.size(), d_rec.drawn, d_rec.acceptance());
  for (const auto& [it, score] : res.selection) std::printf("  checkpoint %d: recoverable fraction %.4f\n", it, score);
  std::printf("trained pi_rec (%s reward), objective %.6g -> %.6g (%.1f s)\n",
              policy::recovery_reward_name(r.cfg.recovery.reward).c_str(), res.train.trace.front(),
              res.train.trace.back(), seconds_since(t0));
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int cmd_verify(const Args& a) {
  const Resolved r = resolve(a, false, false);
  const auto env = dyn::make_environment(a.env, r.variant, r.cfg.env, r.cfg.eval.seed);
  std::mt19937_64 rng(r.cfg.eval.seed);
  const Vec x0 = env->sample_initial(rng);
  const dyn::Target target = env->lqr_target(x0);
  certify::CertificateCache cache(r.cfg.cache_options());
  const auto t0 = std::chrono::steady_clock::now();
  const auto set = cache.set_for(*env, target);
  if (!set) {
    std::fprintf(stderr, "no verified set at the target of the initial state\n");
    return 1;
  }
  const std::string path = certificate_path(a.out, a.env, r.variant);
  certify::save_certificate(path, *set, a.env, a.variant);
  certify::load_certificate(path);  // re-checks every proof
  std::printf("%s/%s: method %s, epsilon %.10g, spectral radius %.6f, x0 %s (%.2f s)\n", a.env.c_str(),
              a.variant.c_str(), certify::method_name(set->method).c_str(), set->epsilon,
              set->controller.spectral_radius, set->contains(x0) ? "inside" : "outside", seconds_since(t0));
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

struct Loaded {
  policy::MlpPolicy pi_hat, pi_rec;
};

Loaded load_policies(const Args& a) {
  return {load_checkpoint(learned_policy_path(policy_dir(a), a.env), "pi_hat"),
          load_checkpoint(recovery_policy_path(policy_dir(a), a.env), "pi_rec")};
}

void print_metrics(const Metrics& m) {
  std::printf("%-8s %-8s %-6s T=%-4d reward %.4f +- %.4f  p_safe_state %.4f  p_safe_traj %.4f  reject %.4f\n",
              m.env.c_str(), m.variant.c_str(), m.mode.c_str(), m.T, m.reward_mean, m.reward_se, m.p_safe_state,
              m.p_safe_traj, m.reject_rate);
}

int cmd_run(const Args& a) {
  const Resolved r = resolve(a, false, false);
  const Loaded p = load_policies(a);
  ExperimentSpec spec = r.cfg.spec(a.env, r.variant, r.mode, r.cfg.eval.T);
  spec.rollouts = 1;
  spec.threads = 1;
  certify::CertificateCache cache(r.cfg.cache_options());
  const ExperimentResult res = run_experiment(spec, p.pi_hat, p.pi_rec, cache);
  const auto env = dyn::make_environment(a.env, r.variant, r.cfg.env);
  const RolloutResult& ro = res.rollouts.front();
  std::printf("t     branch    safe  state\n");
  for (const auto& s : ro.trajectory.steps) {
    std::printf("%-5d %-9s %-5d", s.t, shield::branch_name(s.branch).c_str(), s.safe ? 1 : 0);
    for (int i = 0; i < s.x.size(); ++i) std::printf(" %+.5f", s.x(i));
    std::printf("\n");
  }
  std::printf("reward %.6g, unsafe states %zu\n", ro.reward, ro.trajectory.unsafe_states());
  write_file(a.out + "/rollouts.csv", [&](std::ostream& os) { write_rollouts_csv(os, *env, res.rollouts); });
  return 0;
}

int cmd_eval(const Args& a) {
  const Resolved r = resolve(a, false, false);
  const Loaded p = load_policies(a);
  const ExperimentSpec spec = r.cfg.spec(a.env, r.variant, r.mode, r.cfg.eval.T);
  certify::CertificateCache cache(r.cfg.cache_options());
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult res = run_experiment(spec, p.pi_hat, p.pi_rec, cache);
  const auto env = dyn::make_environment(a.env, r.variant, r.cfg.env);
  write_file(a.out + "/rollouts.csv", [&](std::ostream& os) { write_rollouts_csv(os, *env, res.rollouts); });
  write_file(a.out + "/summary.csv", [&](std::ostream& os) { write_summary_csv(os, {res.metrics}); });
  write_file(a.out + "/usage.csv", [&](std::ostream& os) { write_usage_csv(os, res.metrics.usage); });
  const std::string title = a.env + " " + a.variant + " " + mode_name(r.mode) +
                            (r.mode == Mode::kShield ? " T=" + std::to_string(spec.T) : "");
  write_file(a.out + "/usage.svg", [&](std::ostream& os) { write_usage_svg(os, res.metrics.usage, title); });
  print_metrics(res.metrics);
  std::printf("states %lld, unsafe %lld, recovery steps %lld, audit violations %lld, freeze violations %lld, "
              "mean step %.1f us (%.1f s)\n",
              static_cast<long long>(res.metrics.states), static_cast<long long>(res.metrics.unsafe_states),
              static_cast<long long>(res.metrics.recovery_steps), static_cast<long long>(res.metrics.audit_violations),
              static_cast<long long>(res.metrics.freeze_violations), res.metrics.latency_mean_ns * 1e-3,
              seconds_since(t0));
  return 0;
}

int cmd_bench(const Args& a) {
  const Resolved r = resolve(a, false, false);
  const Loaded p = load_policies(a);
  certify::CertificateCache cache(r.cfg.cache_options());
  std::vector<Metrics> rows;
  const int T_max = *std::max_element(r.cfg.bench.Ts.begin(), r.cfg.bench.Ts.end());
  rows.push_back(run_experiment(r.cfg.spec(a.env, r.variant, Mode::kNone, T_max), p.pi_hat, p.pi_rec, cache).metrics);
  print_metrics(rows.back());
  for (const Metrics& m : sweep_T(r.cfg.spec(a.env, r.variant, Mode::kShield, 0), r.cfg.bench.Ts, p.pi_hat,
                                  p.pi_rec, cache)) {
    rows.push_back(m);
    print_metrics(m);
  }
  write_file(a.out + "/summary.csv", [&](std::ostream& os) { write_summary_csv(os, rows); });
  const std::vector<Metrics> shielded(rows.begin() + 1, rows.end());
  write_file(a.out + "/sweep.svg",
             [&](std::ostream& os) { write_sweep_svg(os, shielded, a.env + " " + a.variant + ": reward vs T"); });

  const auto env = dyn::make_environment(a.env, r.variant, r.cfg.env, r.cfg.eval.seed);
  const auto probes = never_recoverable_probes(*env, r.cfg.bench.probes, T_max, r.cfg.eval.seed, cache);
  const auto lat = measure_latency(*env, r.cfg.bench.Ts, probes, r.cfg.bench.reps, cache);
  write_file(a.out + "/latency.csv", [&](std::ostream& os) { write_latency_csv(os, lat); });
  write_file(a.out + "/latency.svg",
             [&](std::ostream& os) { write_latency_svg(os, lat, a.env + ": shield step latency vs T"); });
  std::vector<double> xs, ys;
  for (const LatencyPoint& pt : lat) {
    xs.push_back(pt.T);
    ys.push_back(pt.mean_ns);
    std::printf("latency T=%-4d %10.1f us +- %.1f\n", pt.T, pt.mean_ns * 1e-3, pt.se_ns * 1e-3);
  }
  if (xs.size() >= 2) {
    const LineFit f = fit_line(xs, ys);
    std::printf("latency fit: %.3f us per unit T, intercept %.1f us, R^2 %.4f\n", f.slope * 1e-3,
                f.intercept * 1e-3, f.r2);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"oshield: shielded control with LQR-verified recovery"};
  app.require_subcommand(1);
  Args args;
  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(const Args&);
  };
  const Sub subs[] = {
      {"train", "train the learned policy pi_hat by BPTT", cmd_train},
      {"train-recovery", "sample d_rec from pi_hat and train pi_rec", cmd_train_recovery},
      {"verify", "compute and write the certificate at the initial state's target", cmd_verify},
      {"run", "one verbose rollout", cmd_run},
      {"eval", "rollouts with rollouts.csv, summary.csv and usage.csv", cmd_eval},
      {"bench", "reward sweep over T and latency benchmark", cmd_bench},
  };
  std::vector<std::pair<CLI::App*, int (*)(const Args&)>> handlers;
  for (const Sub& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    add_common(sub, args);
    handlers.emplace_back(sub, s.fn);
  }
  // Option pointers are per subcommand; rebound below to the parsed one.
  CLI11_PARSE(app, argc, argv);
  try {
    for (auto& [sub, fn] : handlers) {
      if (!sub->parsed()) continue;
      args.seed_opt = sub->get_option("--seed");
      args.rollouts_opt = sub->get_option("--rollouts");
      args.horizon_opt = sub->get_option("--horizon");
      args.threads_opt = sub->get_option("--threads");
      return fn(args);
    }
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 1;
}
