// Acceptance run: trains both policies per environment with fixed seeds, then
// prints one PASS/FAIL line per criterion. Exit status is nonzero if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oshield/certify/cache.h"
#include "oshield/certify/certificate_io.h"
#include "oshield/dynamics/bicycle.h"
#include "oshield/harness/config.h"
#include "oshield/harness/experiment.h"
#include "oshield/harness/pipeline.h"
#include "oshield/lqr/lqr.h"
#include "oshield/parallel.h"

using namespace oshield;
using namespace oshield::harness;
using dyn::Mat;
using dyn::Variant;
using policy::MlpPolicy;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const char* vname(Variant v) { return v == Variant::kOriginal ? "original" : "modified"; }

struct Policies {
  MlpPolicy pi_hat, pi_rec;
};

Policies train_pair(const RunConfig& cfg, const std::string& env) {
  const auto t0 = std::chrono::steady_clock::now();
  certify::CertificateCache cache(cfg.cache_options());
  policy::TrainResult hat = train_learned(cfg, env, Variant::kOriginal);
  policy::RecoveryTrainResult rec = train_recovery_policy(cfg, env, Variant::kOriginal, hat.policy, cache);
  std::printf("# trained %s: pi_hat J %.4g -> %.4g, pi_rec J %.4g -> %.4g (%.0f s)\n", env.c_str(),
              hat.trace.front(), hat.trace.back(), rec.train.trace.front(), rec.train.trace.back(), elapsed(t0));
  return {std::move(hat.policy), std::move(rec.train.policy)};
}

Vec sample_ellipsoid(const Mat& p, double eps, std::mt19937_64& rng) {
  const int n = static_cast<int>(p.rows());
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec z(n);
  for (int i = 0; i < n; ++i) z(i) = g(rng);
  z *= std::pow(u(rng), 1.0 / n) / z.norm();
  const Mat l = Eigen::LLT<Mat>(p).matrixL();
  return std::sqrt(eps) * l.transpose().triangularView<Eigen::Upper>().solve(z);
}

// Samples V <= eps (on the reduced manifold when there is one), steps once
// under the certified controller and counts decrease or safety violations.
struct McResult {
  int inside = 0;
  int violations = 0;
};

McResult monte_carlo(const dyn::Environment& env, const certify::InvariantSet& set, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  McResult r;
  const auto& c = set.controller;
  const bool surrogate = env.has_surrogate();
  for (int s = 0; s < samples; ++s) {
    Vec x;
    if (c.reduced) {
      const Vec red = sample_ellipsoid(c.reduced->p, set.epsilon, rng);
      x = c.target.x + c.reduced->rotation * (c.reduced->embed * red);
    } else {
      x = c.target.x + sample_ellipsoid(c.p, set.epsilon, rng);
    }
    if (!set.contains(x)) continue;
    ++r.inside;
    const Vec u = c.action(x);
    const Vec next = env.step(x, u, surrogate);
    bool bad = !(set.value(next) <= set.value(x) + 1e-9);
    bad |= !env.safe_region().polytope_contains(x) || !env.safe_region().disks_clear(x);
    bad |= ((u - env.clamp_action(u)).cwiseAbs().maxCoeff() > 0.0);
    r.violations += bad;
  }
  return r;
}

// Largest eps with the reduced ellipse clear of every disk and within the
// acceleration bound. Moving along the heading by s sweeps both points along a
// line, so each disk blocks an interval of s found from the chord.
double bicycle_eps_closed_form(const dyn::Bicycle& env, const dyn::Target& t, const lqr::ReducedModel& red) {
  const Eigen::Vector2d tf(t.x(0), t.x(1)), tb(t.x(2), t.x(3));
  const Eigen::Vector2d dir = (tf - tb).normalized();
  double ahead = INFINITY, behind = INFINITY;
  for (const Eigen::Vector2d& base : {tf, tb}) {
    for (const auto& disk : env.safe_region().disks) {
      const Eigen::Vector2d p = base - disk.center;
      const double along = -p.dot(dir);
      const double perp2 = p.squaredNorm() - along * along;
      const double r2 = disk.radius * disk.radius;
      if (perp2 >= r2) continue;
      const double half = std::sqrt(r2 - perp2);
      if (along - half > 0.0) {
        ahead = std::min(ahead, along - half);
      } else if (along + half < 0.0) {
        behind = std::min(behind, -(along + half));
      } else {
        return 0.0;
      }
    }
  }
  const Mat pinv = red.p.inverse();
  const double s = std::min(ahead, behind);
  const double eps_disk = s * s / pinv(0, 0);
  const double a = env.params().accel_bound;
  const double eps_act = a * a / (red.k * pinv * red.k.transpose())(0, 0);
  return std::min(eps_disk, eps_act);
}

std::pair<Mat, Mat> value_iteration(const Mat& a, const Mat& b, const Mat& q, const Mat& r, int horizon) {
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

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12}); }

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  RunConfig cfg;
  const int threads = default_threads();
  cfg.train.threads = threads;
  cfg.recovery.train.threads = threads;
  cfg.eval.threads = threads;
  const std::vector<std::string> envs = {"cartpole", "bicycle"};
  const std::vector<Variant> variants = {Variant::kOriginal, Variant::kModified};

  std::map<std::string, Policies> pol;
  for (const auto& e : envs) pol.emplace(e, train_pair(cfg, e));

  // Shielded runs at T in {0, 100} plus unshielded runs, 100 rollouts each.
  std::map<std::string, Metrics> runs;
  auto key = [](const std::string& e, Variant v, Mode m, int T) {
    return e + "/" + vname(v) + "/" + mode_name(m) + "/" + std::to_string(T);
  };
  for (const auto& e : envs) {
    certify::CertificateCache cache(cfg.cache_options());
    for (Variant v : variants) {
      for (auto [m, T] : {std::pair{Mode::kShield, 0}, std::pair{Mode::kShield, 100}, std::pair{Mode::kNone, 100}}) {
        const auto t0 = std::chrono::steady_clock::now();
        const Metrics met = run_experiment(cfg.spec(e, v, m, T), pol[e].pi_hat, pol[e].pi_rec, cache).metrics;
        std::printf("# %-8s %-8s %-6s T=%-3d reward %8.4f +- %.4f p_safe_state %.4f p_safe_traj %.2f reject %.3f "
                    "unsafe %lld recovery %lld (%.0f s)\n",
                    e.c_str(), vname(v), mode_name(m).c_str(), T, met.reward_mean, met.reward_se, met.p_safe_state,
                    met.p_safe_traj, met.reject_rate, static_cast<long long>(met.unsafe_states),
                    static_cast<long long>(met.recovery_steps), elapsed(t0));
        runs[key(e, v, m, T)] = met;
      }
    }
  }

  {
    long long unsafe = 0, states = 0;
    int n = 0;
    for (const auto& e : envs) {
      for (Variant v : variants) {
        for (int T : {0, 100}) {
          const Metrics& m = runs[key(e, v, Mode::kShield, T)];
          unsafe += m.unsafe_states;
          states += m.states;
          ++n;
        }
      }
    }
    report(1, unsafe == 0 && n == 8, fmt("%lld unsafe of %lld states over %d shielded configurations x 100 rollouts",
                                         unsafe, states, n));
  }

  {
    bool pass = true;
    std::string detail;
    for (const auto& e : envs) {
      const Metrics& none = runs[key(e, Variant::kModified, Mode::kNone, 100)];
      const Metrics& sh = runs[key(e, Variant::kModified, Mode::kShield, 100)];
      pass &= none.p_safe_state <= 0.9 && sh.p_safe_state == 1.0;
      detail += fmt("%s modified: unshielded %.4f, shielded %.4f; ", e.c_str(), none.p_safe_state, sh.p_safe_state);
    }
    report(2, pass, detail);
  }

  {
    certify::CertificateCache cache(cfg.cache_options());
    const auto t0 = std::chrono::steady_clock::now();
    const auto sweep = sweep_T(cfg.spec("cartpole", Variant::kModified, Mode::kShield, 0), {0, 25, 75, 100},
                               pol["cartpole"].pi_hat, pol["cartpole"].pi_rec, cache);
    for (const Metrics& m : sweep) {
      std::printf("# sweep cartpole modified T=%-3d reward %.4f +- %.4f\n", m.T, m.reward_mean, m.reward_se);
    }
    const double gap = std::abs(sweep[2].reward_mean - sweep[3].reward_mean);
    const double se = std::hypot(sweep[2].reward_se, sweep[3].reward_se);
    report(3, sweep[1].reward_mean > sweep[0].reward_mean && gap <= se,
           fmt("R(25) %.4f vs R(0) %.4f; |R(75) - R(100)| %.4f vs combined SE %.4f (%.0f s)", sweep[1].reward_mean,
               sweep[0].reward_mean, gap, se, elapsed(t0)));
  }

  {
    bool pass = true;
    std::string detail;
    const std::vector<int> Ts = {0, 25, 50, 75, 100};
    for (const auto& e : envs) {
      const auto env = dyn::make_environment(e, Variant::kModified, cfg.env, 5);
      certify::CertificateCache cache(cfg.cache_options());
      const auto probes = never_recoverable_probes(*env, 20, 100, 5, cache);
      const auto lat = measure_latency(*env, Ts, probes, 3, cache);
      std::vector<double> xs, ys;
      for (const auto& p : lat) {
        xs.push_back(p.T);
        ys.push_back(p.mean_ns);
      }
      const LineFit f = fit_line(xs, ys);
      pass &= f.r2 >= 0.95;
      detail += fmt("%s R^2 %.4f (%.2f us/T); ", e.c_str(), f.r2, f.slope * 1e-3);
    }
    report(4, pass, detail);
  }

  {
    bool pass = true;
    std::string detail;
    const std::string dir = (std::filesystem::temp_directory_path() / "oshield_acceptance").string();
    std::filesystem::create_directories(dir);
    for (const auto& e : envs) {
      for (Variant v : variants) {
        const std::uint64_t layout = 7;
        const auto env = dyn::make_environment(e, v, cfg.env, layout);
        certify::CertificateCache cache(cfg.cache_options());
        std::mt19937_64 rng(layout);
        const auto set = cache.set_for(*env, env->lqr_target(env->sample_initial(rng)));
        if (!set) {
          pass = false;
          detail += fmt("%s %s: no set; ", e.c_str(), vname(v));
          continue;
        }
        const std::string path = certificate_path(dir, e, v);
        certify::save_certificate(path, *set, e, vname(v));
        const certify::LoadedCertificate loaded = certify::load_certificate(path);
        const McResult mc = monte_carlo(*env, loaded.set, 100000, 99);
        pass &= mc.violations == 0 && mc.inside > 50000;
        detail += fmt("%s %s: %d/%d violations; ", e.c_str(), vname(v), mc.violations, mc.inside);
      }
    }
    std::filesystem::remove_all(dir);
    report(5, pass, detail);
  }

  {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    int checked = 0, positive = 0;
    for (int layout = 0; layout < 10; ++layout) {
      for (Variant v : variants) {
        dyn::Bicycle env(cfg.env.bicycle, v, layout);
        certify::CertificateCache cache(cfg.cache_options());
        for (int k = 0; k < 20; ++k) {
          const double h = 0.6 * (u(rng) - 0.5);
          const Eigen::Vector2d dir(std::cos(h), std::sin(h));
          const Eigen::Vector2d back(0.9 * u(rng) - 0.1, 0.4 * (u(rng) - 0.5));
          Vec x(5);
          x << back + 0.1 * dir, back, 0.03 * u(rng);
          if (!env.is_safe(x)) continue;
          const dyn::Target t = env.lqr_target(x);
          const auto set = cache.set_for(env, t);
          if (!set || !set->controller.reduced) {
            worst = INFINITY;
            continue;
          }
          const double oracle = bicycle_eps_closed_form(env, t, *set->controller.reduced);
          const double err = oracle == 0.0 ? std::abs(set->epsilon) : rel_err(set->epsilon, oracle);
          worst = std::max(worst, err);
          ++checked;
          positive += oracle > 0.0;
        }
      }
    }
    report(6, checked > 100 && worst <= 1e-8,
           fmt("worst relative error %.3g over %d targets (%d with eps > 0)", worst, checked, positive));
  }

  {
    const Mat one = Mat::Identity(1, 1);
    const auto g = lqr::solve_dare(one, one, one, one);
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    const double golden = g ? std::abs(g->p(0, 0) - phi) : INFINITY;
    const auto env = dyn::make_environment("cartpole", Variant::kOriginal, cfg.env);
    const dyn::Target t{Vec::Zero(4), Vec::Zero(1)};
    const auto ctrl = lqr::lqr_control(*env, t);
    const lqr::Linearization lin = lqr::linearize(*env, t);
    const auto [p, k] = value_iteration(lin.a, lin.b, Mat::Identity(4, 4), Mat::Identity(1, 1), 10000);
    const double vi = ctrl ? std::max((ctrl->p - p).cwiseAbs().maxCoeff(), (ctrl->k - k).cwiseAbs().maxCoeff())
                           : INFINITY;
    report(7, golden <= 1e-10 && vi <= 1e-6,
           fmt("|P - phi| %.3g; cart-pole max |P - P_vi|, |K - K_vi| %.3g", golden, vi));
  }

  {
    double worst = 0.0;
    for (const auto& e : envs) {
      const auto env = dyn::make_environment(e, Variant::kOriginal, cfg.env);
      std::mt19937_64 rng(31);
      MlpPolicy p = MlpPolicy::for_env(*env, 200, rng, e == "cartpole" ? 3.0 : 0.2);
      const auto d0 = policy::env_starts(env);
      for (int horizon : {1, 2, 5}) {
        policy::Start s = d0(rng);
        if (e == "cartpole") {
          s.x *= 0.3;
        } else {
          s.x(4) = 0.02;
        }
        std::vector<double> g;
        policy::rollout_objective(p, s, policy::env_reward(), horizon, 0.99, false, &g);
        auto j = [&] { return policy::rollout_objective(p, s, policy::env_reward(), horizon, 0.99, false); };
        std::normal_distribution<double> n(0.0, 1.0);
        for (int probe = 0; probe < 5; ++probe) {
          std::vector<double> d(p.num_params());
          double gd = 0.0;
          for (std::size_t i = 0; i < d.size(); ++i) {
            d[i] = n(rng);
            gd += g[i] * d[i];
          }
          const std::vector<double> keep(p.params().begin(), p.params().end());
          const double h = 1e-6;
          for (std::size_t i = 0; i < d.size(); ++i) p.params()[i] = keep[i] + h * d[i];
          const double up = j();
          for (std::size_t i = 0; i < d.size(); ++i) p.params()[i] = keep[i] - h * d[i];
          const double dn = j();
          std::copy(keep.begin(), keep.end(), p.params().begin());
          worst = std::max(worst, rel_err(gd, (up - dn) / (2 * h)));
        }
      }
    }
    report(8, worst <= 1e-4, fmt("worst directional relative error %.3g (horizons 1, 2, 5; both environments)", worst));
  }

  {
    long long recovery = 0, audit = 0, freeze = 0;
    for (const auto& [k, m] : runs) {
      recovery += m.recovery_steps;
      audit += m.audit_violations;
      freeze += m.freeze_violations;
    }
    report(9, audit == 0 && freeze == 0 && recovery > 0,
           fmt("%lld recovery steps audited, %lld without a positive first-stable index; %lld lqr steps moved the "
               "target",
               recovery, audit, freeze));
  }

  {
    bool pass = true;
    std::string detail;
    for (const auto& e : envs) {
      for (Variant v : variants) {
        const Metrics& m = runs[key(e, v, Mode::kShield, 0)];
        double min_lqr = 1.0;
        for (const auto& row : m.usage) min_lqr = std::min(min_lqr, row[2]);
        pass &= min_lqr == 1.0 && !m.usage.empty();
        detail += fmt("%s %s %.4f; ", e.c_str(), vname(v), min_lqr);
      }
    }
    report(10, pass, "minimum lqr fraction per step at T = 0: " + detail);
  }

  std::printf("# %d of 10 criteria failed (%.0f s)\n", failures, elapsed(start));
  return failures == 0 ? 0 : 1;
}
