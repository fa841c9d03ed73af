#include "oshield/certify/verify.h"

#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "oshield/errors.h"

namespace oshield::certify {
namespace {

// c' d <= h in displacement coordinates.
struct Row {
  Vec c;
  double h;
  std::string name;
};

std::vector<Row> safety_rows(const dyn::Environment& env, const lqr::LqrController& ctrl,
                             bool action_rows) {
  std::vector<Row> rows;
  const dyn::SafeRegion& safe = env.safe_region();
  const Vec& xt = ctrl.target.x;
  for (int i = 0; i < safe.rows(); ++i) {
    rows.push_back({safe.a.row(i).transpose(), safe.b(i) - safe.a.row(i).dot(xt),
                    "safe_row_" + std::to_string(i)});
  }
  if (action_rows) {
    for (int j = 0; j < env.action_dim(); ++j) {
      const Vec kj = ctrl.k.row(j).transpose();
      rows.push_back({kj, env.action_high()(j) - ctrl.target.u(j), "action_hi_" + std::to_string(j)});
      rows.push_back({-kj, ctrl.target.u(j) - env.action_low()(j), "action_lo_" + std::to_string(j)});
    }
  }
  return rows;
}

struct Whitening {
  Mat l;      // P = L L'
  Mat w;      // L^-T, so d = sqrt(eps) W y has V(d) = eps |y|^2
};

Whitening whiten(const Mat& p) {
  Eigen::LLT<Mat> llt(p);
  if (llt.info() != Eigen::Success) throw NumericError("P is not positive definite");
  Whitening wh;
  wh.l = llt.matrixL();
  wh.w = wh.l.transpose().triangularView<Eigen::Upper>().solve(Mat::Identity(p.rows(), p.cols()));
  return wh;
}

Polynomial ball_minus_one(int n) {
  return Polynomial::quadratic(Mat::Identity(n, n), Vec::Zero(n), -1.0);
}

std::optional<SosProof> certify_row(const Row& row, const Mat& scaling, int mu_degree,
                                    const SosOptions& opts) {
  const int n = static_cast<int>(scaling.cols());
  const Vec lin = scaling.transpose() * row.c;
  const double norm = std::max(std::abs(row.h), lin.norm());
  if (norm == 0.0) return SosProof{row.name, Polynomial(n), {}, {}, {}, 0.0, 0.0};
  Polynomial g = Polynomial::affine(-lin / norm, row.h / norm);
  SosConstraint con;
  con.name = row.name;
  con.fixed = g;
  con.multipliers.push_back({ball_minus_one(n), gram_bases(n, 0, mu_degree / 2, false)});
  con.blocks = gram_bases(n, 0, std::max(1, mu_degree / 2 + 1), false);
  SosResult r = solve_sos({con}, opts);
  if (!r.feasible) return std::nullopt;
  return std::move(r.proofs.front());
}

std::optional<SosProof> certify_decrease(const poly::PolynomialMap& fcl, const Whitening& wh,
                                         double eps, int lambda_degree, const SosOptions& opts) {
  const int n = fcl.output_dim();
  const double root = std::sqrt(eps);
  const Mat scaling = root * wh.w;
  const poly::PolynomialMap scaled = fcl.compose_affine(scaling, Vec::Zero(n));
  Polynomial fixed = Polynomial::quadratic(Mat::Identity(n, n), Vec::Zero(n), 0.0);
  const Mat lt = wh.l.transpose() / root;
  for (int i = 0; i < n; ++i) {
    Polynomial gi(n);
    for (int j = 0; j < n; ++j) {
      if (lt(i, j) != 0.0) gi += lt(i, j) * scaled[j];
    }
    fixed -= gi * gi;
  }
  const bool even = fixed.is_even();
  SosConstraint con;
  con.name = "decrease";
  con.fixed = fixed;
  con.multipliers.push_back({ball_minus_one(n), gram_bases(n, 1, lambda_degree / 2, even)});
  const int top = std::max(fixed.degree(), lambda_degree + 2);
  con.blocks = gram_bases(n, 1, (top + 1) / 2, even);
  SosResult r = solve_sos({con}, opts);
  if (!r.feasible) return std::nullopt;
  return std::move(r.proofs.front());
}

// Largest eps in [0, cap] accepted by `ok`, assuming ok(0).
template <class F>
double search(F&& ok, double start, double cap, double rel_tol) {
  double lo = 0.0;
  double hi = std::min(start, cap);
  while (hi < cap && ok(hi)) {
    lo = hi;
    hi = std::min(2.0 * hi, cap);
  }
  if (hi >= cap && lo < cap) {
    if (ok(cap)) return cap;
  }
  const double tol = rel_tol * hi;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (ok(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace

poly::PolynomialMap closed_loop(const dyn::Environment& env, const lqr::LqrController& ctrl) {
  const poly::PolynomialMap* f = env.surrogate();
  if (!f) throw InputError(env.name() + " has no polynomial surrogate to verify against");
  const int n = env.state_dim();
  const int m = env.action_dim();
  Mat map(n + m, n);
  map << Mat::Identity(n, n), ctrl.k;
  Vec shift(n + m);
  shift << ctrl.target.x, ctrl.target.u;
  poly::PolynomialMap cl = f->compose_affine(map, shift);
  for (int i = 0; i < n; ++i) cl[i] -= Polynomial::constant(n, ctrl.target.x(i));
  return cl;
}

std::optional<SosCertificate> certify_at(const dyn::Environment& env, const lqr::LqrController& ctrl,
                                         double epsilon, const VerifyConfig& cfg) {
  if (!(epsilon > 0.0)) return std::nullopt;
  const Whitening wh = whiten(ctrl.p);
  SosCertificate cert;
  cert.epsilon = epsilon;
  cert.multiplier_degree = cfg.multiplier_degree;
  cert.safety_multiplier_degree = cfg.safety_multiplier_degree;
  cert.scaling = std::sqrt(epsilon) * wh.w;
  for (const Row& row : safety_rows(env, ctrl, cfg.action_rows)) {
    auto proof = certify_row(row, cert.scaling, cfg.safety_multiplier_degree, cfg.sos);
    if (!proof) return std::nullopt;
    cert.mu.push_back(proof->multipliers.empty() ? Polynomial(env.state_dim()) : proof->multipliers[0]);
    cert.safety.push_back(std::move(*proof));
  }
  auto dec = certify_decrease(closed_loop(env, ctrl), wh, epsilon, cfg.multiplier_degree, cfg.sos);
  if (!dec) return std::nullopt;
  cert.lambda = dec->multipliers[0];
  cert.decrease = std::move(*dec);
  return cert;
}

std::optional<InvariantSet> lqr_verify(const dyn::Environment& env, const lqr::LqrController& ctrl,
                                       const VerifyConfig& cfg, VerifyReport* report) {
  const auto t0 = std::chrono::steady_clock::now();
  VerifyReport local;
  VerifyReport& rep = report ? *report : local;
  rep = VerifyReport{};
  try {
    const std::vector<Row> rows = safety_rows(env, ctrl, cfg.action_rows);
    // eps = 0 is the target alone: safe rows must hold there.
    for (const Row& r : rows) {
      if (!(r.h >= 0.0)) return std::nullopt;
    }
    const Whitening wh = whiten(ctrl.p);
    const poly::PolynomialMap fcl = closed_loop(env, ctrl);
    const int n = env.state_dim();

    std::vector<SosProof> safety;
    double safety_eps = -1.0;
    auto safety_ok = [&](double eps) {
      const Mat scaling = std::sqrt(eps) * wh.w;
      std::vector<SosProof> proofs;
      for (const Row& r : rows) {
        ++rep.sdp_solves;
        auto p = certify_row(r, scaling, cfg.safety_multiplier_degree, cfg.sos);
        if (!p) return false;
        proofs.push_back(std::move(*p));
      }
      if (eps > safety_eps) {
        safety = std::move(proofs);
        safety_eps = eps;
      }
      return true;
    };
    rep.eps_safety = search(safety_ok, cfg.eps_start, cfg.eps_cap, cfg.bisection_tol);

    std::optional<SosProof> decrease;
    double decrease_eps = -1.0;
    auto decrease_ok = [&](double eps) {
      ++rep.sdp_solves;
      auto p = certify_decrease(fcl, wh, eps, cfg.multiplier_degree, cfg.sos);
      rep.decrease_trace.push_back({eps, p.has_value()});
      if (!p) return false;
      if (eps > decrease_eps) {
        decrease = std::move(p);
        decrease_eps = eps;
      }
      return true;
    };
    rep.eps_decrease = rep.eps_safety > 0.0
                           ? search(decrease_ok, rep.eps_safety, rep.eps_safety, cfg.bisection_tol)
                           : 0.0;

    const double eps = std::min(rep.eps_safety, rep.eps_decrease);
    InvariantSet set = make_invariant_set(ctrl, eps, Method::kSos);
    if (eps > 0.0) {
      if (safety_eps != eps) {
        safety_eps = -1.0;
        if (!safety_ok(eps)) return std::nullopt;
      }
      if (decrease_eps != eps) return std::nullopt;  // search only accepts certified points
      SosCertificate cert;
      cert.epsilon = eps;
      cert.multiplier_degree = cfg.multiplier_degree;
      cert.safety_multiplier_degree = cfg.safety_multiplier_degree;
      cert.scaling = std::sqrt(eps) * wh.w;
      cert.lambda = decrease->multipliers[0];
      cert.decrease = std::move(*decrease);
      for (SosProof& p : safety) cert.mu.push_back(p.multipliers.empty() ? Polynomial(n) : p.multipliers[0]);
      cert.safety = std::move(safety);
      set.certificate = std::make_shared<const SosCertificate>(std::move(cert));
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return set;
  } catch (const NumericError&) {
    return std::nullopt;
  }
}

InvariantSet exact_linear_invariant(const lqr::LqrController& ctrl, const dyn::SafeRegion& safe,
                                    const Vec& action_low, const Vec& action_high) {
  const int n = static_cast<int>(ctrl.target.x.size());
  // d = embed * r with V = r' pr r.
  Mat embed = Mat::Identity(n, n);
  Mat pr = ctrl.p;
  Mat kr = ctrl.k;
  InvariantSet set = make_invariant_set(ctrl, 0.0, Method::kExactLinear);
  if (ctrl.reduced) {
    embed = ctrl.reduced->rotation * ctrl.reduced->embed;
    pr = ctrl.reduced->p;
    kr = ctrl.k * embed;
    set.manifold = ctrl.reduced->manifold * ctrl.reduced->rotation.transpose();
  }
  const Mat pinv = pr.inverse();
  const Vec& xt = ctrl.target.x;
  double eps = std::numeric_limits<double>::infinity();

  auto half_space = [&](const Vec& c_world, double h) {
    const Vec c = embed.transpose() * c_world;
    if (h < 0.0) {
      eps = 0.0;
      return;
    }
    const double q = c.dot(pinv * c);
    if (q > 0.0) eps = std::min(eps, h * h / q);
  };
  for (int i = 0; i < safe.rows(); ++i) half_space(safe.a.row(i).transpose(), safe.b(i) - safe.a.row(i).dot(xt));
  if (action_low.size() && action_high.size()) {
    for (int j = 0; j < kr.rows(); ++j) {
      const Vec kj = kr.row(j).transpose();
      const double q = kj.dot(pinv * kj);
      const double hi = action_high(j) - ctrl.target.u(j);
      const double lo = ctrl.target.u(j) - action_low(j);
      if (hi < 0.0 || lo < 0.0) eps = 0.0;
      if (q > 0.0) eps = std::min(eps, std::min(hi, lo) * std::min(hi, lo) / q);
    }
  }

  for (const dyn::DiskExclusion& disk : safe.disks) {
    const Eigen::Vector2d d = disk.center - Eigen::Vector2d(xt(disk.ix), xt(disk.iy));
    if (d.norm() < disk.radius) {
      eps = 0.0;
      continue;
    }
    Mat ep(2, embed.cols());
    ep.row(0) = embed.row(disk.ix);
    ep.row(1) = embed.row(disk.iy);
    const Eigen::Matrix2d s = ep * pinv * ep.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(s);
    const double big = es.eigenvalues()(1);
    if (!(big > 0.0)) continue;
    if (es.eigenvalues()(0) <= 1e-12 * big) {
      // Ellipsoid image is a segment along u with half-length sqrt(eps * big).
      const Eigen::Vector2d u = es.eigenvectors().col(1);
      const double b = u.dot(d);
      const double disc = b * b - d.squaredNorm() + disk.radius * disk.radius;
      if (disc < 0.0) continue;
      const double root = std::sqrt(disc);
      const double t1 = b - root;
      const double t2 = b + root;
      const double reach = std::min(std::abs(t1), std::abs(t2));
      eps = std::min(eps, reach * reach / big);
    } else {
      // Smallest gauge w' S^-1 w over the disk boundary.
      const Eigen::Matrix2d sinv = s.inverse();
      auto gauge = [&](double th) {
        const Eigen::Vector2d w = d + disk.radius * Eigen::Vector2d(std::cos(th), std::sin(th));
        return w.dot(sinv * w);
      };
      const int grid = 3600;
      int best = 0;
      double bval = gauge(0.0);
      for (int k = 1; k < grid; ++k) {
        const double g = gauge(2.0 * M_PI * k / grid);
        if (g < bval) {
          bval = g;
          best = k;
        }
      }
      double a = 2.0 * M_PI * (best - 1) / grid;
      double b = 2.0 * M_PI * (best + 1) / grid;
      const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
      for (int it = 0; it < 100; ++it) {
        const double c1 = b - phi * (b - a);
        const double c2 = a + phi * (b - a);
        if (gauge(c1) < gauge(c2)) {
          b = c2;
        } else {
          a = c1;
        }
      }
      eps = std::min(eps, std::min(bval, gauge(0.5 * (a + b))));
    }
  }
  if (!std::isfinite(eps)) throw InputError("exact linear invariant is unbounded; add a bounding row");
  // Keeps boundary states off the obstacle edge after rounding.
  set.epsilon = eps * (1.0 - 1e-12);
  return set;
}

}  // namespace oshield::certify
