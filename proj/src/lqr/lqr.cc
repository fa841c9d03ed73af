#include "oshield/lqr/lqr.h"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "oshield/errors.h"

namespace oshield::lqr {
namespace {

void check_weights(const Mat& q, const Mat& r, int n, int m) {
  if (q.rows() != n || q.cols() != n || r.rows() != m || r.cols() != m) {
    throw InputError("LQR weights have wrong dimensions");
  }
  if (!q.isApprox(q.transpose(), 1e-12) || !r.isApprox(r.transpose(), 1e-12)) {
    throw InputError("LQR weights must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat> eq(q), er(r);
  if (eq.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, q.norm())) {
    throw InputError("Q must be positive semidefinite");
  }
  if (!(er.eigenvalues().minCoeff() > 0.0)) throw InputError("R must be positive definite");
}

Mat gain(const Mat& a, const Mat& b, const Mat& r, const Mat& p) {
  const Mat bp = b.transpose() * p;
  return -(r + bp * b).ldlt().solve(bp * a);
}

Mat riccati_map(const Mat& a, const Mat& b, const Mat& q, const Mat& r, const Mat& p) {
  const Mat ap = a.transpose() * p;
  const Mat bpa = b.transpose() * p * a;
  Mat next = q + ap * a - bpa.transpose() * (r + b.transpose() * p * b).ldlt().solve(bpa);
  return 0.5 * (next + next.transpose());
}

// Solves P = c + m' P m by vectorization; fine for the small systems here.
Mat discrete_lyapunov(const Mat& m, const Mat& c) {
  const int n = static_cast<int>(m.rows());
  Mat kron(n * n, n * n);
  const Mat mt = m.transpose();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) kron.block(i * n, j * n, n, n) = mt(i, j) * mt;
  }
  const Mat lhs = Mat::Identity(n * n, n * n) - kron;
  const Vec rhs = Eigen::Map<const Vec>(c.data(), n * n);
  const Vec sol = lhs.fullPivLu().solve(rhs);
  Mat p = Eigen::Map<const Mat>(sol.data(), n, n);
  return 0.5 * (p + p.transpose());
}

double spectral_radius(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Mat> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

Linearization linearize(const dyn::Environment& env, const dyn::Target& target) {
  const int n = env.state_dim();
  const int m = env.action_dim();
  if (target.x.size() != n || target.u.size() != m) throw InputError("target has wrong dimension");
  Linearization lin;
  if (const poly::PolynomialMap* f = env.surrogate()) {
    Vec w(n + m);
    w << target.x, target.u;
    const Mat j = f->jacobian(w);
    lin.a = j.leftCols(n);
    lin.b = j.rightCols(m);
    lin.residual = ((*f)(w) - target.x).norm();
  } else {
    env.step_jacobian(target.x, target.u, false, lin.a, lin.b);
    lin.residual = (env.true_step(target.x, target.u) - target.x).norm();
  }
  return lin;
}

double dare_residual(const Mat& a, const Mat& b, const Mat& q, const Mat& r, const Mat& p) {
  return (p - riccati_map(a, b, q, r, p)).norm();
}

std::optional<DareSolution> solve_dare(const Mat& a, const Mat& b, const Mat& q, const Mat& r,
                                       const DareOptions& opts) {
  check_weights(q, r, static_cast<int>(a.rows()), static_cast<int>(b.cols()));
  DareSolution sol;
  Mat p = q;
  bool converged = false;
  for (int it = 1; it <= opts.max_iters; ++it) {
    Mat next = riccati_map(a, b, q, r, p);
    if (!next.allFinite()) return std::nullopt;
    const double step = (next - p).norm();
    p = std::move(next);
    sol.iterations = it;
    if (step <= opts.tol * std::max(1.0, p.norm())) {
      converged = true;
      break;
    }
  }
  if (!converged) return std::nullopt;

  double res = dare_residual(a, b, q, r, p);
  for (int s = 0; s < opts.newton_steps && res > 0.0; ++s) {
    const Mat k = gain(a, b, r, p);
    const Mat cl = a + b * k;
    const Mat cand = discrete_lyapunov(cl, q + k.transpose() * r * k);
    if (!cand.allFinite()) break;
    const double cres = dare_residual(a, b, q, r, cand);
    if (!(cres < res)) break;
    p = cand;
    res = cres;
  }

  sol.p = p;
  sol.k = gain(a, b, r, p);
  sol.residual = res;
  sol.spectral_radius = spectral_radius(a + b * sol.k);
  if (!sol.k.allFinite() || !(sol.spectral_radius < 1.0)) return std::nullopt;
  return sol;
}

LqrController LqrController::recentred(const dyn::Recentering& map) const {
  LqrController c = *this;
  c.target.x = map.to_world(target.x);
  if (!map.rotation.isIdentity(0.0)) {
    c.k = k * map.rotation.transpose();
    c.p = map.rotation * p * map.rotation.transpose();
    c.p = 0.5 * (c.p + c.p.transpose());
  }
  if (c.reduced) c.reduced->rotation = map.rotation * reduced->rotation;
  return c;
}

std::optional<LqrController> lqr_control(const dyn::Environment& env, const dyn::Target& target,
                                         const LqrOptions& opts) {
  const int n = env.state_dim();
  const int m = env.action_dim();
  const Linearization lin = linearize(env, target);
  if (!(lin.residual <= opts.residual_tol)) return std::nullopt;

  if (auto red = env.linear_reduction()) {
    const int nr = static_cast<int>(red->a.rows());
    const int mr = static_cast<int>(red->b.cols());
    const Mat q = opts.q.size() ? opts.q : Mat::Identity(nr, nr);
    const Mat r = opts.r.size() ? opts.r : Mat::Identity(mr, mr);
    auto sol = solve_dare(red->a, red->b, q, r, opts.dare);
    if (!sol) return std::nullopt;
    const dyn::CanonicalTarget c = env.canonicalize(target);
    LqrController ctrl;
    ctrl.target = c.target;
    ctrl.k = red->lift_action * sol->k * red->project;
    ctrl.p = red->project.transpose() * sol->p * red->project;
    ctrl.q = q;
    ctrl.r = r;
    ctrl.spectral_radius = sol->spectral_radius;
    ctrl.reduced = ReducedModel{red->a, red->b, sol->p, sol->k, red->project, red->lift_action,
                                red->manifold, red->embed, Mat::Identity(n, n)};
    LqrController world = ctrl.recentred(c.map);
    world.target = target;
    return world;
  }

  const Mat q = opts.q.size() ? opts.q : Mat::Identity(n, n);
  const Mat r = opts.r.size() ? opts.r : Mat::Identity(m, m);
  auto sol = solve_dare(lin.a, lin.b, q, r, opts.dare);
  if (!sol) return std::nullopt;
  LqrController ctrl;
  ctrl.target = target;
  ctrl.k = sol->k;
  ctrl.p = sol->p;
  ctrl.q = q;
  ctrl.r = r;
  ctrl.spectral_radius = sol->spectral_radius;
  return ctrl;
}

}  // namespace oshield::lqr
