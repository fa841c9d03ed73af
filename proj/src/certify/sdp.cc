#include "oshield/certify/sdp.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "oshield/errors.h"

namespace oshield::certify {
namespace {

struct BlockRow {
  int constraint;
  std::vector<SdpEntry> entries;
};

// Constraint rows regrouped by block, in constraint order.
struct Layout {
  std::vector<std::vector<BlockRow>> psd;          // per PSD block
  std::vector<std::vector<std::pair<int, double>>> lp;  // per LP column: (constraint, value)
  std::vector<Mat> c;
  Vec c_lp;
};

Layout build_layout(const SdpProblem& p) {
  const int nb = static_cast<int>(p.psd_sizes.size());
  Layout l;
  l.psd.resize(nb);
  l.lp.resize(p.lp_size);
  for (int i = 0; i < p.num_constraints(); ++i) {
    std::vector<std::vector<SdpEntry>> per(nb);
    for (const SdpEntry& e : p.a[i]) {
      if (e.block == nb) {
        if (e.row < 0 || e.row >= p.lp_size) throw InputError("LP entry out of range");
        l.lp[e.row].push_back({i, e.value});
        continue;
      }
      if (e.block < 0 || e.block > nb) throw InputError("SDP entry block out of range");
      const int n = p.psd_sizes[e.block];
      if (e.row < 0 || e.col < e.row || e.col >= n) throw InputError("SDP entry must be upper triangle");
      per[e.block].push_back(e);
    }
    for (int k = 0; k < nb; ++k) {
      if (!per[k].empty()) l.psd[k].push_back({i, std::move(per[k])});
    }
  }
  l.c.resize(nb);
  for (int k = 0; k < nb; ++k) l.c[k] = Mat::Zero(p.psd_sizes[k], p.psd_sizes[k]);
  l.c_lp = Vec::Zero(p.lp_size);
  for (const SdpEntry& e : p.c) {
    if (e.block == nb) {
      l.c_lp(e.row) += e.value;
    } else {
      l.c[e.block](e.row, e.col) += e.value;
      if (e.row != e.col) l.c[e.block](e.col, e.row) += e.value;
    }
  }
  return l;
}

double inner(const std::vector<SdpEntry>& entries, const Mat& w) {
  double s = 0.0;
  for (const SdpEntry& e : entries) {
    s += e.row == e.col ? e.value * w(e.row, e.row)
                        : e.value * (w(e.row, e.col) + w(e.col, e.row));
  }
  return s;
}

// A(W) for one symmetric iterate.
Vec apply_all(const Layout& l, int m, const std::vector<Mat>& w, const Vec& w_lp) {
  Vec out = Vec::Zero(m);
  for (std::size_t k = 0; k < l.psd.size(); ++k) {
    for (const BlockRow& r : l.psd[k]) out(r.constraint) += inner(r.entries, w[k]);
  }
  for (std::size_t j = 0; j < l.lp.size(); ++j) {
    for (auto [i, v] : l.lp[j]) out(i) += v * w_lp(j);
  }
  return out;
}

// sum_i y_i A_i
void adjoint(const Layout& l, const Vec& y, std::vector<Mat>& s, Vec& s_lp) {
  for (std::size_t k = 0; k < l.psd.size(); ++k) {
    s[k].setZero();
    for (const BlockRow& r : l.psd[k]) {
      const double yi = y(r.constraint);
      for (const SdpEntry& e : r.entries) {
        s[k](e.row, e.col) += yi * e.value;
        if (e.row != e.col) s[k](e.col, e.row) += yi * e.value;
      }
    }
  }
  s_lp.setZero();
  for (std::size_t j = 0; j < l.lp.size(); ++j) {
    for (auto [i, v] : l.lp[j]) s_lp(j) += v * y(i);
  }
}

Mat sym(const Mat& m) { return 0.5 * (m + m.transpose()); }

// Largest alpha with X + alpha dX >= 0 (infinity if unbounded).
double max_step(const Mat& x, const Mat& dx) {
  Eigen::LLT<Mat> llt(x);
  if (llt.info() != Eigen::Success) return 0.0;
  Mat t = llt.matrixL().solve(dx);
  t = llt.matrixL().solve(t.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(t), Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  return lo < 0.0 ? -1.0 / lo : std::numeric_limits<double>::infinity();
}

double max_step_lp(const Vec& x, const Vec& dx) {
  double a = std::numeric_limits<double>::infinity();
  for (int i = 0; i < x.size(); ++i) {
    if (dx(i) < 0.0) a = std::min(a, -x(i) / dx(i));
  }
  return a;
}

double block_norm(const std::vector<Mat>& m, const Vec& lp) {
  double s = lp.squaredNorm();
  for (const Mat& b : m) s += b.squaredNorm();
  return std::sqrt(s);
}

}  // namespace

double apply_constraint(const std::vector<SdpEntry>& row, const std::vector<Mat>& x,
                        const Vec& x_lp, int lp_block) {
  double s = 0.0;
  for (const SdpEntry& e : row) {
    if (e.block == lp_block) {
      s += e.value * x_lp(e.row);
    } else {
      const Mat& w = x[e.block];
      s += e.row == e.col ? e.value * w(e.row, e.row) : 2.0 * e.value * w(e.row, e.col);
    }
  }
  return s;
}

SdpResult solve_sdp(const SdpProblem& p, const SdpOptions& opts) {
  const int m = p.num_constraints();
  const int nb = static_cast<int>(p.psd_sizes.size());
  if (p.b.size() != m) throw InputError("SDP right-hand side has wrong length");
  const Layout l = build_layout(p);

  double total_dim = p.lp_size;
  int nmax = 1;
  for (int n : p.psd_sizes) {
    total_dim += n;
    nmax = std::max(nmax, n);
  }

  // Starting point scaled to the data.
  double a_norm_max = 0.0;
  double ratio = 0.0;
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (const SdpEntry& e : p.a[i]) s += (e.row == e.col ? 1.0 : 2.0) * e.value * e.value;
    a_norm_max = std::max(a_norm_max, std::sqrt(s));
    ratio = std::max(ratio, (1.0 + std::abs(p.b(i))) / (1.0 + std::sqrt(s)));
  }
  double c_norm = l.c_lp.norm();
  for (const Mat& c : l.c) c_norm = std::hypot(c_norm, c.norm());
  const double root = std::sqrt(static_cast<double>(nmax));
  const double xi = opts.initial_scale > 0 ? opts.initial_scale : std::max({10.0, root, root * ratio});
  const double zeta = opts.initial_scale > 0 ? opts.initial_scale
                                             : std::max({10.0, root, c_norm, a_norm_max});

  SdpResult r;
  r.x.resize(nb);
  r.z.resize(nb);
  for (int k = 0; k < nb; ++k) {
    r.x[k] = xi * Mat::Identity(p.psd_sizes[k], p.psd_sizes[k]);
    r.z[k] = zeta * Mat::Identity(p.psd_sizes[k], p.psd_sizes[k]);
  }
  r.x_lp = Vec::Constant(p.lp_size, xi);
  r.z_lp = Vec::Constant(p.lp_size, zeta);
  r.y = Vec::Zero(m);

  const double b_norm = p.b.norm();
  std::vector<Mat> aty(nb), rd(nb), zinv(nb), dx(nb), dz(nb), dx_aff(nb), dz_aff(nb);
  for (int k = 0; k < nb; ++k) aty[k] = Mat::Zero(p.psd_sizes[k], p.psd_sizes[k]);
  Vec aty_lp(p.lp_size), rd_lp, dx_lp, dz_lp, dx_aff_lp, dz_aff_lp;

  for (int it = 0; it <= opts.max_iters; ++it) {
    r.iterations = it;
    const Vec rp = p.b - apply_all(l, m, r.x, r.x_lp);
    adjoint(l, r.y, aty, aty_lp);
    for (int k = 0; k < nb; ++k) rd[k] = l.c[k] - r.z[k] - aty[k];
    rd_lp = l.c_lp - r.z_lp - aty_lp;

    double pobj = l.c_lp.dot(r.x_lp);
    double xz = r.x_lp.dot(r.z_lp);
    for (int k = 0; k < nb; ++k) {
      pobj += l.c[k].cwiseProduct(r.x[k]).sum();
      xz += r.x[k].cwiseProduct(r.z[k]).sum();
    }
    r.primal_objective = pobj;
    r.dual_objective = p.b.dot(r.y);
    r.primal_infeasibility = rp.norm() / (1.0 + b_norm);
    r.dual_infeasibility = block_norm(rd, rd_lp) / (1.0 + c_norm);
    const double gap = std::abs(pobj - r.dual_objective) /
                       (1.0 + std::abs(pobj) + std::abs(r.dual_objective));
    if (!std::isfinite(pobj) || !std::isfinite(r.dual_objective)) {
      r.status = SdpStatus::kNumerical;
      return r;
    }
    if (r.primal_infeasibility <= opts.tol && r.dual_infeasibility <= opts.tol && gap <= opts.tol) {
      r.status = SdpStatus::kOptimal;
      return r;
    }
    if (it == opts.max_iters) break;
    const double mu = xz / total_dim;

    // Schur complement M_ij = tr(A_i X A_j Z^-1).
    Mat schur = Mat::Zero(m, m);
    bool ok = true;
    for (int k = 0; k < nb; ++k) {
      Eigen::LLT<Mat> llt(r.z[k]);
      if (llt.info() != Eigen::Success) {
        ok = false;
        break;
      }
      zinv[k] = llt.solve(Mat::Identity(p.psd_sizes[k], p.psd_sizes[k]));
      zinv[k] = sym(zinv[k]);
      const Mat& x = r.x[k];
      const Mat& zi = zinv[k];
      const int n = p.psd_sizes[k];
      const auto& rows = l.psd[k];
      for (std::size_t a = 0; a < rows.size(); ++a) {
        const auto& ea = rows[a].entries;
        int cols = 0;
        for (const SdpEntry& e : ea) cols += e.row == e.col ? 1 : 2;
        Mat u(n, cols), w(cols, n);
        int c = 0;
        for (const SdpEntry& e : ea) {
          u.col(c) = e.value * x.col(e.row);
          w.row(c) = zi.row(e.col);
          ++c;
          if (e.row != e.col) {
            u.col(c) = e.value * x.col(e.col);
            w.row(c) = zi.row(e.row);
            ++c;
          }
        }
        const Mat bmat = u * w;
        const int i = rows[a].constraint;
        for (std::size_t bidx = a; bidx < rows.size(); ++bidx) {
          schur(i, rows[bidx].constraint) += inner(rows[bidx].entries, bmat);
        }
      }
    }
    if (!ok) {
      r.status = SdpStatus::kNumerical;
      return r;
    }
    for (std::size_t j = 0; j < l.lp.size(); ++j) {
      const double d = r.x_lp(j) / r.z_lp(j);
      const auto& col = l.lp[j];
      for (std::size_t a = 0; a < col.size(); ++a) {
        for (std::size_t b = a; b < col.size(); ++b) {
          const int i1 = std::min(col[a].first, col[b].first);
          const int i2 = std::max(col[a].first, col[b].first);
          schur(i1, i2) += d * col[a].second * col[b].second * (i1 == i2 && a != b ? 2.0 : 1.0);
        }
      }
    }
    schur = schur.selfadjointView<Eigen::Upper>();
    Eigen::LLT<Mat> schur_llt(schur);
    if (schur_llt.info() != Eigen::Success) {
      const double shift = 1e-14 * std::max(1.0, schur.diagonal().maxCoeff());
      schur.diagonal().array() += shift;
      schur_llt.compute(schur);
      if (schur_llt.info() != Eigen::Success) {
        r.status = SdpStatus::kNumerical;
        return r;
      }
    }

    // Solves for (dy, dZ, dX) with target sigma * mu and optional corrector.
    auto direction = [&](double target, bool corrector, Vec& dy) {
      std::vector<Mat> rr(nb);
      for (int k = 0; k < nb; ++k) {
        Mat t = target * zinv[k] - r.x[k] - r.x[k] * rd[k] * zinv[k];
        if (corrector) t -= dx_aff[k] * dz_aff[k] * zinv[k];
        rr[k] = sym(t);
      }
      Vec rr_lp = (target - r.x_lp.array() * r.z_lp.array() - r.x_lp.array() * rd_lp.array()) /
                  r.z_lp.array();
      if (corrector) rr_lp.array() -= dx_aff_lp.array() * dz_aff_lp.array() / r.z_lp.array();
      dy = schur_llt.solve(rp - apply_all(l, m, rr, rr_lp));
      adjoint(l, dy, aty, aty_lp);
      for (int k = 0; k < nb; ++k) {
        dz[k] = rd[k] - aty[k];
        Mat t = target * zinv[k] - r.x[k] - r.x[k] * dz[k] * zinv[k];
        if (corrector) t -= dx_aff[k] * dz_aff[k] * zinv[k];
        dx[k] = sym(t);
      }
      dz_lp = rd_lp - aty_lp;
      dx_lp = ((target - r.x_lp.array() * r.z_lp.array() - r.x_lp.array() * dz_lp.array()) /
               r.z_lp.array()).matrix();
      if (corrector) dx_lp.array() -= dx_aff_lp.array() * dz_aff_lp.array() / r.z_lp.array();
    };
    auto steps = [&](double& ap, double& ad) {
      ap = max_step_lp(r.x_lp, dx_lp);
      ad = max_step_lp(r.z_lp, dz_lp);
      for (int k = 0; k < nb; ++k) {
        ap = std::min(ap, max_step(r.x[k], dx[k]));
        ad = std::min(ad, max_step(r.z[k], dz[k]));
      }
    };

    Vec dy;
    direction(0.0, false, dy);
    double ap, ad;
    steps(ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double mu_aff = (r.x_lp + ap * dx_lp).dot(r.z_lp + ad * dz_lp);
    for (int k = 0; k < nb; ++k) {
      mu_aff += (r.x[k] + ap * dx[k]).cwiseProduct(r.z[k] + ad * dz[k]).sum();
    }
    mu_aff /= total_dim;
    const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);
    dx_aff = dx;
    dz_aff = dz;
    dx_aff_lp = dx_lp;
    dz_aff_lp = dz_lp;

    direction(sigma * mu, true, dy);
    steps(ap, ad);
    ap = std::min(1.0, opts.step_fraction * ap);
    ad = std::min(1.0, opts.step_fraction * ad);
    if (!(ap > 1e-12) && !(ad > 1e-12)) {
      r.status = SdpStatus::kNumerical;
      return r;
    }
    for (int k = 0; k < nb; ++k) {
      r.x[k] = sym(r.x[k] + ap * dx[k]);
      r.z[k] = sym(r.z[k] + ad * dz[k]);
    }
    r.x_lp += ap * dx_lp;
    r.z_lp += ad * dz_lp;
    r.y += ad * dy;
  }
  r.status = SdpStatus::kMaxIterations;
  return r;
}

}  // namespace oshield::certify
