#include "oshield/certify/sos.h"

#include <cmath>
#include <limits>
#include <map>

#include <Eigen/Eigenvalues>

#include "oshield/errors.h"

namespace oshield::certify {
namespace {

using RowMap = std::map<Exponent, int, poly::GradedLex>;

Exponent add(const Exponent& a, const Exponent& b) {
  Exponent out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = static_cast<std::uint8_t>(a[i] + b[i]);
  return out;
}

int row_of(RowMap& rows, const Exponent& e, int& next) {
  auto [it, inserted] = rows.emplace(e, next);
  if (inserted) ++next;
  return it->second;
}

Mat clip_psd(const Mat& g) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (g + g.transpose()));
  const Vec lam = es.eigenvalues().cwiseMax(0.0);
  Mat out = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

double min_eig(const Mat& g) {
  if (g.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(g, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

struct Slot {
  int block;
  int i;
  int j;
};

// Folds the residual of `target - m'Gm` back into G, diagonal first.
bool absorb_residual(const Polynomial& target, std::vector<GramBlock>& grams) {
  std::map<Exponent, Slot, poly::GradedLex> where;
  for (std::size_t b = 0; b < grams.size(); ++b) {
    const Basis& m = grams[b].basis;
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t j = i; j < m.size(); ++j) {
        const Exponent e = add(m[i], m[j]);
        auto it = where.find(e);
        const Slot s{static_cast<int>(b), static_cast<int>(i), static_cast<int>(j)};
        if (it == where.end()) {
          where.emplace(e, s);
        } else if (i == j && it->second.i != it->second.j) {
          it->second = s;
        }
      }
    }
  }
  const int dim = target.dimension();
  for (int pass = 0; pass < 2; ++pass) {
    const Polynomial r = target - gram_polynomial(dim, grams);
    for (const auto& [e, c] : r.terms()) {
      auto it = where.find(e);
      if (it == where.end()) return false;
      const Slot& s = it->second;
      Mat& g = grams[s.block].gram;
      if (s.i == s.j) {
        g(s.i, s.i) += c;
      } else {
        g(s.i, s.j) += 0.5 * c;
        g(s.j, s.i) += 0.5 * c;
      }
    }
  }
  return true;
}

}  // namespace

Polynomial gram_polynomial(int dimension, const std::vector<GramBlock>& blocks) {
  Polynomial p(dimension);
  for (const GramBlock& blk : blocks) {
    const Basis& m = blk.basis;
    for (std::size_t i = 0; i < m.size(); ++i) {
      p.add_term(add(m[i], m[i]), blk.gram(i, i));
      for (std::size_t j = i + 1; j < m.size(); ++j) {
        p.add_term(add(m[i], m[j]), blk.gram(i, j) + blk.gram(j, i));
      }
    }
  }
  return p;
}

std::vector<Basis> gram_bases(int n, int lo, int hi, bool split_parity) {
  if (lo > hi) return {};
  const Basis all = poly::monomials_up_to(n, lo, hi);
  if (!split_parity) return {all};
  Basis odd, even;
  for (const Exponent& e : all) (poly::total_degree(e) % 2 ? odd : even).push_back(e);
  std::vector<Basis> out;
  if (!odd.empty()) out.push_back(std::move(odd));
  if (!even.empty()) out.push_back(std::move(even));
  return out;
}

SosResult solve_sos(const std::vector<SosConstraint>& constraints, const SosOptions& opts) {
  SosResult res;
  if (constraints.empty()) throw InputError("no SOS constraints");
  SdpProblem sdp;
  const double eta = opts.regularization;

  // Block bookkeeping: main blocks then multiplier blocks, per constraint.
  struct Index {
    std::vector<int> main;
    std::vector<std::vector<int>> mult;
  };
  std::vector<Index> index(constraints.size());
  std::vector<RowMap> rows(constraints.size());
  std::vector<int> row_offset(constraints.size());
  std::vector<std::vector<SdpEntry>> entries;
  int total_rows = 0;
  std::vector<std::pair<int, double>> t_rows;  // rows touched by t, with multiplicity

  for (std::size_t c = 0; c < constraints.size(); ++c) {
    const SosConstraint& con = constraints[c];
    const int dim = con.fixed.dimension();
    RowMap& rm = rows[c];
    int next = 0;
    std::vector<std::pair<int, SdpEntry>> local;
    std::map<int, double> t_local;
    for (const Basis& basis : con.blocks) {
      const int blk = static_cast<int>(sdp.psd_sizes.size());
      sdp.psd_sizes.push_back(static_cast<int>(basis.size()));
      index[c].main.push_back(blk);
      for (std::size_t i = 0; i < basis.size(); ++i) {
        if (static_cast<int>(basis[i].size()) != dim) throw InputError("basis dimension mismatch");
        for (std::size_t j = i; j < basis.size(); ++j) {
          const int r = row_of(rm, add(basis[i], basis[j]), next);
          local.push_back({r, {blk, static_cast<int>(i), static_cast<int>(j), 1.0}});
          if (i == j) t_local[r] += 1.0;
        }
      }
    }
    index[c].mult.resize(con.multipliers.size());
    for (std::size_t k = 0; k < con.multipliers.size(); ++k) {
      const SosMultiplierSpec& ms = con.multipliers[k];
      for (const Basis& basis : ms.blocks) {
        const int blk = static_cast<int>(sdp.psd_sizes.size());
        sdp.psd_sizes.push_back(static_cast<int>(basis.size()));
        index[c].mult[k].push_back(blk);
        for (std::size_t i = 0; i < basis.size(); ++i) {
          for (std::size_t j = i; j < basis.size(); ++j) {
            const Exponent base = add(basis[i], basis[j]);
            for (const auto& [e, coeff] : ms.factor.terms()) {
              const int r = row_of(rm, add(base, e), next);
              local.push_back({r, {blk, static_cast<int>(i), static_cast<int>(j), -coeff}});
            }
          }
        }
      }
    }
    for (const auto& [e, coeff] : con.fixed.terms()) {
      if (!rm.count(e)) {
        res.reason = con.name + ": fixed term outside the Gram/multiplier span";
        return res;
      }
    }
    row_offset[c] = total_rows;
    total_rows += next;
    entries.resize(total_rows);
    for (auto& [r, e] : local) entries[row_offset[c] + r].push_back(e);
    for (auto [r, n] : t_local) t_rows.push_back({row_offset[c] + r, n});
  }

  const int nb = static_cast<int>(sdp.psd_sizes.size());
  sdp.lp_size = 3;  // t+, t-, slack of the cap
  for (auto [r, n] : t_rows) {
    entries[r].push_back({nb, 0, 0, n});
    entries[r].push_back({nb, 1, 1, -n});
  }
  std::vector<SdpEntry> cap = {{nb, 0, 0, 1.0}, {nb, 1, 1, -1.0}, {nb, 2, 2, 1.0}};
  entries.push_back(cap);
  sdp.a = std::move(entries);
  sdp.b = Vec::Zero(total_rows + 1);
  for (std::size_t c = 0; c < constraints.size(); ++c) {
    for (const auto& [e, coeff] : constraints[c].fixed.terms()) {
      sdp.b(row_offset[c] + rows[c].at(e)) = coeff;
    }
  }
  sdp.b(total_rows) = opts.margin_cap;
  for (int k = 0; k < nb; ++k) {
    for (int i = 0; i < sdp.psd_sizes[k]; ++i) sdp.c.push_back({k, i, i, eta});
  }
  sdp.c.push_back({nb, 0, 0, -1.0 + eta});
  sdp.c.push_back({nb, 1, 1, 1.0 + eta});

  const SdpResult sol = solve_sdp(sdp, opts.sdp);
  res.status = sol.status;
  res.iterations = sol.iterations;
  res.margin = sol.x_lp(0) - sol.x_lp(1);

  if (constraints.size() == 1) {
    res.monomials.resize(rows[0].size());
    res.moments = Vec::Zero(static_cast<int>(rows[0].size()));
    for (const auto& [e, r] : rows[0]) {
      res.monomials[r] = e;
      res.moments(r) = -sol.y(r);
    }
  }

  bool all_finite = std::isfinite(res.margin);
  for (const Mat& x : sol.x) all_finite = all_finite && x.allFinite();
  if (!all_finite) {
    res.reason = "solver produced non-finite iterates";
    return res;
  }

  bool ok = true;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < constraints.size(); ++c) {
    const SosConstraint& con = constraints[c];
    const int dim = con.fixed.dimension();
    SosProof proof;
    proof.name = con.name;
    proof.polynomial = con.fixed;
    for (std::size_t k = 0; k < con.multipliers.size(); ++k) {
      std::vector<GramBlock> mg;
      for (std::size_t b = 0; b < con.multipliers[k].blocks.size(); ++b) {
        mg.push_back({con.multipliers[k].blocks[b], clip_psd(sol.x[index[c].mult[k][b]])});
      }
      Polynomial s = gram_polynomial(dim, mg);
      proof.polynomial += s * con.multipliers[k].factor;
      proof.multipliers.push_back(std::move(s));
      proof.multiplier_grams.push_back(std::move(mg));
    }
    for (std::size_t b = 0; b < con.blocks.size(); ++b) {
      const Mat& y = sol.x[index[c].main[b]];
      Mat g = y + res.margin * Mat::Identity(y.rows(), y.cols());
      proof.grams.push_back({con.blocks[b], 0.5 * (g + g.transpose())});
    }
    if (!absorb_residual(proof.polynomial, proof.grams)) {
      res.reason = con.name + ": residual outside the Gram span";
      return res;
    }
    proof.min_eigenvalue = std::numeric_limits<double>::infinity();
    for (const GramBlock& g : proof.grams) {
      proof.min_eigenvalue = std::min(proof.min_eigenvalue, min_eig(g.gram));
    }
    for (const auto& mg : proof.multiplier_grams) {
      for (const GramBlock& g : mg) proof.min_eigenvalue = std::min(proof.min_eigenvalue, min_eig(g.gram));
    }
    proof.residual = (proof.polynomial - gram_polynomial(dim, proof.grams)).coefficient_norm();
    worst = std::min(worst, proof.min_eigenvalue);
    if (!(proof.min_eigenvalue >= opts.eig_tolerance) || !(proof.residual <= opts.residual_tolerance)) {
      ok = false;
    }
    res.proofs.push_back(std::move(proof));
  }
  if (!(res.margin > opts.min_margin)) ok = false;
  res.feasible = ok;
  if (!ok) {
    res.reason = "no certificate: margin " + std::to_string(res.margin) + ", min eigenvalue " +
                 std::to_string(worst);
  }
  return res;
}

SosResult sos_feasible(const Polynomial& p, const SosOptions& opts) {
  const int deg = p.degree();
  if (p.is_zero()) {
    SosConstraint c{"p", p, {}, gram_bases(p.dimension(), 0, 0, false)};
    return solve_sos({c}, opts);
  }
  if (deg % 2 != 0) {
    SosResult r;
    r.reason = "odd degree polynomial cannot be SOS";
    return r;
  }
  const int lo = p.min_degree() / 2;
  SosConstraint c{"p", p, {}, gram_bases(p.dimension(), lo, deg / 2, p.is_even())};
  return solve_sos({c}, opts);
}

std::string check_proof(const SosProof& proof, double eig_tol, double residual_tol) {
  auto check_blocks = [&](const std::vector<GramBlock>& blocks) -> std::string {
    for (const GramBlock& g : blocks) {
      if (g.gram.rows() != static_cast<int>(g.basis.size()) || g.gram.cols() != g.gram.rows()) {
        return "gram size does not match basis";
      }
      if (!(g.gram - g.gram.transpose()).isZero(1e-12)) return "gram not symmetric";
      if (!(min_eig(g.gram) >= eig_tol)) return "gram has a negative eigenvalue";
    }
    return {};
  };
  if (auto e = check_blocks(proof.grams); !e.empty()) return e;
  for (std::size_t k = 0; k < proof.multiplier_grams.size(); ++k) {
    if (auto e = check_blocks(proof.multiplier_grams[k]); !e.empty()) return "multiplier " + e;
    const int dim = proof.polynomial.dimension();
    if ((proof.multipliers[k] - gram_polynomial(dim, proof.multiplier_grams[k])).coefficient_norm() >
        residual_tol) {
      return "multiplier does not match its gram";
    }
  }
  const double r =
      (proof.polynomial - gram_polynomial(proof.polynomial.dimension(), proof.grams)).coefficient_norm();
  if (!(r <= residual_tol)) return "reconstruction residual too large";
  return {};
}

}  // namespace oshield::certify
