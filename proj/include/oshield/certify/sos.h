#pragma once

// Sum-of-squares feasibility through Gram matrices.
//
// A constraint asks that  fixed + sum_j s_j * factor_j  be SOS, where each
// s_j is itself an SOS multiplier with a chosen monomial basis. Every SOS
// polynomial is written m(x)' G m(x) with G >= 0, optionally split into
// blocks (e.g. by degree parity for even polynomials). The semidefinite
// program maximizes a common margin t in G = Y + t I; a certificate is
// accepted only after the residual of the recovered identity has been
// folded back into G and every block is verified positive semidefinite.

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "oshield/certify/sdp.h"
#include "oshield/poly/polynomial.h"

namespace oshield::certify {

using poly::Exponent;
using poly::Polynomial;

using Basis = std::vector<Exponent>;

struct GramBlock {
  Basis basis;
  Mat gram;
};

// Sum over blocks of m' G m.
Polynomial gram_polynomial(int dimension, const std::vector<GramBlock>& blocks);

// Monomials of degree [lo, hi] in n variables; with split_parity, returned as
// two blocks (odd degrees, even degrees), otherwise one.
std::vector<Basis> gram_bases(int n, int lo, int hi, bool split_parity);

struct SosMultiplierSpec {
  Polynomial factor;
  std::vector<Basis> blocks;
};

struct SosConstraint {
  std::string name;
  Polynomial fixed;
  std::vector<SosMultiplierSpec> multipliers;
  std::vector<Basis> blocks;  // Gram basis of the whole expression
};

struct SosOptions {
  double margin_cap = 1.0;
  double regularization = 1e-7;  // trace penalty, keeps multipliers bounded
  double min_margin = -std::numeric_limits<double>::infinity();  // accept only t above this
  double eig_tolerance = -1e-8;  // on every extracted Gram block
  double residual_tolerance = 1e-7;
  SdpOptions sdp;
};

// Witness for one constraint.
struct SosProof {
  std::string name;
  Polynomial polynomial;  // fixed + sum multiplier * factor, exactly as certified
  std::vector<Polynomial> multipliers;
  std::vector<std::vector<GramBlock>> multiplier_grams;
  std::vector<GramBlock> grams;
  double min_eigenvalue = 0.0;
  double residual = 0.0;  // coefficient norm of polynomial - m'Gm
};

struct SosResult {
  bool feasible = false;
  std::string reason;
  double margin = 0.0;
  SdpStatus status = SdpStatus::kNumerical;
  int iterations = 0;
  std::vector<SosProof> proofs;
  // Dual functional on monomials: moments[k] is L(monomials[k]). When the
  // program is infeasible, L is nonnegative on squares (approximately) and
  // negative on the constraint.
  std::vector<Exponent> monomials;
  Vec moments;
};

SosResult solve_sos(const std::vector<SosConstraint>& constraints, const SosOptions& opts = {});

// Convenience: is p itself SOS over monomials of degree <= deg(p)/2.
SosResult sos_feasible(const Polynomial& p, const SosOptions& opts = {});

// Checks a proof independently: symmetric blocks, minimum eigenvalue and
// reconstruction residual. Returns an empty string when valid.
std::string check_proof(const SosProof& proof, double eig_tol = -1e-8, double residual_tol = 1e-7);

}  // namespace oshield::certify
