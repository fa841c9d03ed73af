#pragma once

// Primal-dual interior point method for block-diagonal semidefinite programs
//
//   min  <C, X>   s.t.  <A_i, X> = b_i,  X = diag(X_1, ..., X_k, x_lp) >= 0
//   max  b'y      s.t.  C - sum_i y_i A_i = Z >= 0
//
// with the HKM search direction and a Mehrotra predictor-corrector.
// Intended for the small, sparse problems produced by the SOS layer.

#include <vector>

#include <Eigen/Dense>

namespace oshield::certify {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// One upper-triangle coefficient. Off-diagonal entries stand for the
// symmetric pair, so they contribute 2 * value * X(row, col) to <A, X>.
// block == psd_sizes.size() addresses the LP block (row is the index).
struct SdpEntry {
  int block = 0;
  int row = 0;
  int col = 0;
  double value = 0.0;
};

struct SdpProblem {
  std::vector<int> psd_sizes;
  int lp_size = 0;
  std::vector<std::vector<SdpEntry>> a;  // one list per constraint
  Vec b;
  std::vector<SdpEntry> c;

  int num_constraints() const { return static_cast<int>(a.size()); }
  int lp_block() const { return static_cast<int>(psd_sizes.size()); }
};

struct SdpOptions {
  int max_iters = 80;
  double tol = 1e-9;      // relative primal/dual infeasibility and gap
  double step_fraction = 0.98;
  double initial_scale = 0.0;  // 0 picks one from the data
};

enum class SdpStatus { kOptimal, kMaxIterations, kNumerical };

struct SdpResult {
  SdpStatus status = SdpStatus::kNumerical;
  std::vector<Mat> x;
  std::vector<Mat> z;
  Vec x_lp;
  Vec z_lp;
  Vec y;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  int iterations = 0;
};

SdpResult solve_sdp(const SdpProblem& problem, const SdpOptions& opts = {});

// <A, X> over every block for a single constraint row.
double apply_constraint(const std::vector<SdpEntry>& row, const std::vector<Mat>& x,
                        const Vec& x_lp, int lp_block);

}  // namespace oshield::certify
