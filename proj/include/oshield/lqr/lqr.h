#pragma once

#include <optional>

#include <Eigen/Dense>

#include "oshield/dynamics/environment.h"

namespace oshield::lqr {

using dyn::Mat;
using dyn::Vec;

struct Linearization {
  Mat a;
  Mat b;
  double residual = 0.0;  // ||f(x~, u~) - x~||
};

// Jacobians of the environment's polynomial surrogate (true step when there
// is none) at the target, split into state and action columns.
Linearization linearize(const dyn::Environment& env, const dyn::Target& target);

struct DareOptions {
  double tol = 1e-12;       // on ||P_{k+1} - P_k||_F relative to max(1, ||P||_F)
  int max_iters = 100000;
  int newton_steps = 3;     // Hewer refinement after the fixed point
};

struct DareSolution {
  Mat p;
  Mat k;  // u = k x
  int iterations = 0;
  double residual = 0.0;
  double spectral_radius = 0.0;  // of a + b k
};

// ||P - (Q + A'PA - A'PB (R + B'PB)^-1 B'PA)||_F
double dare_residual(const Mat& a, const Mat& b, const Mat& q, const Mat& r, const Mat& p);

// Fixed-point Riccati iteration from P = Q. Empty when the iteration does not
// converge, goes non-finite, or the closed loop is not strictly stable.
std::optional<DareSolution> solve_dare(const Mat& a, const Mat& b, const Mat& q, const Mat& r,
                                       const DareOptions& opts = {});

struct LqrOptions {
  Mat q;  // empty means identity (of the model actually solved)
  Mat r;
  double residual_tol = 1e-8;
  DareOptions dare;
};

// The exact reduced model the controller was synthesized on, if any.
struct ReducedModel {
  Mat a;
  Mat b;
  Mat p;
  Mat k;
  Mat project;      // reduced coordinates of a canonical displacement
  Mat lift_action;  // full action from reduced action
  Mat manifold;     // canonical displacement rows that must vanish
  Mat embed;        // canonical displacement of reduced coordinates
  Mat rotation;     // world = offset + rotation * canonical
};

struct LqrController {
  dyn::Target target;
  Mat k;
  Mat p;
  Mat q;
  Mat r;
  double spectral_radius = 0.0;
  std::optional<ReducedModel> reduced;

  Vec action(const Vec& x) const { return target.u + k * (x - target.x); }
  double value(const Vec& x) const {
    const Vec d = x - target.x;
    return d.dot(p * d);
  }
  // Moves a controller built at a canonical target into the world frame.
  LqrController recentred(const dyn::Recentering& map) const;
};

// Empty for non-equilibrium targets (linearization residual above
// opts.residual_tol) and unstabilizable models. Environments that expose a
// linear reduction are solved in the reduced coordinates.
std::optional<LqrController> lqr_control(const dyn::Environment& env, const dyn::Target& target,
                                         const LqrOptions& opts = {});

}  // namespace oshield::lqr
