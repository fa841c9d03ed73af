#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oshield/poly/polynomial.h"

namespace oshield::dyn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Points (x[ix], x[iy]) must stay at distance >= radius from center.
struct DiskExclusion {
  int ix = 0;
  int iy = 1;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;
};

struct SafeRegion {
  Mat a;  // k x n
  Vec b;  // k
  std::vector<DiskExclusion> disks;

  int rows() const { return static_cast<int>(b.size()); }
  bool polytope_contains(const Vec& x) const;
  bool disks_clear(const Vec& x) const;
  bool contains(const Vec& x) const { return polytope_contains(x) && disks_clear(x); }
};

struct Target {
  Vec x;
  Vec u;
};

// x = offset + rotation * x_canonical; actions are frame-independent.
struct Recentering {
  Vec offset;
  Mat rotation;  // orthogonal

  Vec to_world(const Vec& xc) const { return offset + rotation * xc; }
  Vec to_canonical(const Vec& x) const { return rotation.transpose() * (x - offset); }
};

struct CanonicalTarget {
  Target target;
  Recentering map;
};

// Exact linear model of the closed loop about a canonical target, in reduced
// coordinates r = project * (x_c - x_target_c): r' = a r + b w, with the full
// action u = u_target + lift_action * w. Valid on the manifold where the
// reduced coordinates describe the state completely (manifold_residual = 0).
struct LinearReduction {
  Mat a;
  Mat b;
  Mat project;
  Mat lift_action;
  Mat manifold;  // rows that vanish on the manifold (canonical displacement)
  Mat embed;     // canonical displacement of reduced coordinates; project * embed = I
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual std::string variant() const = 0;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual std::vector<std::string> state_names() const = 0;
  virtual std::vector<std::string> action_names() const = 0;
  // Evaluation horizon for this variant.
  virtual int default_horizon() const = 0;

  virtual const SafeRegion& safe_region() const = 0;
  bool is_safe(const Vec& x) const { return safe_region().contains(x); }

  virtual const Vec& action_low() const = 0;
  virtual const Vec& action_high() const = 0;
  Vec clamp_action(const Vec& u) const;

  // Clamps u, integrates one step with the selected model, rejects non-finite
  // results with NumericError.
  Vec step(const Vec& x, const Vec& u, bool use_surrogate) const;
  virtual Vec true_step(const Vec& x, const Vec& u) const = 0;
  virtual bool has_surrogate() const { return false; }
  virtual const poly::PolynomialMap* surrogate() const { return nullptr; }
  virtual Vec surrogate_step(const Vec& x, const Vec& u) const;
  // Jacobians of step() with respect to x and the (already clamped) u.
  virtual void step_jacobian(const Vec& x, const Vec& u, bool use_surrogate,
                             Mat& dx, Mat& du) const = 0;

  virtual Vec sample_initial(std::mt19937_64& rng) const = 0;
  virtual double training_reward(const Vec& x, Vec* grad) const = 0;
  virtual double task_metric(const std::vector<Vec>& trajectory) const = 0;

  virtual Target lqr_target(const Vec& x) const = 0;
  virtual CanonicalTarget canonicalize(const Target& t) const = 0;
  virtual std::optional<LinearReduction> linear_reduction() const { return std::nullopt; }
  // Distance of x from the manifold on which linear_reduction() is exact.
  virtual double manifold_residual(const Vec& /*x*/, const Target& /*t*/) const { return 0.0; }

  virtual int policy_input_dim() const { return state_dim(); }
  virtual Vec policy_input(const Vec& x) const { return x; }

  // Environments with a randomized layout return a copy with the layout drawn
  // from `scenario_seed`; others return themselves.
  virtual std::shared_ptr<const Environment> instance(std::uint64_t scenario_seed) const = 0;
  virtual bool has_layouts() const { return false; }
  // Identifies the layout; equal keys mean identical safe regions.
  virtual std::uint64_t scenario_key() const { return 0; }
};

}  // namespace oshield::dyn
