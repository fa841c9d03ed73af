#pragma once

#include <array>

#include "oshield/dynamics/config.h"
#include "oshield/dynamics/environment.h"

namespace oshield::dyn {

// Kinematic bicycle, state (x_f, y_f, x_b, y_b, v), action (a, steer).
// Velocity is in distance per step: the back point moves v along the heading,
// the heading turns by v * tan(steer) / wheelbase, the front point is
// re-attached at the wheelbase, and v' = v + a * dt.
class Bicycle final : public Environment {
 public:
  Bicycle(const BicycleParams& params, Variant variant, std::uint64_t obstacle_seed);

  std::string name() const override { return "bicycle"; }
  std::string variant() const override { return variant_name(variant_); }
  int state_dim() const override { return 5; }
  int action_dim() const override { return 2; }
  std::vector<std::string> state_names() const override { return {"xf", "yf", "xb", "yb", "v"}; }
  std::vector<std::string> action_names() const override { return {"a", "steer"}; }
  int default_horizon() const override { return params_.horizon; }

  const SafeRegion& safe_region() const override { return safe_; }
  const Vec& action_low() const override { return low_; }
  const Vec& action_high() const override { return high_; }

  Vec true_step(const Vec& x, const Vec& u) const override;
  void step_jacobian(const Vec& x, const Vec& u, bool use_surrogate, Mat& dx,
                     Mat& du) const override;

  Vec sample_initial(std::mt19937_64& rng) const override;
  double training_reward(const Vec& x, Vec* grad) const override;
  double task_metric(const std::vector<Vec>& trajectory) const override;

  Target lqr_target(const Vec& x) const override;
  CanonicalTarget canonicalize(const Target& t) const override;
  std::optional<LinearReduction> linear_reduction() const override;
  double manifold_residual(const Vec& x, const Target& t) const override;

  int policy_input_dim() const override { return 7; }
  Vec policy_input(const Vec& x) const override;

  std::shared_ptr<const Environment> instance(std::uint64_t scenario_seed) const override;
  bool has_layouts() const override { return true; }
  std::uint64_t scenario_key() const override { return seed_; }

  const std::array<double, 2>& obstacle_y() const { return obstacle_y_; }
  double radius() const;
  const BicycleParams& params() const { return params_; }

 private:
  BicycleParams params_;
  Variant variant_;
  std::uint64_t seed_;
  std::array<double, 2> obstacle_y_{};
  SafeRegion safe_;
  Vec low_;
  Vec high_;
};

}  // namespace oshield::dyn
