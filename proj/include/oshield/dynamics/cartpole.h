#pragma once

#include <memory>

#include "oshield/dynamics/config.h"
#include "oshield/dynamics/environment.h"
#include "oshield/poly/compiled.h"

namespace oshield::dyn {

// Continuous-action cart-pole, state (z, v, theta, omega), action u = F / (m_c + m_p).
// Safe region |theta| <= theta_max. The surrogate is the Taylor polynomial of
// the Euler step about the origin of (x, u).
class CartPole final : public Environment {
 public:
  CartPole(const CartPoleParams& params, Variant variant);

  std::string name() const override { return "cartpole"; }
  std::string variant() const override { return variant_name(variant_); }
  int state_dim() const override { return 4; }
  int action_dim() const override { return 1; }
  std::vector<std::string> state_names() const override { return {"z", "v", "theta", "omega"}; }
  std::vector<std::string> action_names() const override { return {"u"}; }
  int default_horizon() const override;

  const SafeRegion& safe_region() const override { return safe_; }
  const Vec& action_low() const override { return low_; }
  const Vec& action_high() const override { return high_; }

  Vec true_step(const Vec& x, const Vec& u) const override;
  bool has_surrogate() const override { return true; }
  const poly::PolynomialMap* surrogate() const override { return &surrogate_; }
  Vec surrogate_step(const Vec& x, const Vec& u) const override;
  void step_jacobian(const Vec& x, const Vec& u, bool use_surrogate, Mat& dx,
                     Mat& du) const override;

  Vec sample_initial(std::mt19937_64& rng) const override;
  double training_reward(const Vec& x, Vec* grad) const override;
  double task_metric(const std::vector<Vec>& trajectory) const override;

  Target lqr_target(const Vec& x) const override;
  CanonicalTarget canonicalize(const Target& t) const override;

  std::shared_ptr<const Environment> instance(std::uint64_t) const override;

  const CartPoleParams& params() const { return params_; }

 private:
  CartPoleParams params_;
  Variant variant_;
  SafeRegion safe_;
  Vec low_;
  Vec high_;
  poly::PolynomialMap surrogate_;
  std::shared_ptr<const poly::CompiledPolyMapWithJacobian> compiled_;
};

}  // namespace oshield::dyn
