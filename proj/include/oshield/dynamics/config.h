#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>

#include <json.hpp>

#include "oshield/dynamics/environment.h"

namespace oshield::dyn {

struct CartPoleParams {
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double half_length = 0.5;
  double gravity = 9.8;
  double dt = 0.02;
  double action_bound = 10.0;  // |u| <= bound, u = force / total mass
  double theta_max = 0.15;
  double init_half_width = 0.5;
  int surrogate_degree = 5;
  double target_velocity = 0.1;
  double theta_weight = 1.0;
  double omega_weight = 0.1;
  int horizon_original = 200;
  int horizon_modified = 1000;
};

struct BicycleParams {
  double dt = 0.02;
  double accel_bound = 0.25;
  double steer_bound = 0.5;
  std::array<double, 5> initial_state = {0.0, 0.0, -0.1, 0.0, 0.0};
  std::array<double, 2> obstacle_x = {0.4, 0.7};
  double obstacle_y_half_width = 0.05;
  double radius_original = 0.05;
  double radius_modified = 0.2;
  double goal_x = 1.0;
  double penalty_weight = 100.0;
  double penalty_margin = 0.03;
  int horizon = 200;
};

struct EnvConfig {
  CartPoleParams cartpole;
  BicycleParams bicycle;
};

// Missing keys keep their defaults; unknown keys raise ConfigError.
EnvConfig env_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EnvConfig& c);

enum class Variant { kOriginal, kModified };
Variant parse_variant(const std::string& s);
std::string variant_name(Variant v);

std::shared_ptr<const Environment> make_environment(const std::string& name, Variant variant,
                                                    const EnvConfig& cfg,
                                                    std::uint64_t scenario_seed = 0);

}  // namespace oshield::dyn
