#include "oshield/dynamics/config.h"

#include <functional>
#include <map>

#include "oshield/dynamics/bicycle.h"
#include "oshield/dynamics/cartpole.h"
#include "oshield/errors.h"

namespace oshield::dyn {
namespace {

using json = nlohmann::json;
using Setter = std::function<void(const json&)>;

template <class T>
Setter set(T& field) {
  return [&field](const json& v) { v.get_to(field); };
}

void apply(const json& obj, const std::string& section, const std::map<std::string, Setter>& keys) {
  if (!obj.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& [k, v] : obj.items()) {
    auto it = keys.find(k);
    if (it == keys.end()) throw ConfigError("unknown key '" + section + "." + k + "'");
    try {
      it->second(v);
    } catch (const json::exception& e) {
      throw ConfigError("bad value for '" + section + "." + k + "': " + e.what());
    }
  }
}

}  // namespace

EnvConfig env_config_from_json(const json& j) {
  EnvConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw ConfigError("environment config must be an object");
  for (const auto& [k, v] : j.items()) {
    if (k == "cartpole") {
      auto& p = c.cartpole;
      apply(v, k,
            {{"cart_mass", set(p.cart_mass)},
             {"pole_mass", set(p.pole_mass)},
             {"half_length", set(p.half_length)},
             {"gravity", set(p.gravity)},
             {"dt", set(p.dt)},
             {"action_bound", set(p.action_bound)},
             {"theta_max", set(p.theta_max)},
             {"init_half_width", set(p.init_half_width)},
             {"surrogate_degree", set(p.surrogate_degree)},
             {"target_velocity", set(p.target_velocity)},
             {"theta_weight", set(p.theta_weight)},
             {"omega_weight", set(p.omega_weight)},
             {"horizon_original", set(p.horizon_original)},
             {"horizon_modified", set(p.horizon_modified)}});
    } else if (k == "bicycle") {
      auto& p = c.bicycle;
      apply(v, k,
            {{"dt", set(p.dt)},
             {"accel_bound", set(p.accel_bound)},
             {"steer_bound", set(p.steer_bound)},
             {"initial_state", set(p.initial_state)},
             {"obstacle_x", set(p.obstacle_x)},
             {"obstacle_y_half_width", set(p.obstacle_y_half_width)},
             {"radius_original", set(p.radius_original)},
             {"radius_modified", set(p.radius_modified)},
             {"goal_x", set(p.goal_x)},
             {"penalty_weight", set(p.penalty_weight)},
             {"penalty_margin", set(p.penalty_margin)},
             {"horizon", set(p.horizon)}});
    } else {
      throw ConfigError("unknown environment section '" + k + "'");
    }
  }
  if (c.cartpole.dt <= 0 || c.bicycle.dt <= 0) throw ConfigError("dt must be positive");
  if (c.cartpole.surrogate_degree < 1) throw ConfigError("surrogate_degree must be >= 1");
  if (c.cartpole.action_bound <= 0 || c.bicycle.accel_bound <= 0 || c.bicycle.steer_bound <= 0) {
    throw ConfigError("action bounds must be positive");
  }
  if (c.cartpole.theta_max <= 0) throw ConfigError("theta_max must be positive");
  return c;
}

json to_json(const EnvConfig& c) {
  const auto& p = c.cartpole;
  const auto& b = c.bicycle;
  return json{{"cartpole",
               {{"cart_mass", p.cart_mass},
                {"pole_mass", p.pole_mass},
                {"half_length", p.half_length},
                {"gravity", p.gravity},
                {"dt", p.dt},
                {"action_bound", p.action_bound},
                {"theta_max", p.theta_max},
                {"init_half_width", p.init_half_width},
                {"surrogate_degree", p.surrogate_degree},
                {"target_velocity", p.target_velocity},
                {"theta_weight", p.theta_weight},
                {"omega_weight", p.omega_weight},
                {"horizon_original", p.horizon_original},
                {"horizon_modified", p.horizon_modified}}},
              {"bicycle",
               {{"dt", b.dt},
                {"accel_bound", b.accel_bound},
                {"steer_bound", b.steer_bound},
                {"initial_state", b.initial_state},
                {"obstacle_x", b.obstacle_x},
                {"obstacle_y_half_width", b.obstacle_y_half_width},
                {"radius_original", b.radius_original},
                {"radius_modified", b.radius_modified},
                {"goal_x", b.goal_x},
                {"penalty_weight", b.penalty_weight},
                {"penalty_margin", b.penalty_margin},
                {"horizon", b.horizon}}}};
}

Variant parse_variant(const std::string& s) {
  if (s == "original") return Variant::kOriginal;
  if (s == "modified") return Variant::kModified;
  throw ConfigError("unknown variant '" + s + "' (expected original or modified)");
}

std::string variant_name(Variant v) { return v == Variant::kOriginal ? "original" : "modified"; }

std::shared_ptr<const Environment> make_environment(const std::string& name, Variant variant,
                                                    const EnvConfig& cfg,
                                                    std::uint64_t scenario_seed) {
  if (name == "cartpole") return std::make_shared<CartPole>(cfg.cartpole, variant);
  if (name == "bicycle") return std::make_shared<Bicycle>(cfg.bicycle, variant, scenario_seed);
  throw ConfigError("unknown environment '" + name + "' (expected cartpole or bicycle)");
}

}  // namespace oshield::dyn
