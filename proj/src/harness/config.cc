#include "oshield/harness/config.h"

#include <fstream>
#include <functional>
#include <map>

#include "oshield/errors.h"

namespace oshield::harness {
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

std::map<std::string, Setter> train_keys(policy::TrainConfig& t) {
  return {{"horizon", set(t.horizon)},
          {"gamma", set(t.gamma)},
          {"iterations", set(t.iterations)},
          {"batch", set(t.batch)},
          {"lr", set(t.adam.lr)},
          {"beta1", set(t.adam.beta1)},
          {"beta2", set(t.adam.beta2)},
          {"adam_eps", set(t.adam.eps)},
          {"clip_norm", set(t.clip_norm)},
          {"hidden", set(t.hidden)},
          {"init_output_scale", set(t.init_output_scale)},
          {"seed", set(t.seed)},
          {"use_surrogate", set(t.use_surrogate)},
          {"threads", set(t.threads)}};
}

json train_json(const policy::TrainConfig& t) {
  return {{"horizon", t.horizon},
          {"gamma", t.gamma},
          {"iterations", t.iterations},
          {"batch", t.batch},
          {"lr", t.adam.lr},
          {"beta1", t.adam.beta1},
          {"beta2", t.adam.beta2},
          {"adam_eps", t.adam.eps},
          {"clip_norm", t.clip_norm},
          {"hidden", t.hidden},
          {"init_output_scale", t.init_output_scale},
          {"seed", t.seed},
          {"use_surrogate", t.use_surrogate},
          {"threads", t.threads}};
}

}  // namespace

RecoverySettings::RecoverySettings() {
  train.horizon = 100;
  train.iterations = 2000;
  train.seed = 2;
}

RunConfig::RunConfig() { train.iterations = 2000; }

certify::CacheOptions RunConfig::cache_options() const {
  certify::CacheOptions o;
  o.verify = verify;
  return o;
}

ExperimentSpec RunConfig::spec(const std::string& env_name, dyn::Variant variant, Mode mode, int T) const {
  ExperimentSpec s;
  s.env = env_name;
  s.variant = variant;
  s.env_config = env;
  s.mode = mode;
  s.T = T;
  s.rollouts = eval.rollouts;
  s.horizon = eval.horizon;
  s.seed = eval.seed;
  s.threads = eval.threads;
  s.world_surrogate = eval.world_surrogate;
  s.surrogate_checks = eval.surrogate_checks;
  s.timing = eval.timing;
  s.audit = eval.audit;
  if (eval.timeout_ms > 0.0) {
    s.timeout = std::chrono::nanoseconds(static_cast<std::int64_t>(eval.timeout_ms * 1e6));
  }
  return s;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (k == "env") {
      c.env = dyn::env_config_from_json(v);
    } else if (k == "train") {
      apply(v, k, train_keys(c.train));
    } else if (k == "recovery") {
      auto& r = c.recovery;
      std::string reward = policy::recovery_reward_name(r.reward);
      json train = json::object();
      apply(v, k,
            {{"train", [&train](const json& x) { train = x; }},
             {"t_prime", set(r.sampling.t_prime)},
             {"probe", set(r.sampling.probe)},
             {"samples", set(r.samples)},
             {"reward", set(reward)},
             {"select_every", set(r.select_every)},
             {"select_states", set(r.select_states)}});
      apply(train, "recovery.train", train_keys(r.train));
      r.reward = policy::parse_recovery_reward(reward);
    } else if (k == "verify") {
      auto& p = c.verify;
      apply(v, k,
            {{"multiplier_degree", set(p.multiplier_degree)},
             {"safety_multiplier_degree", set(p.safety_multiplier_degree)},
             {"bisection_tol", set(p.bisection_tol)},
             {"eps_start", set(p.eps_start)},
             {"action_rows", set(p.action_rows)}});
    } else if (k == "eval") {
      auto& e = c.eval;
      apply(v, k,
            {{"T", set(e.T)},
             {"rollouts", set(e.rollouts)},
             {"horizon", set(e.horizon)},
             {"seed", set(e.seed)},
             {"threads", set(e.threads)},
             {"world_surrogate", set(e.world_surrogate)},
             {"surrogate_checks", set(e.surrogate_checks)},
             {"timing", set(e.timing)},
             {"audit", set(e.audit)},
             {"timeout_ms", set(e.timeout_ms)}});
    } else if (k == "bench") {
      apply(v, k, {{"Ts", set(c.bench.Ts)}, {"probes", set(c.bench.probes)}, {"reps", set(c.bench.reps)}});
    } else {
      throw ConfigError("unknown config section '" + k + "'");
    }
  }
  c.train.validate();
  c.recovery.train.validate();
  if (c.recovery.samples < 1 || c.recovery.select_states < 1) throw ConfigError("recovery sample counts must be >= 1");
  if (c.eval.T < 0 || c.eval.rollouts < 1 || c.eval.horizon < 0) throw ConfigError("invalid eval settings");
  if (c.bench.Ts.empty() || c.bench.probes < 1 || c.bench.reps < 1) throw ConfigError("invalid bench settings");
  for (int t : c.bench.Ts) {
    if (t < 0) throw ConfigError("bench T values must be >= 0");
  }
  if (c.verify.multiplier_degree < 2 || c.verify.multiplier_degree % 2) {
    throw ConfigError("verify.multiplier_degree must be even and >= 2");
  }
  return c;
}

json to_json(const RunConfig& c) {
  const auto& r = c.recovery;
  const auto& e = c.eval;
  return {{"env", dyn::to_json(c.env)},
          {"train", train_json(c.train)},
          {"recovery",
           {{"train", train_json(r.train)},
            {"t_prime", r.sampling.t_prime},
            {"probe", r.sampling.probe},
            {"samples", r.samples},
            {"reward", policy::recovery_reward_name(r.reward)},
            {"select_every", r.select_every},
            {"select_states", r.select_states}}},
          {"verify",
           {{"multiplier_degree", c.verify.multiplier_degree},
            {"safety_multiplier_degree", c.verify.safety_multiplier_degree},
            {"bisection_tol", c.verify.bisection_tol},
            {"eps_start", c.verify.eps_start},
            {"action_rows", c.verify.action_rows}}},
          {"eval",
           {{"T", e.T},
            {"rollouts", e.rollouts},
            {"horizon", e.horizon},
            {"seed", e.seed},
            {"threads", e.threads},
            {"world_surrogate", e.world_surrogate},
            {"surrogate_checks", e.surrogate_checks},
            {"timing", e.timing},
            {"audit", e.audit},
            {"timeout_ms", e.timeout_ms}}},
          {"bench", {{"Ts", c.bench.Ts}, {"probes", c.bench.probes}, {"reps", c.bench.reps}}}};
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace oshield::harness
