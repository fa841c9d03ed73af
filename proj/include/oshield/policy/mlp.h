#pragma once

#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "oshield/dynamics/environment.h"

namespace oshield::policy {

using dyn::Mat;
using dyn::Vec;

// u = clamp(W2 relu(W1 in + b1) + b2, low, high).
// Parameters live in one flat buffer: W1 (hidden x in, row-major), b1,
// W2 (out x hidden, row-major), b2.
class MlpPolicy {
 public:
  MlpPolicy() = default;
  // All parameters zero.
  MlpPolicy(int input_dim, int hidden, Vec low, Vec high);

  static MlpPolicy initialized(int input_dim, int hidden, Vec low, Vec high, std::mt19937_64& rng,
                               double output_scale = 0.1);
  static MlpPolicy for_env(const dyn::Environment& env, int hidden, std::mt19937_64& rng,
                           double output_scale = 0.1);

  int input_dim() const { return n_in_; }
  int hidden_dim() const { return hidden_; }
  int output_dim() const { return n_out_; }
  const Vec& low() const { return low_; }
  const Vec& high() const { return high_; }

  std::size_t num_params() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t w1_offset() const { return 0; }
  std::size_t b1_offset() const { return static_cast<std::size_t>(hidden_) * n_in_; }
  std::size_t w2_offset() const { return b1_offset() + hidden_; }
  std::size_t b2_offset() const { return w2_offset() + static_cast<std::size_t>(n_out_) * hidden_; }

  bool finite() const;

  struct Tape {
    Vec in;
    std::vector<double> pre;  // W1 in + b1
    std::vector<double> hid;  // relu(pre)
    Vec raw;
    Vec out;
  };

  Vec raw(const Vec& in) const;
  Vec forward(const Vec& in) const;
  Vec forward(const Vec& in, Tape& tape) const;
  Vec act(const dyn::Environment& env, const Vec& x) const { return forward(env.policy_input(x)); }

  // g_out is dL/d(clamped output). Accumulates dL/dparams into grad and
  // returns dL/d(in). Saturated outputs pass no gradient.
  Vec backward(const Tape& tape, const Vec& g_out, std::span<double> grad) const;

  bool operator==(const MlpPolicy& o) const;

 private:
  void check_input(const Vec& in) const;

  int n_in_ = 0;
  int hidden_ = 0;
  int n_out_ = 0;
  Vec low_;
  Vec high_;
  std::vector<double> params_;
};

// Text checkpoint:
//   oshield-mlp 1
//   <input_dim> <hidden> <output_dim>
//   low <output_dim values>
//   high <output_dim values>
//   W1 rows, b1, W2 rows, b2, one matrix row or vector per line
void write_policy(std::ostream& os, const MlpPolicy& p);
MlpPolicy read_policy(std::istream& is);
void save_policy(const std::string& path, const MlpPolicy& p);
MlpPolicy load_policy(const std::string& path);

}  // namespace oshield::policy
