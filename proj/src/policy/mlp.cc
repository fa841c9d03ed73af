#include "oshield/policy/mlp.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "oshield/errors.h"
#include "oshield/simd/kernels.h"

namespace oshield::policy {

MlpPolicy::MlpPolicy(int input_dim, int hidden, Vec low, Vec high)
    : n_in_(input_dim), hidden_(hidden), n_out_(static_cast<int>(low.size())),
      low_(std::move(low)), high_(std::move(high)) {
  if (n_in_ <= 0 || hidden_ <= 0 || n_out_ <= 0) throw InputError("policy dimensions must be positive");
  if (high_.size() != n_out_) throw InputError("action bounds differ in length");
  for (int i = 0; i < n_out_; ++i) {
    if (!(low_(i) <= high_(i))) throw InputError("action bounds are inverted");
  }
  params_.assign(b2_offset() + n_out_, 0.0);
}

MlpPolicy MlpPolicy::initialized(int input_dim, int hidden, Vec low, Vec high, std::mt19937_64& rng,
                                 double output_scale) {
  MlpPolicy p(input_dim, hidden, std::move(low), std::move(high));
  std::normal_distribution<double> w1(0.0, std::sqrt(2.0 / input_dim));
  std::normal_distribution<double> w2(0.0, output_scale / std::sqrt(static_cast<double>(hidden)));
  for (std::size_t i = p.w1_offset(); i < p.b1_offset(); ++i) p.params_[i] = w1(rng);
  for (std::size_t i = p.w2_offset(); i < p.b2_offset(); ++i) p.params_[i] = w2(rng);
  return p;
}

MlpPolicy MlpPolicy::for_env(const dyn::Environment& env, int hidden, std::mt19937_64& rng,
                             double output_scale) {
  return initialized(env.policy_input_dim(), hidden, env.action_low(), env.action_high(), rng,
                     output_scale);
}

bool MlpPolicy::finite() const {
  for (double v : params_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void MlpPolicy::check_input(const Vec& in) const {
  if (in.size() != n_in_) {
    throw InputError("policy input has length " + std::to_string(in.size()) + ", expected " +
                     std::to_string(n_in_));
  }
}

Vec MlpPolicy::raw(const Vec& in) const {
  Tape t;
  forward(in, t);
  return t.raw;
}

Vec MlpPolicy::forward(const Vec& in) const {
  Tape t;
  return forward(in, t);
}

Vec MlpPolicy::forward(const Vec& in, Tape& t) const {
  check_input(in);
  const simd::KernelTable& k = simd::active();
  t.in = in;
  t.pre.resize(hidden_);
  t.hid.resize(hidden_);
  k.gemv(params_.data() + w1_offset(), in.data(), params_.data() + b1_offset(), t.pre.data(), hidden_,
         n_in_);
  k.relu(t.pre.data(), t.hid.data(), hidden_);
  t.raw.resize(n_out_);
  k.gemv(params_.data() + w2_offset(), t.hid.data(), params_.data() + b2_offset(), t.raw.data(), n_out_,
         hidden_);
  t.out = t.raw.cwiseMax(low_).cwiseMin(high_);
  return t.out;
}

Vec MlpPolicy::backward(const Tape& t, const Vec& g_out, std::span<double> grad) const {
  if (g_out.size() != n_out_ || grad.size() != params_.size()) throw InputError("gradient size mismatch");
  const simd::KernelTable& k = simd::active();
  std::vector<double> g_hid(hidden_, 0.0);
  for (int r = 0; r < n_out_; ++r) {
    if (!(t.raw(r) > low_(r) && t.raw(r) < high_(r))) continue;
    const double g = g_out(r);
    if (g == 0.0) continue;
    const std::size_t row = w2_offset() + static_cast<std::size_t>(r) * hidden_;
    k.axpy(g, t.hid.data(), grad.data() + row, hidden_);
    grad[b2_offset() + r] += g;
    k.axpy(g, params_.data() + row, g_hid.data(), hidden_);
  }
  k.relu_backward(t.pre.data(), g_hid.data(), hidden_);
  Vec g_in = Vec::Zero(n_in_);
  for (int i = 0; i < hidden_; ++i) {
    const double g = g_hid[i];
    if (g == 0.0) continue;
    const std::size_t row = w1_offset() + static_cast<std::size_t>(i) * n_in_;
    k.axpy(g, t.in.data(), grad.data() + row, n_in_);
    grad[b1_offset() + i] += g;
    k.axpy(g, params_.data() + row, g_in.data(), n_in_);
  }
  return g_in;
}

bool MlpPolicy::operator==(const MlpPolicy& o) const {
  return n_in_ == o.n_in_ && hidden_ == o.hidden_ && n_out_ == o.n_out_ && low_ == o.low_ &&
         high_ == o.high_ && params_ == o.params_;
}

namespace {

void write_row(std::ostream& os, const double* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) os << (i ? " " : "") << v[i];
  os << '\n';
}

std::vector<double> read_numbers(std::istream& is, std::size_t n, const char* what) {
  std::vector<double> out(n);
  for (double& v : out) {
    if (!(is >> v)) throw ConfigError(std::string("policy checkpoint: truncated ") + what);
    if (!std::isfinite(v)) throw ConfigError(std::string("policy checkpoint: non-finite ") + what);
  }
  return out;
}

}  // namespace

void write_policy(std::ostream& os, const MlpPolicy& p) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "oshield-mlp 1\n" << p.input_dim() << ' ' << p.hidden_dim() << ' ' << p.output_dim() << '\n';
  os << "low ";
  write_row(os, p.low().data(), p.output_dim());
  os << "high ";
  write_row(os, p.high().data(), p.output_dim());
  const double* d = p.params().data();
  for (int i = 0; i < p.hidden_dim(); ++i) write_row(os, d + p.w1_offset() + i * p.input_dim(), p.input_dim());
  write_row(os, d + p.b1_offset(), p.hidden_dim());
  for (int r = 0; r < p.output_dim(); ++r) write_row(os, d + p.w2_offset() + r * p.hidden_dim(), p.hidden_dim());
  write_row(os, d + p.b2_offset(), p.output_dim());
}

MlpPolicy read_policy(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "oshield-mlp") throw ConfigError("not a policy checkpoint");
  if (version != 1) throw ConfigError("unsupported policy checkpoint version");
  int n_in = 0, hidden = 0, n_out = 0;
  if (!(is >> n_in >> hidden >> n_out) || n_in <= 0 || hidden <= 0 || n_out <= 0) {
    throw ConfigError("policy checkpoint: bad dimensions");
  }
  std::string tag;
  if (!(is >> tag) || tag != "low") throw ConfigError("policy checkpoint: expected 'low'");
  const auto low = read_numbers(is, n_out, "low");
  if (!(is >> tag) || tag != "high") throw ConfigError("policy checkpoint: expected 'high'");
  const auto high = read_numbers(is, n_out, "high");
  MlpPolicy p(n_in, hidden, Eigen::Map<const Vec>(low.data(), n_out),
              Eigen::Map<const Vec>(high.data(), n_out));
  const auto values = read_numbers(is, p.num_params(), "parameters");
  std::copy(values.begin(), values.end(), p.params().begin());
  if (is >> tag) throw ConfigError("policy checkpoint: trailing data");
  return p;
}

void save_policy(const std::string& path, const MlpPolicy& p) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  write_policy(f, p);
  if (!f) throw IoError("write failed for " + path);
}

MlpPolicy load_policy(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  return read_policy(f);
}

}  // namespace oshield::policy
