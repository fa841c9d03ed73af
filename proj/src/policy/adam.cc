#include "oshield/policy/adam.h"

#include <cmath>

#include "oshield/errors.h"

namespace oshield::policy {

Adam::Adam(std::size_t n, AdamOptions opts) : opts_(opts), m_(n, 0.0), v_(n, 0.0) {
  if (!(opts_.lr > 0.0) || !(opts_.beta1 >= 0.0 && opts_.beta1 < 1.0) ||
      !(opts_.beta2 >= 0.0 && opts_.beta2 < 1.0) || !(opts_.eps > 0.0)) {
    throw ConfigError("invalid ADAM hyperparameters");
  }
}

void Adam::ascend(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw InputError("ADAM size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(opts_.beta1, t_);
  const double c2 = 1.0 - std::pow(opts_.beta2, t_);
  for (std::size_t i = 0; i < m_.size(); ++i) {
    m_[i] = opts_.beta1 * m_[i] + (1.0 - opts_.beta1) * grad[i];
    v_[i] = opts_.beta2 * v_[i] + (1.0 - opts_.beta2) * grad[i] * grad[i];
    params[i] += opts_.lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + opts_.eps);
  }
}

}  // namespace oshield::policy
