#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace oshield::policy {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Gradient ascent: params += lr * m_hat / (sqrt(v_hat) + eps).
class Adam {
 public:
  Adam(std::size_t n, AdamOptions opts = {});
  void ascend(std::span<double> params, std::span<const double> grad);
  int steps() const { return t_; }

 private:
  AdamOptions opts_;
  std::vector<double> m_;
  std::vector<double> v_;
  int t_ = 0;
};

}  // namespace oshield::policy
