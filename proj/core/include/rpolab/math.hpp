#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace rpolab {

// Logistic function via tanh: stable for all arguments, no overflow branch.
inline double sigmoid(double z) { return 0.5 * (1.0 + std::tanh(0.5 * z)); }

// ln sigmoid(z), computed as -softplus(-z) without cancellation.
inline double log_sigmoid(double z) {
  return (z < 0.0 ? z : 0.0) - std::log1p(std::exp(-std::fabs(z)));
}

// ln(1 + e^z), the two-sided stable form.
inline double softplus(double z) {
  return (z > 0.0 ? z : 0.0) + std::log1p(std::exp(-std::fabs(z)));
}

// Max-shifted log-sum-exp over the entries of `z` selected by `mask`
// (all entries when `mask` is null).  Fixed left-to-right accumulation.
inline double log_sum_exp(const std::vector<double>& z, const std::vector<bool>* mask = nullptr) {
  double m = -HUGE_VAL;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    if (z[i] > m) m = z[i];
  }
  if (m == -HUGE_VAL) return -HUGE_VAL;
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    s += std::exp(z[i] - m);
  }
  return m + std::log(s);
}

}  // namespace rpolab
