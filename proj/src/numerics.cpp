#include "brox/numerics.hpp"

#include <algorithm>

namespace brox {

double expm1_ratio(double z) {
  if (std::abs(z) < 1e-8) return 1.0 + 0.5 * z;
  return std::expm1(z) / z;
}

double log_expm1_ratio(double z) {
  if (std::abs(z) < 1e-8) return 0.5 * z;
  if (z > 0.0) {
    // log((e^z - 1)/z) = z + log(1 - e^{-z}) - log z
    return z + std::log(-std::expm1(-z)) - std::log(z);
  }
  // z < 0: (1 - e^{z}) / (-z), both factors are bounded.
  return std::log(-std::expm1(z)) - std::log(-z);
}

double exit_kernel(double z) {
  const double a = std::abs(z);
  if (a < 1e-2) {
    // 1/2 - z/6 + z^2/24 - z^3/120 + z^4/720
    return 0.5 + z * (-1.0 / 6.0 + z * (1.0 / 24.0 + z * (-1.0 / 120.0 + z / 720.0)));
  }
  return (z + std::expm1(-z)) / (z * z);
}

double log_exit_kernel(double z) {
  if (z > -30.0) return std::log(exit_kernel(z));
  // e^{-z} dominates: log(e^{-z} (1 + (z - 1) e^{z})) - 2 log|z|
  return -z + std::log1p((z - 1.0) * std::exp(z)) - 2.0 * std::log(-z);
}

double log_sum_exp(double a, double b) {
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  if (a == ninf) return b;
  if (b == ninf) return a;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

void LogSum::add(double log_term) { log_value_ = log_sum_exp(log_value_, log_term); }

}  // namespace brox
