#pragma once

#include <cmath>
#include <limits>

namespace brox {

/// (e^z - 1) / z, equal to 1 at z = 0. The mean of e^{z u} over u in [0, 1].
double expm1_ratio(double z);

/// log((e^z - 1) / z) without overflow for large |z|.
double log_expm1_ratio(double z);

/// (z - 1 + e^{-z}) / z^2, equal to 1/2 at z = 0.
///
/// With a potential rising linearly by z across a cell of unit width,
/// this is the integral over the cell of (s(y) - s(left)) e^{-V(y)} dy
/// in scale-function coordinates. The mirror integral is exit_kernel(-z).
double exit_kernel(double z);

/// log(exit_kernel(z)), finite for very negative z where e^{-z} overflows.
double log_exit_kernel(double z);

/// Running log-sum-exp accumulator. Empty sums have log value -inf.
class LogSum {
 public:
  void add(double log_term);
  double log_value() const { return log_value_; }
  bool empty() const { return log_value_ == -std::numeric_limits<double>::infinity(); }

 private:
  double log_value_ = -std::numeric_limits<double>::infinity();
};

double log_sum_exp(double a, double b);

}  // namespace brox
