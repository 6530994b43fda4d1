#pragma once

// Empirical distributions, Kolmogorov-Smirnov tests, bootstrap intervals and
// the finite-alpha trend rule used by the experiments.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "brox/random.hpp"

namespace brox {

/// Sorted sample with a free-form provenance note.
struct SampleSet {
  std::vector<double> values;
  std::string meta;

  SampleSet() = default;
  explicit SampleSet(std::vector<double> v, std::string note = {});
  std::size_t size() const { return values.size(); }
};

/// Fraction of the sample <= x. Throws on an empty sample.
double ecdf(std::span<const double> sorted, double x);

struct KsResult {
  std::string test;
  double D = 0.0;
  std::size_t n = 0;
  std::size_t m = 0;  // 0 for one-sample tests
  double p_bound = 1.0;
  /// Not rejected at the given level.
  bool passes(double level = 0.01) const { return p_bound > level; }
};

/// Asymptotic Kolmogorov tail P(K > lambda).
double kolmogorov_tail(double lambda);
/// lambda with kolmogorov_tail(lambda) = level.
double kolmogorov_critical(double level);

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);
KsResult ks_one_sample(std::span<const double> a, const std::function<double(double)>& cdf);

/// Percentile bootstrap interval for the mean. Needs at least 10 values.
std::pair<double, double> bootstrap_mean_ci(std::span<const double> sample, double level,
                                            std::size_t resamples, Rng& rng);

double mean(std::span<const double> v);
/// Sample standard deviation (n - 1).
double stddev(std::span<const double> v);
double median(std::span<const double> v);

struct TrendOptions {
  double slack = 1.1;
  double threshold = 0.15;
};

struct TrendResult {
  bool pass;
  std::string reason;
};

/// PASS iff each value is at most `slack` times the previous one and the last
/// is below the threshold. Needs at least 3 values.
TrendResult trend_check(std::span<const double> values_by_alpha, const TrendOptions& options = {});

}  // namespace brox
