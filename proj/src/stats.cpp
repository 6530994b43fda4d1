#include "brox/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace brox {

SampleSet::SampleSet(std::vector<double> v, std::string note)
    : values(std::move(v)), meta(std::move(note)) {
  std::sort(values.begin(), values.end());
}

double ecdf(std::span<const double> sorted, double x) {
  if (sorted.empty()) throw std::invalid_argument("ecdf of an empty sample");
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
  return static_cast<double>(std::distance(sorted.begin(), it)) /
         static_cast<double>(sorted.size());
}

double kolmogorov_tail(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // Dual (Jacobi theta) form converges fast for small lambda.
    const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double s = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double j = 2.0 * k - 1.0;
      s += std::exp(-j * j * c);
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? 1.0 : -1.0) * term;
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

double kolmogorov_critical(double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0, 1)");
  double lo = 0.1;
  double hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (kolmogorov_tail(mid) > level ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("KS test on an empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  KsResult r{"ks_two_sample", d, x.size(), y.size(), 1.0};
  r.p_bound = kolmogorov_tail(std::sqrt(n * m / (n + m)) * d);
  return r;
}

KsResult ks_one_sample(std::span<const double> a, const std::function<double(double)>& cdf) {
  if (a.empty()) throw std::invalid_argument("KS test on an empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    const double k = static_cast<double>(i + 1);
    d = std::max({d, k / n - f, f - (k - 1.0) / n});
  }
  KsResult r{"ks_one_sample", d, x.size(), 0, 1.0};
  r.p_bound = kolmogorov_tail(std::sqrt(n) * d);
  return r;
}

double mean(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  if (v.size() < 2) throw std::invalid_argument("stddev needs two values");
  const double mu = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double median(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty sample");
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  const std::size_t h = s.size() / 2;
  return s.size() % 2 == 1 ? s[h] : 0.5 * (s[h - 1] + s[h]);
}

std::pair<double, double> bootstrap_mean_ci(std::span<const double> sample, double level,
                                            std::size_t resamples, Rng& rng) {
  if (sample.size() < 10) throw std::invalid_argument("bootstrap needs at least 10 values");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0, 1)");
  if (resamples < 2) throw std::invalid_argument("bootstrap needs at least 2 resamples");
  std::uniform_int_distribution<std::size_t> pick(0, sample.size() - 1);
  std::vector<double> means(resamples);
  for (double& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) s += sample[pick(rng)];
    m = s / static_cast<double>(sample.size());
  }
  std::sort(means.begin(), means.end());
  const double tail = 0.5 * (1.0 - level);
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(resamples - 1);
    const auto k = static_cast<std::size_t>(std::floor(pos));
    const std::size_t k1 = std::min(k + 1, resamples - 1);
    return means[k] + (pos - static_cast<double>(k)) * (means[k1] - means[k]);
  };
  return {quantile(tail), quantile(1.0 - tail)};
}

TrendResult trend_check(std::span<const double> v, const TrendOptions& options) {
  if (v.size() < 3) throw std::invalid_argument("trend_check needs at least 3 points");
  std::ostringstream why;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (!(v[k] <= options.slack * v[k - 1])) {
      why << "value " << v[k] << " at step " << k << " exceeds " << options.slack << " x "
          << v[k - 1];
      return {false, why.str()};
    }
  }
  if (!(v.back() < options.threshold)) {
    why << "final value " << v.back() << " not below " << options.threshold;
    return {false, why.str()};
  }
  return {true, "ok"};
}

}  // namespace brox
