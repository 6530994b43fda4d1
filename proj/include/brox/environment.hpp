#pragma once

// Two-sided Brownian potentials on a uniform grid and their valley structure.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "brox/errors.hpp"
#include "brox/random.hpp"

namespace brox {

/// The window does not yet contain the standard valley; widen and retry.
class ValleyNotContained : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Side { left, right };

class ThresholdNotReached : public std::runtime_error {
 public:
  ThresholdNotReached(Side side, const std::string& what)
      : std::runtime_error(what), side_(side) {}
  Side side() const { return side_; }

 private:
  Side side_;
};

/// Piecewise-linear potential W with knots at integer multiples of `step`.
/// Knot k of the storage sits at x = (first_knot + k) * step and W(0) = 0.
class EnvironmentPath {
 public:
  EnvironmentPath(double step, std::int64_t first_knot, std::vector<double> values);

  double step() const { return step_; }
  std::int64_t first_knot() const { return first_; }
  std::int64_t last_knot() const { return first_ + static_cast<std::int64_t>(values_.size()) - 1; }
  double left() const { return static_cast<double>(first_) * step_; }
  double right() const { return static_cast<double>(last_knot()) * step_; }
  std::size_t size() const { return values_.size(); }
  std::size_t origin() const { return static_cast<std::size_t>(-first_); }

  double position(std::size_t i) const {
    return static_cast<double>(first_ + static_cast<std::int64_t>(i)) * step_;
  }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

  bool contains(double x) const;
  /// Linear interpolation between knots. Throws DomainError outside [left, right].
  double operator()(double x) const;
  /// Index of the knot at grid-aligned `x`. Throws DomainError when `x` is
  /// off-grid or outside the domain.
  std::size_t knot_index(double x) const;

 private:
  double step_;
  std::int64_t first_;
  std::vector<double> values_;
};

/// Grows both ends of the domain by `factor` (an empty side gets the width of
/// the other), drawing the new increments from `rng`.
EnvironmentPath widen_environment(const EnvironmentPath& env, double factor, Rng& rng);

/// Integer grid coordinate of `x`; throws DomainError unless `x` is a
/// multiple of `step` up to rounding.
std::int64_t grid_coordinate(double x, double step);

EnvironmentPath sample_environment(double step, double left, double right, Rng& rng);

/// Widens the domain. Existing knots are copied bit-exactly; new increments are
/// drawn outward from the old left end first, then from the old right end.
EnvironmentPath extend_environment(const EnvironmentPath& env, double new_left, double new_right,
                                   Rng& rng);

/// W_c(x) = W(c + x) - W(c) for a knot c of the base path. Non-owning: the base
/// path must outlive the view.
class ShiftedPotential {
 public:
  ShiftedPotential(const EnvironmentPath& base, std::size_t center_index);

  const EnvironmentPath& base() const { return *base_; }
  std::size_t center_index() const { return center_; }
  double center() const { return base_->position(center_); }
  /// Domain in shifted coordinates.
  double left() const { return base_->left() - center(); }
  double right() const { return base_->right() - center(); }

  double operator()(double x) const;
  /// Value at the knot `offset` grid steps from the center.
  double at_offset(std::int64_t offset) const;

 private:
  const EnvironmentPath* base_;
  std::size_t center_;
};

/// W^#(x, y): the largest rise of W, measured from its running minimum,
/// met on the way from x to y.
double barrier(const EnvironmentPath& env, double x, double y);
double barrier_between_knots(const EnvironmentPath& env, std::size_t from, std::size_t to);

enum class ExtremumKind { minimum, maximum };

struct Extremum {
  std::size_t index;
  double position;
  ExtremumKind kind;
};

/// h-extrema of the window, position-sorted with alternating kinds. Witnesses
/// must be knots of the window, so the domain ends are never extrema. Several
/// knots of one flat extreme collapse to the leftmost.
std::vector<Extremum> find_h_extrema(const EnvironmentPath& env, double h);

struct Valley {
  double p;
  double m;
  double q;
  std::size_t p_index;
  std::size_t m_index;
  std::size_t q_index;
  double h;
  double depth;   // (W(p) - W(m)) min (W(q) - W(m))
  double ascent;  // W^#(p, m) max W^#(q, m)
  /// More than one extrema triple qualified (only possible when 0 is itself
  /// an h-maximum knot); the one whose bottom is closest to 0 was kept.
  bool ambiguous = false;
};

/// Throws ValleyNotContained when no qualifying triple lies in the window.
Valley standard_valley(const EnvironmentPath& env, double h);

struct WideningPolicy {
  double factor = 2.0;
  int max_widenings = 12;
};

struct ValleySearch {
  EnvironmentPath environment;
  Valley valley;
  int widenings = 0;
};

/// standard_valley with lazy geometric widening of the window. Throws
/// ValleyNotContained once the cap is exceeded.
ValleySearch find_standard_valley(EnvironmentPath env, double h, Rng& rng,
                                  const WideningPolicy& policy = {});

struct CrossingPair {
  double a;
  double b;
  double theta;
};

/// a = sup{x <= 0 : W_c(x) >= theta}, b = inf{x >= 0 : W_c(x) >= theta}, the
/// exact crossing abscissae of the interpolant.
CrossingPair crossing_points(const ShiftedPotential& shifted, double theta);

struct GibbsIntegral {
  double log_value;
  /// Plain summation of the segment integrals; may overflow to +inf.
  double direct;
  /// exp(log_value) when representable.
  std::optional<double> value() const;
};

/// Integral over [a, b] (shifted coordinates) of exp(-alpha * W_c(y)), exact
/// on every linear piece and reduced in log-sum-exp form.
GibbsIntegral gibbs_weight_integral(const ShiftedPotential& shifted, double alpha, double a,
                                    double b);

/// Normalised environment density exp(-W_c(x)) / int_{a}^{b} exp(-W_c), with
/// (a, b) the crossings of level alpha * r.
std::vector<double> environment_profile(const ShiftedPotential& shifted, double alpha, double r,
                                        std::span<const double> xs);

/// Relative mass of exp(-alpha W_c) lost when [a_r, b_r] shrinks to [a, b].
double laplace_equivalence_check(const ShiftedPotential& shifted, double alpha, double a, double b,
                                 double r);

struct EnvironmentSpec {
  std::uint64_t seed;
  std::uint64_t stream;
  double step;
  double left;
  double right;
};

void write_environment_csv(std::ostream& out, const EnvironmentPath& env);
std::string to_json_string(const EnvironmentSpec& spec);
EnvironmentPath sample_environment(const EnvironmentSpec& spec);

}  // namespace brox
