#pragma once

// Brox's diffusion X = S^{-1}(B(T^{-1}(t))) on a grid potential, with
// local-time estimators built on the stored clock.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "brox/environment.hpp"
#include "brox/errors.hpp"
#include "brox/random.hpp"

namespace brox {

/// Scale function S(x) = int_0^x exp(V) with V = alpha * W - offset, exact on
/// every linear piece. Keeps its own copy of the potential.
class ScaleMap {
 public:
  ScaleMap(const EnvironmentPath& env, double alpha, double offset = 0.0);

  double alpha() const { return alpha_; }
  double offset() const { return offset_; }
  double step() const { return step_; }
  double left() const { return position(0); }
  double right() const { return position(v_.size() - 1); }
  /// S(left), S(right). May be infinite when the direct form overflows.
  double lower() const { return s_.front(); }
  double upper() const { return s_.back(); }
  bool is_identity() const { return identity_; }

  /// V(x) = alpha * W(x) - offset, linear between knots.
  double potential(double x) const;
  double operator()(double x) const;
  /// log|S(x)|, finite wherever S(x) != 0 even if S(x) overflows.
  double log_abs(double x) const;
  /// S^{-1}(v). Exact on breakpoints; throws RangeExceeded outside [lower, upper].
  double invert(double v) const;

  std::span<const double> breakpoints() const { return s_; }
  std::span<const double> log_breakpoints() const { return log_s_; }

 private:
  double position(std::size_t i) const {
    return static_cast<double>(first_ + static_cast<std::int64_t>(i)) * step_;
  }
  std::size_t segment(double x) const;

  double alpha_;
  double offset_;
  double step_;
  std::int64_t first_;
  std::size_t origin_;
  bool identity_;
  std::vector<double> v_;
  std::vector<double> s_;
  std::vector<double> log_s_;
};

ScaleMap build_scale_map(const EnvironmentPath& env, double alpha, double offset = 0.0);
double invert_scale(const ScaleMap& map, double v);

struct DrivingPath {
  double dt;
  std::vector<double> values;  // B(k dt), values[0] = 0
};

struct SimulationOptions {
  std::uint64_t max_steps = 50'000'000;
  /// Potential shift applied before exponentiation (e.g. alpha * W(m)).
  double offset = 0.0;
  /// Source of new environment increments when B leaves the range of S.
  /// Without one, RangeExceeded propagates.
  Rng* env_rng = nullptr;
  double widen_factor = 2.0;
  int max_widenings = 8;
};

struct DiffusionPath {
  double dt;
  double alpha;
  double offset;
  DrivingPath driving;
  std::vector<double> clock;       // T(k dt), clock[0] = 0
  std::vector<double> increments;  // clock[k+1] - clock[k]
  std::vector<double> positions;   // X(clock[k]) = S^{-1}(B(k dt))
  EnvironmentPath environment;     // as widened during the run

  double total_time() const { return clock.back(); }
  std::size_t steps() const { return increments.size(); }
};

/// Runs B until the clock reaches t_target. Clock increments use the potential
/// at S^{-1} of the midpoint of each driving step.
DiffusionPath simulate_path(const EnvironmentPath& env, double alpha, Rng& rng, double dt,
                            double t_target, const SimulationOptions& options = {});

/// Rebuilds a path from a frozen driving sequence (no widening).
DiffusionPath path_from_driving(const EnvironmentPath& env, double alpha, DrivingPath driving,
                                double offset = 0.0);

/// T^{-1}(t): driving time at which the clock first reaches t, interpolated
/// linearly inside the step.
double inverse_clock(const DiffusionPath& path, double t);
/// T(s) for driving time s, linear inside a step.
double clock_at(const DiffusionPath& path, double s);

struct LocalTimeProfile {
  double t;
  double bin_width;
  std::vector<double> centers;
  std::vector<double> values;
};

/// Aligned bin index: bin j covers [(j - 1/2) w, (j + 1/2) w).
std::int64_t occupation_bin(double x, double bin_width);

/// Histogram estimator. Steps count in full when they end by t; the step
/// straddling t contributes t - clock[k].
LocalTimeProfile local_time_occupation(const DiffusionPath& path, double bin_width, double t);

/// exp(-V(x)) times the band-occupation estimate of L_B at S(x) up to T^{-1}(t).
double local_time_transfer(const DiffusionPath& path, const ScaleMap& map, double x, double t,
                           double eps);

/// First clock time at which the path reaches x; nullopt stands for +inf.
std::optional<double> hitting_time(const DiffusionPath& path, double x);

/// First clock time at which the occupation estimate of the bin containing x
/// reaches r; nullopt stands for +inf.
std::optional<double> inverse_local_time(const DiffusionPath& path, double r, double x,
                                         double bin_width);

struct FavoritePoint {
  double x;
  double value;
};

FavoritePoint favorite_point(const LocalTimeProfile& profile);

/// Moves quantities of the diffusion in alpha * W^alpha back to the one in
/// alpha * W: t -> alpha^4 t, x -> alpha^2 x, L -> alpha^2 L.
struct FrameMap {
  double alpha;
  double time(double t) const { return alpha * alpha * alpha * alpha * t; }
  double space(double x) const { return alpha * alpha * x; }
  double local_time(double l) const { return alpha * alpha * l; }
  double scaled_time(double t) const { return t / (alpha * alpha * alpha * alpha); }
  double scaled_space(double x) const { return x / (alpha * alpha); }
  double scaled_local_time(double l) const { return l / (alpha * alpha); }
};

struct ScaledEnvironment {
  EnvironmentPath environment;  // W^alpha(x) = W(alpha^2 x) / alpha on step / alpha^2
  FrameMap frame;
};

ScaledEnvironment rescale_to_unit_valley(const EnvironmentPath& env, double alpha);

void write_path_csv(std::ostream& out, const DiffusionPath& path);
void write_profile_csv(std::ostream& out, const LocalTimeProfile& profile);

}  // namespace brox
