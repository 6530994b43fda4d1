#pragma once

// Samplers for the limit objects: the two-sided 3-d Bessel path R, the
// functional int e^{-R}, the density e^{-R}/int e^{-R}, and 4 tau + 4 tau'
// with tau the time a squared 2-d Bessel process needs to reach 1.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "brox/errors.hpp"
#include "brox/random.hpp"

namespace brox {

/// How far each side is simulated and where the remaining tail stops.
///
/// A side is stored up to the first grid time T with R(T) >= level. Past T the
/// path is BES(3) from R(T): its minimum-to-come J is uniform on (0, R(T)), and
/// the integral of e^{-R} after T equals e^{-J} times the sum of two independent
/// copies of the full one-sided integral. Those copies are sampled the same way
/// (unstored) until the accumulated J exceeds `cutoff`; each branch dropped
/// there is worth at most e^{-cutoff} * allowance.
struct HorizonRule {
  double level = 15.0;
  double cutoff = 15.0;
  double allowance = 40.0;
  std::uint64_t max_steps = 200'000'000;
  std::uint64_t max_nodes = 1'000'000;
};

struct BesselPath {
  double dt;
  std::vector<double> values;  // R(k dt) on the stored window, R(0) = 0
  double tail;                 // sampled mass of e^{-R} beyond the window
  std::uint64_t dropped;       // tail branches cut at the cutoff
  double truncation_bound;     // dropped * e^{-cutoff} * allowance
  double minimum_time;         // time of the minimum-to-come after the window

  double horizon() const { return dt * static_cast<double>(values.size() - 1); }
  /// R(s) by linear interpolation on the window; throws DomainError past it.
  double at(double s) const;
  /// Trapezoidal integral of e^{-R} over the window.
  double window_integral() const;
};

/// |3-d Gaussian walk| with step variance dt per coordinate, plus its tail.
BesselPath sample_bessel3(double dt, const HorizonRule& rule, Rng& rng);

struct TwoSidedBessel {
  BesselPath right;  // R(x), x >= 0
  BesselPath left;   // R(-x), x < 0
  double operator()(double x) const { return x >= 0.0 ? right.at(x) : left.at(-x); }
};

/// Right side first, then left, both from `rng`.
TwoSidedBessel sample_two_sided_bessel(double dt, const HorizonRule& rule, Rng& rng);

struct FunctionalSample {
  double value;             // int e^{-R}
  double window_value;      // part of `value` on the stored windows
  double truncation_bound;  // upper bound on the omitted mass
};

FunctionalSample functional_sample(const TwoSidedBessel& r);

/// e^{-R(x)} / int e^{-R}. Every x must lie in the stored window.
std::vector<double> profile_sample(const TwoSidedBessel& r, std::span<const double> xs);

/// Draws positions from the density e^{-R}/int e^{-R}. Mass beyond a window
/// is placed at that side's minimum_time.
class ProfileSampler {
 public:
  explicit ProfileSampler(const TwoSidedBessel& r);
  double draw(Rng& rng) const;
  double total() const { return total_; }

 private:
  double invert(const BesselPath& side, const std::vector<double>& cum, double target) const;

  const TwoSidedBessel* r_;
  std::vector<double> cum_right_;
  std::vector<double> cum_left_;
  double total_;
};

/// First time |2-d Gaussian walk|^2 reaches 1, the last step interpolated
/// linearly in |B|^2.
double besq2_hitting_time(double dt, Rng& rng, std::uint64_t max_steps = 1'000'000'000);

struct HittingPair {
  double coarse;
  double fine;
};

/// The same planar path observed at dt and at dt / refine.
HittingPair besq2_hitting_time_pair(double dt, int refine, Rng& rng,
                                    std::uint64_t max_steps = 1'000'000'000);

/// 4 tau + 4 tau' from two independent hitting times.
double rayknight_alias_sample(double dt, Rng& rng);

}  // namespace brox
