#pragma once

// The diffusion observed only at the knots of its potential: successive
// distinct knots visited form a birth-death chain whose transition
// probabilities follow from the scale function. Each visit is credited with
// the conditional mean holding time and local time, so a run costs one
// random draw per knot crossing instead of one per time step.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "brox/diffusion.hpp"
#include "brox/environment.hpp"
#include "brox/random.hpp"

namespace brox {

/// Per-knot chain data for the potential V = alpha * W. End knots get no
/// transition (the walk widens or stops there).
struct ChainTables {
  double step;
  std::vector<double> p_up;        // P(next knot is i + 1)
  std::vector<double> mean_time;   // mean time to reach a neighbour
  std::vector<double> local_time;  // mean local time at x_i gained meanwhile
  std::vector<std::uint64_t> up_threshold;  // p_up scaled to 2^64
};

ChainTables chain_tables(const EnvironmentPath& env, double alpha);

struct ChainOptions {
  std::uint64_t max_steps = 20'000'000'000ULL;
  /// Source of new increments when the walk reaches an end of the window.
  /// Without one, RangeExceeded is thrown.
  Rng* env_rng = nullptr;
  double widen_factor = 2.0;
  int max_widenings = 8;
};

struct ChainRun {
  double t;
  double alpha;
  EnvironmentPath environment;     // as widened during the run
  std::vector<double> local_time;  // L(t, x_i)
  std::vector<double> occupation;  // time spent in the cell of x_i
  std::size_t final_index;         // knot last visited before t
  std::uint64_t steps;
  int widenings;

  double final_position() const { return environment.position(final_index); }
  /// Local time as a profile with one bin per knot.
  LocalTimeProfile profile() const;
};

/// Runs the knot chain of the diffusion in alpha * W from 0 up to time t.
ChainRun simulate_grid_chain(const EnvironmentPath& env, double alpha, Rng& rng, double t,
                             const ChainOptions& options = {});

}  // namespace brox
