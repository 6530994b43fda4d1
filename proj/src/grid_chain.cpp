#include "brox/grid_chain.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "brox/numerics.hpp"

namespace brox {

ChainTables chain_tables(const EnvironmentPath& env, double alpha) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
  const std::size_t n = env.size();
  const double d = env.step();
  ChainTables t{d, std::vector<double>(n, 0.5), std::vector<double>(n, 0.0),
                std::vector<double>(n, 0.0), std::vector<std::uint64_t>(n, 0)};
  constexpr double two64 = 18446744073709551616.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double down = alpha * (env[i] - env[i - 1]);
    const double up = alpha * (env[i + 1] - env[i]);
    // Scale distances to the neighbours in units of d exp(V_i), kept in logs.
    const double la = log_expm1_ratio(-down);
    const double lb = log_expm1_ratio(up);
    const double ls = log_sum_exp(la, lb);
    const double p = std::exp(la - ls);
    t.p_up[i] = p;
    t.local_time[i] = 2.0 * d * std::exp(la + lb - ls);
    t.mean_time[i] = 2.0 * d * d *
                     (std::exp(lb - ls + log_exit_kernel(down)) +
                      std::exp(la - ls + log_exit_kernel(-up)));
    const double scaled = p * two64;
    t.up_threshold[i] = scaled >= two64 ? std::numeric_limits<std::uint64_t>::max()
                                        : static_cast<std::uint64_t>(scaled);
  }
  return t;
}

LocalTimeProfile ChainRun::profile() const {
  LocalTimeProfile p{t, environment.step(), {}, local_time};
  p.centers.reserve(environment.size());
  for (std::size_t i = 0; i < environment.size(); ++i) p.centers.push_back(environment.position(i));
  return p;
}

ChainRun simulate_grid_chain(const EnvironmentPath& env, double alpha, Rng& rng, double t,
                             const ChainOptions& options) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("t must be finite and >= 0");
  EnvironmentPath cur = env;
  ChainTables tab = chain_tables(cur, alpha);
  std::vector<std::uint64_t> visits(cur.size(), 0);
  std::size_t i = cur.origin();
  double clock = 0.0;
  std::uint64_t steps = 0;
  int widenings = 0;

  for (;;) {
    if (i == 0 || i + 1 == cur.size()) {
      if (options.env_rng == nullptr || widenings >= options.max_widenings) {
        throw RangeExceeded("chain reached the end of the environment window");
      }
      EnvironmentPath wider = widen_environment(cur, options.widen_factor, *options.env_rng);
      const auto shift = static_cast<std::size_t>(cur.first_knot() - wider.first_knot());
      std::vector<std::uint64_t> moved(wider.size(), 0);
      for (std::size_t k = 0; k < visits.size(); ++k) moved[k + shift] = visits[k];
      visits = std::move(moved);
      i += shift;
      cur = std::move(wider);
      tab = chain_tables(cur, alpha);
      ++widenings;
    }
    // Inner loop runs until the horizon or an end knot.
    const std::size_t last = cur.size() - 1;
    const double* mean_time = tab.mean_time.data();
    const std::uint64_t* thr = tab.up_threshold.data();
    std::uint64_t* vis = visits.data();
    bool done = false;
    while (i != 0 && i != last) {
      const double tau = mean_time[i];
      if (clock + tau >= t) {
        done = true;
        break;
      }
      clock += tau;
      ++vis[i];
      i = rng() < thr[i] ? i + 1 : i - 1;
      if (++steps >= options.max_steps) {
        std::ostringstream msg;
        msg << "chain step budget of " << options.max_steps << " exhausted at clock " << clock;
        throw StepBudgetExceeded(msg.str(), steps, clock);
      }
    }
    if (done) break;
  }

  ChainRun run{t, alpha, cur, std::vector<double>(cur.size(), 0.0),
               std::vector<double>(cur.size(), 0.0), i, steps, widenings};
  for (std::size_t k = 0; k < cur.size(); ++k) {
    if (visits[k] == 0) continue;
    const double v = static_cast<double>(visits[k]);
    run.local_time[k] = v * tab.local_time[k];
    run.occupation[k] = v * tab.mean_time[k];
  }
  const double rest = t - clock;
  run.occupation[i] += rest;
  run.local_time[i] += tab.local_time[i] * (rest / tab.mean_time[i]);
  return run;
}

}  // namespace brox
