#pragma once

// Slow reference implementations used as test oracles.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "brox/environment.hpp"

namespace oracle {

using brox::EnvironmentPath;

// W^#(x_i, x_j): every z between, every start of the running minimum.
inline double barrier_oracle(const EnvironmentPath& w, std::size_t i, std::size_t j) {
  double best = 0.0;
  const int dir = j >= i ? 1 : -1;
  for (auto z = static_cast<long>(i);; z += dir) {
    for (auto y = static_cast<long>(i);; y += dir) {
      best = std::max(best, w[static_cast<std::size_t>(z)] - w[static_cast<std::size_t>(y)]);
      if (y == z) break;
    }
    if (z == static_cast<long>(j)) break;
  }
  return best;
}

// Midpoint rule for int_a^b exp(-alpha W_c).
inline double riemann_gibbs(const brox::ShiftedPotential& s, double alpha, double a, double b,
                            int n) {
  const double h = (b - a) / n;
  double sum = 0.0;
  for (int k = 0; k < n; ++k) sum += std::exp(-alpha * s(a + (k + 0.5) * h));
  return sum * h;
}

struct Extremum {
  std::size_t index;
  bool minimum;
};

// Direct search over all knot triples xi < x0 < zeta with W(x0) the minimum
// (maximum) on [xi, zeta] and both witnesses h above (below) it. Assumes no
// ties between knot values.
inline std::vector<Extremum> brute_extrema(const EnvironmentPath& w, double h) {
  std::vector<Extremum> out;
  const std::size_t n = w.size();
  for (std::size_t x = 1; x + 1 < n; ++x) {
    for (int sign : {1, -1}) {
      const double v = sign * w[x];
      bool ok = false;
      for (std::size_t xi = 0; xi < x && !ok; ++xi) {
        for (std::size_t zeta = x + 1; zeta < n && !ok; ++zeta) {
          if (sign * w[xi] < v + h || sign * w[zeta] < v + h) continue;
          bool extreme = true;
          for (std::size_t k = xi; k <= zeta && extreme; ++k) extreme = sign * w[k] >= v;
          ok = extreme;
        }
      }
      if (ok) out.push_back({x, sign == 1});
    }
  }
  return out;
}

struct ValleyIdx {
  std::size_t p, m, q;
};

// Successive (max, min, max) with the origin in [p, q]; bottom closest to 0.
inline std::optional<ValleyIdx> brute_valley(const EnvironmentPath& w, double h) {
  const auto e = brute_extrema(w, h);
  std::optional<ValleyIdx> best;
  for (std::size_t j = 1; j + 1 < e.size(); ++j) {
    if (!e[j].minimum || e[j - 1].minimum || e[j + 1].minimum) continue;
    if (!(w.position(e[j - 1].index) <= 0.0 && 0.0 <= w.position(e[j + 1].index))) continue;
    if (best && std::abs(w.position(e[j].index)) >= std::abs(w.position(best->m))) continue;
    best = ValleyIdx{e[j - 1].index, e[j].index, e[j + 1].index};
  }
  return best;
}

}  // namespace oracle
