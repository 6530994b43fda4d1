#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "brox/environment.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace brox;
using oracle::barrier_oracle;
using oracle::riemann_gibbs;

namespace {

// |z| on [-3, 3] with unit knots.
EnvironmentPath abs_path(double step = 1.0, int half = 3) {
  std::vector<double> v;
  for (int k = -half; k <= half; ++k) v.push_back(std::abs(k * step));
  return EnvironmentPath(step, -half, v);
}

// Knots (-3,3),(0,0),(1,2),(2,-1),(4,3) on a unit grid.
EnvironmentPath zigzag() { return EnvironmentPath(1.0, -3, {3, 2, 1, 0, 2, -1, 1, 3}); }

// Resamples until the potential seen from its lowest knot crosses theta on
// both sides; returns the path and that knot.
std::pair<EnvironmentPath, std::size_t> sample_with_crossings(Rng& rng, double step, double extent,
                                                              double theta, bool from_minimum) {
  for (;;) {
    EnvironmentPath w = sample_environment(step, -extent, extent, rng);
    std::size_t c = w.origin();
    if (from_minimum) {
      c = static_cast<std::size_t>(std::min_element(w.values().begin(), w.values().end()) -
                                   w.values().begin());
    }
    try {
      crossing_points(ShiftedPotential(w, c), theta);
      return {std::move(w), c};
    } catch (const ThresholdNotReached&) {
    }
  }
}

}  // namespace

TEST_CASE("sampled environment is pinned at the origin") {
  Rng rng = make_rng(1);
  const EnvironmentPath single = sample_environment(0.01, 0.0, 0.0, rng);
  CHECK(single.size() == 1);
  CHECK(single[0] == 0.0);
  for (int i = 0; i < 20; ++i) {
    const EnvironmentPath w = sample_environment(0.1, -3.0, 2.0, rng);
    CHECK(w(0.0) == 0.0);
    CHECK(w.left() == doctest::Approx(-3.0));
    CHECK(w.right() == doctest::Approx(2.0));
  }
}

TEST_CASE("sample_environment rejects bad arguments") {
  Rng rng = make_rng(1);
  CHECK_THROWS_AS(sample_environment(0.0, -1.0, 1.0, rng), DomainError);
  CHECK_THROWS_AS(sample_environment(-0.1, -1.0, 1.0, rng), DomainError);
  CHECK_THROWS_AS(sample_environment(0.1, 1.0, 2.0, rng), DomainError);
  CHECK_THROWS_AS(sample_environment(0.1, -2.0, -1.0, rng), DomainError);
  CHECK_THROWS_AS(sample_environment(0.1, -1.05, 1.0, rng), DomainError);
}

TEST_CASE("Var W(1) is 1 over 10^4 paths") {
  Rng rng = make_rng(7);
  const int n = 10000;
  double s2 = 0.0;
  double s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = sample_environment(0.05, 0.0, 1.0, rng)(1.0);
    s2 += v * v;
    s4 += v * v * v * v;
  }
  const double var = s2 / n;
  const double se = std::sqrt((s4 / n - var * var) / n);
  CHECK(std::abs(var - 1.0) < 3.0 * se);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("extend_environment keeps old knots") {
  Rng rng = make_rng(3);
  const EnvironmentPath w = sample_environment(0.1, -1.0, 1.0, rng);
  Rng r0 = make_rng(4);
  const EnvironmentPath same = extend_environment(w, w.left(), w.right(), r0);
  CHECK(std::equal(same.values().begin(), same.values().end(), w.values().begin(), w.values().end()));

  Rng r1 = make_rng(5);
  const EnvironmentPath wider = extend_environment(w, -1.0, 2.0, r1);
  CHECK(wider.first_knot() == w.first_knot());
  CHECK(wider.size() == w.size() + 10);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(wider[i] == w[i]);

  Rng r2 = make_rng(5);
  const EnvironmentPath again = extend_environment(w, -1.0, 2.0, r2);
  CHECK(std::equal(again.values().begin(), again.values().end(), wider.values().begin(),
                   wider.values().end()));

  Rng r3 = make_rng(6);
  CHECK_THROWS_AS(extend_environment(w, -0.5, 1.0, r3), DomainError);
}

TEST_CASE("widen_environment grows both sides and keeps knots") {
  Rng rng = make_rng(8);
  const EnvironmentPath w = sample_environment(0.1, -1.0, 0.0, rng);
  const EnvironmentPath wide = widen_environment(w, 2.0, rng);
  CHECK(wide.left() == doctest::Approx(-2.0));
  CHECK(wide.right() == doctest::Approx(1.0));
  const auto shift = static_cast<std::size_t>(w.first_knot() - wide.first_knot());
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(wide[i + shift] == w[i]);
}

TEST_CASE("barrier examples") {
  const EnvironmentPath a = abs_path();
  CHECK(barrier(a, -1.0, 1.0) == doctest::Approx(1.0));
  CHECK(barrier(a, 0.0, 3.0) == doctest::Approx(3.0));
  CHECK(barrier(zigzag(), 0.0, 4.0) == doctest::Approx(4.0));
  CHECK(barrier(zigzag(), 4.0, 0.0) == doctest::Approx(barrier_oracle(zigzag(), 7, 3)));
  CHECK_THROWS_AS(barrier(a, 0.0, 5.0), DomainError);
}

TEST_CASE("barrier matches the pairwise oracle and its lower bound") {
  Rng rng = make_rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const EnvironmentPath w = sample_environment(0.1, -3.0, 3.0, rng);
    for (std::size_t i = 0; i < w.size(); i += 7) {
      CHECK(barrier(w, w.position(i), w.position(i)) == 0.0);
      for (std::size_t j = 0; j < w.size(); j += 5) {
        const double b = barrier(w, w.position(i), w.position(j));
        CHECK(b == doctest::Approx(barrier_oracle(w, i, j)).epsilon(1e-12));
        CHECK(b >= std::max(0.0, w[j] - w[i]) - 1e-12);
      }
    }
  }
}

TEST_CASE("h-extrema examples") {
  const auto e = find_h_extrema(abs_path(), 1.0);
  REQUIRE(e.size() == 1);
  CHECK(e[0].kind == ExtremumKind::minimum);
  CHECK(e[0].position == 0.0);

  std::vector<double> ramp;
  for (int k = 0; k <= 10; ++k) ramp.push_back(0.5 * k);
  CHECK(find_h_extrema(EnvironmentPath(1.0, 0, ramp), 1.0).empty());

  const auto z = find_h_extrema(zigzag(), 1.0);
  REQUIRE(z.size() == 3);
  CHECK(z[0].position == 0.0);
  CHECK(z[0].kind == ExtremumKind::minimum);
  CHECK(z[1].position == 1.0);
  CHECK(z[1].kind == ExtremumKind::maximum);
  CHECK(z[2].position == 2.0);
  CHECK(z[2].kind == ExtremumKind::minimum);
  CHECK_THROWS(find_h_extrema(zigzag(), 0.0));
}

TEST_CASE("flat extreme collapses to its leftmost knot") {
  const EnvironmentPath w(1.0, -3, {3, 1, 0, 0, 0, 1, 3});
  const auto e = find_h_extrema(w, 1.0);
  REQUIRE(e.size() == 1);
  CHECK(e[0].position == -1.0);
}

TEST_CASE("h-extrema alternate and coarser h keeps a subset") {
  Rng rng = make_rng(12);
  for (int rep = 0; rep < 30; ++rep) {
    const EnvironmentPath w = sample_environment(0.01, -4.0, 4.0, rng);
    const auto fine = find_h_extrema(w, 0.5);
    const auto coarse = find_h_extrema(w, 1.0);
    for (std::size_t k = 1; k < fine.size(); ++k) CHECK(fine[k].kind != fine[k - 1].kind);
    for (const auto& c : coarse) {
      const bool found = std::any_of(fine.begin(), fine.end(), [&](const Extremum& f) {
        return f.index == c.index && f.kind == c.kind;
      });
      CHECK(found);
    }
  }
}

TEST_CASE("standard valley examples") {
  CHECK_THROWS_AS(standard_valley(abs_path(), 1.0), ValleyNotContained);

  // The zigzag has no h-maximum left of 0, so no triple encloses the origin.
  CHECK_THROWS_AS(standard_valley(zigzag(), 1.0), ValleyNotContained);

  const EnvironmentPath w(1.0, -3, {0, 2, 1, 0, -1, 1.5, 0});
  const Valley v = standard_valley(w, 1.0);
  CHECK(v.p == -2.0);
  CHECK(v.m == 1.0);
  CHECK(v.q == 2.0);
  CHECK(v.depth == doctest::Approx(2.5));
  CHECK(v.ascent == doctest::Approx(0.0));
  CHECK_FALSE(v.ambiguous);
}

TEST_CASE("valley invariants on sampled environments") {
  Rng rng = make_rng(13);
  int found = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const ValleySearch s = find_standard_valley(sample_environment(0.01, -1.0, 1.0, rng), 1.0, rng);
    const Valley& v = s.valley;
    const EnvironmentPath& w = s.environment;
    ++found;
    CHECK(v.p < v.m);
    CHECK(v.m < v.q);
    CHECK(v.p <= 0.0);
    CHECK(0.0 <= v.q);
    CHECK(w[v.p_index] >= w[v.m_index] + 1.0);
    CHECK(w[v.q_index] >= w[v.m_index] + 1.0);
    CHECK(v.depth >= 1.0);
    CHECK(v.ascent <= v.depth);
    CHECK(v.depth == doctest::Approx(std::min(w[v.p_index], w[v.q_index]) - w[v.m_index]));
  }
  CHECK(found == 100);
}

TEST_CASE("find_standard_valley gives up after the cap") {
  Rng rng = make_rng(1);
  const EnvironmentPath flat(1.0, -2, {0.0, 0.0, 0.0, 0.0, 0.0});
  CHECK_THROWS_AS(find_standard_valley(flat, 1.0, rng, {2.0, 0}), ValleyNotContained);
}

TEST_CASE("crossing points") {
  const EnvironmentPath a = abs_path(0.5, 8);
  const ShiftedPotential s(a, a.origin());
  const CrossingPair cp = crossing_points(s, 2.0);
  CHECK(cp.a == doctest::Approx(-2.0));
  CHECK(cp.b == doctest::Approx(2.0));
  CHECK(cp.theta == 2.0);
  CHECK_THROWS_AS(crossing_points(s, 5.0), ThresholdNotReached);

  // Knot k sits at x = (k - 1) * 0.01; W(1) = 1.5, W(1.01) = 2.5.
  std::vector<double> v(103, 0.0);
  v[0] = 3.0;
  for (int k = 1; k <= 101; ++k) v[k] = 1.5 * (k - 1) / 100.0;
  v[102] = 2.5;
  const EnvironmentPath p(0.01, -1, v);
  const CrossingPair c2 = crossing_points(ShiftedPotential(p, 1), 2.0);
  CHECK(c2.b > 1.0);
  CHECK(c2.b < 1.01);
  CHECK(c2.b == doctest::Approx(1.005).epsilon(1e-9));
  CHECK(c2.a == doctest::Approx(-0.02 / 3.0).epsilon(1e-9));
}

TEST_CASE("crossing threshold side is reported") {
  const EnvironmentPath w(1.0, -2, {5, 1, 0, 1, 1});
  try {
    crossing_points(ShiftedPotential(w, 2), 2.0);
    FAIL("expected ThresholdNotReached");
  } catch (const ThresholdNotReached& e) {
    CHECK(e.side() == Side::right);
  }
}

TEST_CASE("first-crossing property of the crossing pair") {
  Rng rng = make_rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    const auto [w, c] = sample_with_crossings(rng, 0.01, 30.0, 1.5, false);
    const ShiftedPotential s(w, c);
    const CrossingPair cp = crossing_points(s, 1.5);
    CHECK(s(cp.a) == doctest::Approx(1.5));
    CHECK(s(cp.b) == doctest::Approx(1.5));
    for (double x = 0.0; x < cp.b - 0.01; x += 0.01) CHECK(s(x) < 1.5);
    for (double x = 0.0; x > cp.a + 0.01; x -= 0.01) CHECK(s(x) < 1.5);
  }
}

TEST_CASE("gibbs weight integral") {
  const EnvironmentPath a = abs_path(0.01, 1000);
  const ShiftedPotential s(a, a.origin());
  CHECK(gibbs_weight_integral(s, 0.0, -2.0, 3.0).value().value() == doctest::Approx(5.0));
  CHECK(gibbs_weight_integral(s, 1.0, 1.0, 1.0).value().value() == 0.0);

  for (double alpha : {0.5, 1.0, 2.0, 3.0}) {
    const double r = 0.5;
    const double lim = alpha * r;
    const double exact = 2.0 * (1.0 - std::exp(-alpha * alpha * r)) / alpha;
    const GibbsIntegral g = gibbs_weight_integral(s, alpha, -lim, lim);
    CHECK(g.value().value() == doctest::Approx(exact).epsilon(1e-12));
    CHECK(g.value().value() == doctest::Approx(riemann_gibbs(s, alpha, -lim, lim, 200000)).epsilon(1e-6));
  }
}

TEST_CASE("gibbs integral lower bound and log/direct agreement") {
  Rng rng = make_rng(19);
  for (int rep = 0; rep < 30; ++rep) {
    const EnvironmentPath w = sample_environment(0.05, -5.0, 5.0, rng);
    const ShiftedPotential s(w, w.origin());
    for (double alpha : {0.0, 1.0, 5.0, 20.0}) {
      const GibbsIntegral g = gibbs_weight_integral(s, alpha, -4.0, 3.5);
      double wmax = -std::numeric_limits<double>::infinity();
      for (double x = -4.0; x <= 3.5 + 1e-9; x += 0.05) wmax = std::max(wmax, s(x));
      CHECK(g.log_value >= std::log(7.5) - alpha * wmax - 1e-12);
      if (std::isfinite(g.direct)) {
        CHECK(g.direct == doctest::Approx(std::exp(g.log_value)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("gibbs integral survives overflow") {
  const EnvironmentPath w(1.0, -1, {-400.0, 0.0, -400.0});
  const ShiftedPotential s(w, 1);
  const GibbsIntegral g = gibbs_weight_integral(s, 5.0, -1.0, 1.0);
  CHECK(std::isfinite(g.log_value));
  CHECK_FALSE(g.value().has_value());
  // Each side integrates e^{2000 u} over a unit cell.
  CHECK(g.log_value == doctest::Approx(2000.0 + std::log(2.0 / 2000.0)).epsilon(1e-12));
}

TEST_CASE("environment profile for |x|") {
  const EnvironmentPath a = abs_path(0.01, 2000);
  const ShiftedPotential s(a, a.origin());
  for (double alpha : {2.0, 5.0, 11.0}) {
    const double r = 0.5;
    const std::vector<double> xs{0.0, 0.37, -1.0};
    const auto p = environment_profile(s, alpha, r, xs);
    const double g = 2.0 * (1.0 - std::exp(-alpha * r));
    CHECK(p[0] == doctest::Approx(1.0 / g).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(std::exp(-0.37) / g).epsilon(1e-12));
    CHECK(p[2] == doctest::Approx(std::exp(-1.0) / g).epsilon(1e-12));
  }
  CHECK_THROWS(environment_profile(s, 5.0, 1.0, std::vector<double>{0.0}));
}

TEST_CASE("environment profile integrates to one over the crossing window") {
  Rng rng = make_rng(23);
  for (int rep = 0; rep < 10; ++rep) {
    const auto [w, c] = sample_with_crossings(rng, 0.01, 40.0, 1.5, false);
    const ShiftedPotential s(w, c);
    const double alpha = 3.0;
    const double r = 0.5;
    const CrossingPair cp = crossing_points(s, alpha * r);
    const double g = gibbs_weight_integral(s, 1.0, cp.a, cp.b).value().value();
    const auto p0 = environment_profile(s, alpha, r, std::vector<double>{0.0});
    CHECK(p0[0] == doctest::Approx(1.0 / g));
    // Exact integral of the piecewise exponential density over [a, b].
    CHECK(g * p0[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(riemann_gibbs(s, 1.0, cp.a, cp.b, 400000) * p0[0] == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("laplace equivalence gap") {
  const EnvironmentPath a = abs_path(0.01, 300);
  const ShiftedPotential s(a, a.origin());
  const CrossingPair cp = crossing_points(s, 1.0);
  CHECK(laplace_equivalence_check(s, 4.0, cp.a, cp.b, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(laplace_equivalence_check(s, 0.0, -0.5, 0.25, 1.0) ==
        doctest::Approx(1.0 - 0.75 / 2.0).epsilon(1e-12));

  // Seen from the lowest knot the potential is nonnegative, so the mass
  // concentrates at 0 as alpha grows.
  Rng rng = make_rng(29);
  const auto [w, c0] = sample_with_crossings(rng, 0.001, 20.0, 0.5, true);
  const ShiftedPotential sw(w, c0);
  const CrossingPair c = crossing_points(sw, 0.5);
  const double lo = c.a / 2.0;
  const double hi = c.b / 2.0;
  const double g5 = laplace_equivalence_check(sw, 5.0, lo, hi, 0.5);
  const double g10 = laplace_equivalence_check(sw, 10.0, lo, hi, 0.5);
  const double g20 = laplace_equivalence_check(sw, 20.0, lo, hi, 0.5);
  CHECK(g5 > g10);
  CHECK(g10 > g20);
}

TEST_CASE("environment serialisation") {
  const EnvironmentPath w(0.5, -1, {0.25, 0.0, -0.5});
  std::ostringstream csv;
  write_environment_csv(csv, w);
  const std::string text = csv.str();
  CHECK(text.rfind("x,W\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);

  const EnvironmentSpec spec{42, 3, 0.1, -1.0, 2.0};
  const std::string js = to_json_string(spec);
  CHECK(js.find("\"seed\"") != std::string::npos);
  CHECK(js.find("\"stream\"") != std::string::npos);
  const EnvironmentPath a = sample_environment(spec);
  const EnvironmentPath b = sample_environment(spec);
  CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin(), b.values().end()));
}

TEST_CASE("h-extrema and valley match the witness-search oracle on small grids") {
  Rng rng = make_rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    const EnvironmentPath w = sample_environment(0.05, -2.5, 2.5, rng);
    const auto got = find_h_extrema(w, 0.7);
    const auto want = oracle::brute_extrema(w, 0.7);
    REQUIRE(got.size() == want.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      CHECK(got[k].index == want[k].index);
      CHECK((got[k].kind == ExtremumKind::minimum) == want[k].minimum);
    }
  }
}
