#include "brox/bessel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace brox {

namespace {

struct Window {
  double integral;
  double end_value;
  std::uint64_t steps;
};

// One step of |3-d walk| needs only the radial component and the squared
// orthogonal part, which is dt times a chi-square(2) = 2 Exp(1).
Window walk_to_level(double dt, double level, Rng& rng, std::vector<double>* store,
                     std::uint64_t max_steps) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  const double sd = std::sqrt(dt);
  double r = 0.0;
  double f_prev = 1.0;
  double sum = 0.0;
  std::uint64_t steps = 0;
  if (store != nullptr) store->assign(1, 0.0);
  while (r < level) {
    if (steps >= max_steps) {
      std::ostringstream msg;
      msg << "Bessel path did not reach level " << level << " within " << max_steps << " steps";
      throw StepBudgetExceeded(msg.str(), steps, dt * static_cast<double>(steps));
    }
    const double a = r + sd * gauss(rng);
    r = std::sqrt(a * a + 2.0 * dt * expo(rng));
    const double f = std::exp(-r);
    sum += 0.5 * (f_prev + f) * dt;
    f_prev = f;
    if (store != nullptr) store->push_back(r);
    ++steps;
  }
  return {sum, r, steps};
}

struct TailNode {
  std::uint64_t seed;
  double cut;       // remaining cutoff budget
  double log_mult;  // minus the accumulated minima-to-come
};

struct Tail {
  double mass = 0.0;
  std::uint64_t dropped = 0;
};

Tail sample_tail(std::vector<TailNode> pending, double dt, const HorizonRule& rule,
                 std::uint64_t steps_used) {
  Tail out;
  std::uint64_t nodes = 0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  while (!pending.empty()) {
    const TailNode node = pending.back();
    pending.pop_back();
    if (++nodes > rule.max_nodes) {
      throw StepBudgetExceeded("Bessel tail exceeded the node budget", steps_used, 0.0);
    }
    Rng rng = make_rng(node.seed);
    const Window w = walk_to_level(dt, rule.level, rng, nullptr, rule.max_steps - steps_used);
    steps_used += w.steps;
    out.mass += std::exp(node.log_mult) * w.integral;
    const double j = unif(rng) * w.end_value;
    if (j >= node.cut) {
      ++out.dropped;
      continue;
    }
    pending.push_back({derive_seed(node.seed, 1), node.cut - j, node.log_mult - j});
    pending.push_back({derive_seed(node.seed, 2), node.cut - j, node.log_mult - j});
  }
  return out;
}

}  // namespace

double BesselPath::at(double s) const {
  const double f = s / dt;
  const auto last = static_cast<double>(values.size() - 1);
  if (!(f >= 0.0 && f <= last + 1e-9)) {
    std::ostringstream msg;
    msg << "s = " << s << " beyond the Bessel window [0, " << horizon() << "]";
    throw DomainError(msg.str());
  }
  const double fc = std::min(f, last);
  auto k = static_cast<std::size_t>(std::floor(fc));
  if (k + 1 >= values.size()) return values.back();
  const double frac = fc - static_cast<double>(k);
  return values[k] + frac * (values[k + 1] - values[k]);
}

double BesselPath::window_integral() const {
  double sum = 0.0;
  double f_prev = std::exp(-values[0]);
  for (std::size_t k = 1; k < values.size(); ++k) {
    const double f = std::exp(-values[k]);
    sum += 0.5 * (f_prev + f) * dt;
    f_prev = f;
  }
  return sum;
}

BesselPath sample_bessel3(double dt, const HorizonRule& rule, Rng& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(rule.level > 0.0 && rule.cutoff > 0.0 && rule.allowance > 0.0)) {
    throw std::invalid_argument("horizon rule needs positive level, cutoff and allowance");
  }
  BesselPath path{dt, {}, 0.0, 0, 0.0, 0.0};
  const Window w = walk_to_level(dt, rule.level, rng, &path.values, rule.max_steps);

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double j = unif(rng) * w.end_value;
  // The descent to J is a Brownian motion, whose hitting time of a level d
  // below its start is d^2 / Z^2.
  const double z = gauss(rng);
  const double d = w.end_value - j;
  path.minimum_time = path.horizon() + (z == 0.0 ? 0.0 : d * d / (z * z));
  const std::uint64_t tail_seed = rng();

  Tail tail;
  if (j >= rule.cutoff) {
    tail.dropped = 1;
  } else {
    tail = sample_tail({{derive_seed(tail_seed, 1), rule.cutoff - j, -j},
                        {derive_seed(tail_seed, 2), rule.cutoff - j, -j}},
                       dt, rule, w.steps);
  }
  path.tail = tail.mass;
  path.dropped = tail.dropped;
  path.truncation_bound =
      static_cast<double>(tail.dropped) * std::exp(-rule.cutoff) * rule.allowance;
  return path;
}

TwoSidedBessel sample_two_sided_bessel(double dt, const HorizonRule& rule, Rng& rng) {
  BesselPath right = sample_bessel3(dt, rule, rng);
  BesselPath left = sample_bessel3(dt, rule, rng);
  return {std::move(right), std::move(left)};
}

FunctionalSample functional_sample(const TwoSidedBessel& r) {
  const double window = r.right.window_integral() + r.left.window_integral();
  return {window + r.right.tail + r.left.tail, window,
          r.right.truncation_bound + r.left.truncation_bound};
}

std::vector<double> profile_sample(const TwoSidedBessel& r, std::span<const double> xs) {
  const double value = functional_sample(r).value;
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(std::exp(-r(x)) / value);
  return out;
}

namespace {

std::vector<double> cumulative_mass(const BesselPath& side) {
  std::vector<double> cum(side.values.size(), 0.0);
  for (std::size_t k = 1; k < side.values.size(); ++k) {
    cum[k] = cum[k - 1] + 0.5 * (std::exp(-side.values[k - 1]) + std::exp(-side.values[k])) * side.dt;
  }
  return cum;
}

}  // namespace

ProfileSampler::ProfileSampler(const TwoSidedBessel& r)
    : r_(&r), cum_right_(cumulative_mass(r.right)), cum_left_(cumulative_mass(r.left)) {
  total_ = cum_right_.back() + r.right.tail + cum_left_.back() + r.left.tail;
}

double ProfileSampler::invert(const BesselPath& side, const std::vector<double>& cum,
                              double target) const {
  const auto it = std::upper_bound(cum.begin(), cum.end(), target);
  auto k = static_cast<std::size_t>(std::distance(cum.begin(), it));
  k = std::clamp<std::size_t>(k, 1, cum.size() - 1) - 1;
  const double h = side.dt;
  const double f0 = std::exp(-side.values[k]);
  const double f1 = std::exp(-side.values[k + 1]);
  const double m = target - cum[k];
  // Mass up to s inside the segment: f0 s + (f1 - f0) s^2 / (2h).
  const double disc = std::max(0.0, f0 * f0 + 2.0 * (f1 - f0) * m / h);
  const double s = 2.0 * m / (f0 + std::sqrt(disc));
  return static_cast<double>(k) * h + std::clamp(s, 0.0, h);
}

double ProfileSampler::draw(Rng& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng) * total_;
  if (u < cum_right_.back()) return invert(r_->right, cum_right_, u);
  u -= cum_right_.back();
  if (u < r_->right.tail) return r_->right.minimum_time;
  u -= r_->right.tail;
  if (u < cum_left_.back()) return -invert(r_->left, cum_left_, u);
  return -r_->left.minimum_time;
}

double besq2_hitting_time(double dt, Rng& rng, std::uint64_t max_steps) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  std::normal_distribution<double> gauss(0.0, std::sqrt(dt));
  double x = 0.0;
  double y = 0.0;
  double q_prev = 0.0;
  for (std::uint64_t k = 1; k <= max_steps; ++k) {
    x += gauss(rng);
    y += gauss(rng);
    const double q = x * x + y * y;
    if (q >= 1.0) {
      const double frac = (1.0 - q_prev) / (q - q_prev);
      return (static_cast<double>(k - 1) + frac) * dt;
    }
    q_prev = q;
  }
  throw StepBudgetExceeded("BESQ(2) walk did not reach 1", max_steps,
                           dt * static_cast<double>(max_steps));
}

HittingPair besq2_hitting_time_pair(double dt, int refine, Rng& rng, std::uint64_t max_steps) {
  if (!(dt > 0.0) || refine < 1) throw std::invalid_argument("need dt > 0 and refine >= 1");
  const double h = dt / refine;
  std::normal_distribution<double> gauss(0.0, std::sqrt(h));
  double x = 0.0;
  double y = 0.0;
  double q_prev_fine = 0.0;
  double q_prev_coarse = 0.0;
  double fine = -1.0;
  for (std::uint64_t k = 1; k <= max_steps; ++k) {
    x += gauss(rng);
    y += gauss(rng);
    const double q = x * x + y * y;
    if (fine < 0.0 && q >= 1.0) {
      fine = (static_cast<double>(k - 1) + (1.0 - q_prev_fine) / (q - q_prev_fine)) * h;
    }
    q_prev_fine = q;
    if (k % static_cast<std::uint64_t>(refine) == 0) {
      const auto kc = k / static_cast<std::uint64_t>(refine);
      if (q >= 1.0) {
        const double coarse =
            (static_cast<double>(kc - 1) + (1.0 - q_prev_coarse) / (q - q_prev_coarse)) * dt;
        return {coarse, fine};
      }
      q_prev_coarse = q;
    }
  }
  throw StepBudgetExceeded("BESQ(2) walk did not reach 1", max_steps,
                           h * static_cast<double>(max_steps));
}

double rayknight_alias_sample(double dt, Rng& rng) {
  const double a = besq2_hitting_time(dt, rng);
  const double b = besq2_hitting_time(dt, rng);
  return 4.0 * a + 4.0 * b;
}

}  // namespace brox
