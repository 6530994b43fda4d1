#include "brox/environment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include "brox/numerics.hpp"
#include "json.hpp"

namespace brox {

namespace {

constexpr double kGridTolerance = 1e-6;  // in units of the step

void require_positive_step(double step) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw DomainError("environment step must be positive and finite");
  }
}

}  // namespace

std::int64_t grid_coordinate(double x, double step) {
  const double r = x / step;
  const double k = std::round(r);
  if (!std::isfinite(r) || std::abs(r - k) > kGridTolerance) {
    std::ostringstream msg;
    msg << "coordinate " << x << " is not a multiple of the grid step " << step;
    throw DomainError(msg.str());
  }
  return static_cast<std::int64_t>(k);
}

EnvironmentPath::EnvironmentPath(double step, std::int64_t first_knot, std::vector<double> values)
    : step_(step), first_(first_knot), values_(std::move(values)) {
  require_positive_step(step_);
  if (values_.empty()) throw DomainError("environment needs at least one knot");
  if (first_ > 0 || last_knot() < 0) throw DomainError("environment domain must contain 0");
  if (values_[origin()] != 0.0) throw DomainError("environment must satisfy W(0) = 0");
}

bool EnvironmentPath::contains(double x) const {
  const double slack = kGridTolerance * step_;
  return x >= left() - slack && x <= right() + slack;
}

double EnvironmentPath::operator()(double x) const {
  if (!contains(x)) {
    std::ostringstream msg;
    msg << "x = " << x << " outside environment [" << left() << ", " << right() << "]";
    throw DomainError(msg.str());
  }
  if (values_.size() == 1) return values_[0];
  const double u = x / step_ - static_cast<double>(first_);
  const double last = static_cast<double>(values_.size() - 1);
  const double uc = std::clamp(u, 0.0, last);
  auto k = static_cast<std::size_t>(std::floor(uc));
  if (k >= values_.size() - 1) k = values_.size() - 2;
  const double frac = uc - static_cast<double>(k);
  return values_[k] + frac * (values_[k + 1] - values_[k]);
}

std::size_t EnvironmentPath::knot_index(double x) const {
  const std::int64_t k = grid_coordinate(x, step_);
  if (k < first_ || k > last_knot()) {
    std::ostringstream msg;
    msg << "knot " << x << " outside environment [" << left() << ", " << right() << "]";
    throw DomainError(msg.str());
  }
  return static_cast<std::size_t>(k - first_);
}

EnvironmentPath sample_environment(double step, double left, double right, Rng& rng) {
  require_positive_step(step);
  if (left > 0.0 || right < 0.0) throw DomainError("extents must satisfy left <= 0 <= right");
  const std::int64_t kl = grid_coordinate(left, step);
  const std::int64_t kr = grid_coordinate(right, step);
  std::vector<double> values(static_cast<std::size_t>(kr - kl + 1), 0.0);
  const auto origin = static_cast<std::size_t>(-kl);
  std::normal_distribution<double> gauss(0.0, std::sqrt(step));
  for (std::size_t i = origin; i-- > 0;) values[i] = values[i + 1] + gauss(rng);
  for (std::size_t i = origin + 1; i < values.size(); ++i) values[i] = values[i - 1] + gauss(rng);
  return EnvironmentPath(step, kl, std::move(values));
}

EnvironmentPath extend_environment(const EnvironmentPath& env, double new_left, double new_right,
                                   Rng& rng) {
  const double step = env.step();
  const std::int64_t kl = grid_coordinate(new_left, step);
  const std::int64_t kr = grid_coordinate(new_right, step);
  if (kl > env.first_knot() || kr < env.last_knot()) {
    throw DomainError("extend_environment cannot shrink the domain");
  }
  const auto added_left = static_cast<std::size_t>(env.first_knot() - kl);
  std::vector<double> values(static_cast<std::size_t>(kr - kl + 1));
  std::copy(env.values().begin(), env.values().end(), values.begin() + added_left);
  std::normal_distribution<double> gauss(0.0, std::sqrt(step));
  for (std::size_t i = added_left; i-- > 0;) values[i] = values[i + 1] + gauss(rng);
  for (std::size_t i = added_left + env.size(); i < values.size(); ++i) {
    values[i] = values[i - 1] + gauss(rng);
  }
  return EnvironmentPath(step, kl, std::move(values));
}

EnvironmentPath widen_environment(const EnvironmentPath& env, double factor, Rng& rng) {
  if (!(factor > 1.0)) throw std::invalid_argument("widening factor must exceed 1");
  const std::int64_t first = env.first_knot();
  const std::int64_t last = env.last_knot();
  const std::int64_t span = std::max<std::int64_t>({-first, last, 1});
  const std::int64_t new_first =
      first == 0 ? -span
                 : static_cast<std::int64_t>(std::floor(static_cast<double>(first) * factor));
  const std::int64_t new_last =
      last == 0 ? span : static_cast<std::int64_t>(std::ceil(static_cast<double>(last) * factor));
  return extend_environment(env, static_cast<double>(new_first) * env.step(),
                            static_cast<double>(new_last) * env.step(), rng);
}

ShiftedPotential::ShiftedPotential(const EnvironmentPath& base, std::size_t center_index)
    : base_(&base), center_(center_index) {
  if (center_index >= base.size()) throw DomainError("shift center outside the environment");
}

double ShiftedPotential::operator()(double x) const {
  return (*base_)(center() + x) - (*base_)[center_];
}

double ShiftedPotential::at_offset(std::int64_t offset) const {
  const std::int64_t i = static_cast<std::int64_t>(center_) + offset;
  if (i < 0 || i >= static_cast<std::int64_t>(base_->size())) {
    throw DomainError("shifted knot outside the environment");
  }
  return (*base_)[static_cast<std::size_t>(i)] - (*base_)[center_];
}

double barrier_between_knots(const EnvironmentPath& env, std::size_t from, std::size_t to) {
  double running_min = env[from];
  double best = 0.0;
  const std::ptrdiff_t dir = to >= from ? 1 : -1;
  for (std::size_t i = from;; i = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i) + dir)) {
    running_min = std::min(running_min, env[i]);
    best = std::max(best, env[i] - running_min);
    if (i == to) break;
  }
  return best;
}

double barrier(const EnvironmentPath& env, double x, double y) {
  if (!env.contains(x) || !env.contains(y)) throw DomainError("barrier endpoints outside domain");
  // Extremes of a piecewise-linear path sit at knots or at the endpoints.
  std::vector<double> seq;
  seq.push_back(env(x));
  const double step = env.step();
  if (y >= x) {
    for (std::int64_t k = static_cast<std::int64_t>(std::floor(x / step)) + 1;
         static_cast<double>(k) * step < y; ++k) {
      if (k >= env.first_knot() && k <= env.last_knot()) {
        seq.push_back(env[static_cast<std::size_t>(k - env.first_knot())]);
      }
    }
  } else {
    for (std::int64_t k = static_cast<std::int64_t>(std::ceil(x / step)) - 1;
         static_cast<double>(k) * step > y; --k) {
      if (k >= env.first_knot() && k <= env.last_knot()) {
        seq.push_back(env[static_cast<std::size_t>(k - env.first_knot())]);
      }
    }
  }
  seq.push_back(env(y));
  double running_min = seq.front();
  double best = 0.0;
  for (double w : seq) {
    running_min = std::min(running_min, w);
    best = std::max(best, w - running_min);
  }
  return best;
}

namespace {

// ok[i]: scanning from i towards the start of `w`, the path rises to at least
// w[i] + h before dropping strictly below w[i].
std::vector<char> rise_before_drop(std::span<const double> w, double h, bool reverse) {
  const std::size_t n = w.size();
  std::vector<char> ok(n, 0);
  struct Entry {
    std::size_t idx;
    double seg_max;
  };
  std::vector<Entry> stack;
  stack.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t i = reverse ? n - 1 - s : s;
    double cur = w[i];
    while (!stack.empty() && w[stack.back().idx] >= w[i]) {
      cur = std::max(cur, stack.back().seg_max);
      stack.pop_back();
    }
    ok[i] = cur >= w[i] + h;
    stack.push_back({i, cur});
  }
  return ok;
}

}  // namespace

std::vector<Extremum> find_h_extrema(const EnvironmentPath& env, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("h must be positive");
  const std::size_t n = env.size();
  if (n < 3) return {};
  std::span<const double> w = env.values();
  std::vector<double> neg(n);
  std::transform(w.begin(), w.end(), neg.begin(), [](double v) { return -v; });

  const auto min_left = rise_before_drop(w, h, false);
  const auto min_right = rise_before_drop(w, h, true);
  const auto max_left = rise_before_drop(neg, h, false);
  const auto max_right = rise_before_drop(neg, h, true);

  std::vector<Extremum> out;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    ExtremumKind kind;
    if (min_left[i] && min_right[i]) {
      kind = ExtremumKind::minimum;
    } else if (max_left[i] && max_right[i]) {
      kind = ExtremumKind::maximum;
    } else {
      continue;
    }
    // Same kind twice in a row means one flat extreme: keep the leftmost.
    if (!out.empty() && out.back().kind == kind) continue;
    out.push_back({i, env.position(i), kind});
  }
  return out;
}

Valley standard_valley(const EnvironmentPath& env, double h) {
  const auto extrema = find_h_extrema(env, h);
  std::optional<Valley> best;
  int candidates = 0;
  for (std::size_t j = 1; j + 1 < extrema.size(); ++j) {
    if (extrema[j].kind != ExtremumKind::minimum) continue;
    const Extremum& p = extrema[j - 1];
    const Extremum& q = extrema[j + 1];
    if (!(p.position <= 0.0 && 0.0 <= q.position)) continue;
    ++candidates;
    const Extremum& m = extrema[j];
    if (best && std::abs(m.position) >= std::abs(best->m)) continue;
    Valley v{};
    v.p = p.position;
    v.m = m.position;
    v.q = q.position;
    v.p_index = p.index;
    v.m_index = m.index;
    v.q_index = q.index;
    v.h = h;
    best = v;
  }
  if (!best) {
    std::ostringstream msg;
    msg << "no standard " << h << "-valley inside [" << env.left() << ", " << env.right() << "]";
    throw ValleyNotContained(msg.str());
  }
  Valley& v = *best;
  const double wm = env[v.m_index];
  v.depth = std::min(env[v.p_index] - wm, env[v.q_index] - wm);
  v.ascent = std::max(barrier_between_knots(env, v.p_index, v.m_index),
                      barrier_between_knots(env, v.q_index, v.m_index));
  v.ambiguous = candidates > 1;
  return v;
}

ValleySearch find_standard_valley(EnvironmentPath env, double h, Rng& rng,
                                  const WideningPolicy& policy) {
  for (int widenings = 0;; ++widenings) {
    try {
      Valley v = standard_valley(env, h);
      return ValleySearch{std::move(env), v, widenings};
    } catch (const ValleyNotContained&) {
      if (widenings >= policy.max_widenings) {
        std::ostringstream msg;
        msg << "standard " << h << "-valley not found after " << widenings
            << " widenings (window [" << env.left() << ", " << env.right() << "])";
        throw ValleyNotContained(msg.str());
      }
    }
    env = widen_environment(env, policy.factor, rng);
  }
}

CrossingPair crossing_points(const ShiftedPotential& shifted, double theta) {
  if (!(theta > 0.0)) throw std::invalid_argument("crossing level must be positive");
  const EnvironmentPath& base = shifted.base();
  const double step = base.step();
  const auto center = static_cast<std::int64_t>(shifted.center_index());
  const auto n = static_cast<std::int64_t>(base.size());

  auto locate = [&](std::int64_t dir) -> std::optional<double> {
    double prev = 0.0;
    for (std::int64_t k = 1; center + dir * k >= 0 && center + dir * k < n; ++k) {
      const double w = shifted.at_offset(dir * k);
      if (w >= theta) {
        const double frac = (theta - prev) / (w - prev);
        return (static_cast<double>(k - 1) + frac) * step;
      }
      prev = w;
    }
    return std::nullopt;
  };

  const auto right = locate(+1);
  if (!right) {
    throw ThresholdNotReached(Side::right, "level " + std::to_string(theta) +
                                               " not reached on the right of the window");
  }
  const auto left = locate(-1);
  if (!left) {
    throw ThresholdNotReached(Side::left, "level " + std::to_string(theta) +
                                              " not reached on the left of the window");
  }
  return CrossingPair{-*left, *right, theta};
}

std::optional<double> GibbsIntegral::value() const {
  const double v = std::exp(log_value);
  if (!std::isfinite(v)) return std::nullopt;
  if (v == 0.0 && log_value != -std::numeric_limits<double>::infinity()) return std::nullopt;
  return v;
}

GibbsIntegral gibbs_weight_integral(const ShiftedPotential& shifted, double alpha, double a,
                                    double b) {
  if (alpha < 0.0) throw std::invalid_argument("alpha must be nonnegative");
  if (a > b) throw std::invalid_argument("gibbs integral needs a <= b");
  const EnvironmentPath& base = shifted.base();
  const double slack = 1e-9;
  if (a < shifted.left() - slack * base.step() || b > shifted.right() + slack * base.step()) {
    throw DomainError("gibbs integral bounds outside the environment");
  }
  if (a == b) return GibbsIntegral{-std::numeric_limits<double>::infinity(), 0.0};

  const double last = static_cast<double>(base.size() - 1);
  const double c = static_cast<double>(shifted.center_index());
  const double fa = std::clamp(c + a / base.step(), 0.0, last);
  const double fb = std::clamp(c + b / base.step(), 0.0, last);
  const double w_center = base[shifted.center_index()];

  auto interp = [&](std::size_t k, double u) {
    if (k + 1 >= base.size()) return base[k] - w_center;
    return base[k] + (u - static_cast<double>(k)) * (base[k + 1] - base[k]) - w_center;
  };

  LogSum log_sum;
  double direct = 0.0;
  auto k = static_cast<std::size_t>(std::floor(fa));
  for (; static_cast<double>(k) < fb; ++k) {
    const double u0 = std::max(fa, static_cast<double>(k));
    const double u1 = std::min(fb, static_cast<double>(k + 1));
    if (!(u1 > u0)) continue;
    const double w0 = interp(k, u0);
    const double w1 = interp(k, u1);
    const double length = (u1 - u0) * base.step();
    const double z = -alpha * (w1 - w0);
    log_sum.add(std::log(length) - alpha * w0 + log_expm1_ratio(z));
    direct += length * std::exp(-alpha * w0) * expm1_ratio(z);
  }
  return GibbsIntegral{log_sum.log_value(), direct};
}

std::vector<double> environment_profile(const ShiftedPotential& shifted, double alpha, double r,
                                        std::span<const double> xs) {
  if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("r must lie in (0, 1)");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  const CrossingPair cp = crossing_points(shifted, alpha * r);
  const double log_g = gibbs_weight_integral(shifted, 1.0, cp.a, cp.b).log_value;
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(std::exp(-shifted(x) - log_g));
  return out;
}

double laplace_equivalence_check(const ShiftedPotential& shifted, double alpha, double a, double b,
                                 double r) {
  const CrossingPair cp = crossing_points(shifted, r);
  const double tol = 1e-12 * (cp.b - cp.a);
  if (!(cp.a - tol <= a && a < 0.0 && 0.0 < b && b <= cp.b + tol)) {
    throw std::invalid_argument("laplace check needs a_r <= a < 0 < b <= b_r");
  }
  const double full = gibbs_weight_integral(shifted, alpha, cp.a, cp.b).log_value;
  const double sub = gibbs_weight_integral(shifted, alpha, std::max(a, cp.a), std::min(b, cp.b))
                         .log_value;
  return std::abs(std::expm1(sub - full));
}

void write_environment_csv(std::ostream& out, const EnvironmentPath& env) {
  out << "x,W\n";
  char buf[64];
  for (std::size_t i = 0; i < env.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", env.position(i), env[i]);
    out << buf;
  }
}

std::string to_json_string(const EnvironmentSpec& spec) {
  nlohmann::ordered_json j;
  j["seed"] = spec.seed;
  j["stream"] = spec.stream;
  j["step"] = spec.step;
  j["left"] = spec.left;
  j["right"] = spec.right;
  return j.dump();
}

EnvironmentPath sample_environment(const EnvironmentSpec& spec) {
  Rng rng = make_rng(spec.seed, spec.stream);
  return sample_environment(spec.step, spec.left, spec.right, rng);
}

}  // namespace brox
