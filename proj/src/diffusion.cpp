#include "brox/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "brox/numerics.hpp"

namespace brox {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

ScaleMap::ScaleMap(const EnvironmentPath& env, double alpha, double offset)
    : alpha_(alpha),
      offset_(offset),
      step_(env.step()),
      first_(env.first_knot()),
      origin_(env.origin()),
      identity_(true) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be >= 0");
  const std::size_t n = env.size();
  if (n < 2) throw DomainError("scale map needs at least two knots");
  v_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    v_[i] = alpha * env[i] - offset;
    if (v_[i] != 0.0) identity_ = false;
  }
  s_.assign(n, 0.0);
  log_s_.assign(n, kNegInf);
  auto seg = [&](std::size_t k) {
    return step_ * std::exp(v_[k]) * expm1_ratio(v_[k + 1] - v_[k]);
  };
  auto log_seg = [&](std::size_t k) {
    return std::log(step_) + v_[k] + log_expm1_ratio(v_[k + 1] - v_[k]);
  };
  for (std::size_t i = origin_ + 1; i < n; ++i) {
    s_[i] = identity_ ? position(i) : s_[i - 1] + seg(i - 1);
    log_s_[i] = log_sum_exp(log_s_[i - 1], log_seg(i - 1));
  }
  for (std::size_t i = origin_; i-- > 0;) {
    s_[i] = identity_ ? position(i) : s_[i + 1] - seg(i);
    log_s_[i] = log_sum_exp(log_s_[i + 1], log_seg(i));
  }
}

std::size_t ScaleMap::segment(double x) const {
  const double tol = 1e-9 * step_;
  if (!(x >= left() - tol && x <= right() + tol)) {
    std::ostringstream msg;
    msg << "x = " << x << " outside scale map domain [" << left() << ", " << right() << "]";
    throw DomainError(msg.str());
  }
  const double f = x / step_ - static_cast<double>(first_);
  const double last = static_cast<double>(v_.size() - 2);
  return static_cast<std::size_t>(std::clamp(std::floor(f), 0.0, last));
}

double ScaleMap::potential(double x) const {
  const std::size_t k = segment(x);
  const double kappa = (v_[k + 1] - v_[k]) / step_;
  return v_[k] + kappa * (x - position(k));
}

double ScaleMap::operator()(double x) const {
  if (identity_) {
    segment(x);
    return x;
  }
  const std::size_t k = segment(x);
  const double xk = position(k);
  const double kappa = (v_[k + 1] - v_[k]) / step_;
  if (x == xk) return s_[k];
  if (x == position(k + 1)) return s_[k + 1];
  if (k >= origin_) {
    const double u = x - xk;
    return s_[k] + std::exp(v_[k]) * u * expm1_ratio(kappa * u);
  }
  const double len = position(k + 1) - x;
  const double vx = v_[k] + kappa * (x - xk);
  return s_[k + 1] - std::exp(vx) * len * expm1_ratio(kappa * len);
}

double ScaleMap::log_abs(double x) const {
  const std::size_t k = segment(x);
  const double xk = position(k);
  const double kappa = (v_[k + 1] - v_[k]) / step_;
  if (x == xk) return log_s_[k];
  if (x == position(k + 1)) return log_s_[k + 1];
  if (k >= origin_) {
    const double u = x - xk;
    return log_sum_exp(log_s_[k], v_[k] + std::log(u) + log_expm1_ratio(kappa * u));
  }
  const double len = position(k + 1) - x;
  const double vx = v_[k] + kappa * (x - xk);
  return log_sum_exp(log_s_[k + 1], vx + std::log(len) + log_expm1_ratio(kappa * len));
}

double ScaleMap::invert(double v) const {
  if (!(v >= s_.front() && v <= s_.back())) {
    std::ostringstream msg;
    msg << "value " << v << " outside the range of S on [" << left() << ", " << right() << "]";
    throw RangeExceeded(msg.str());
  }
  if (identity_) return v;
  const auto it = std::upper_bound(s_.begin(), s_.end(), v);
  if (it == s_.end()) return right();
  const auto k = static_cast<std::size_t>(std::distance(s_.begin(), it)) - 1;
  if (s_[k] == v) return position(k);
  const double kappa = (v_[k + 1] - v_[k]) / step_;
  const double d_left = v - s_[k];
  const double d_right = s_[k + 1] - v;
  // Solve from whichever end is finite and nearer.
  if (std::isfinite(s_[k]) && (d_left <= d_right || !std::isfinite(s_[k + 1]))) {
    const double scaled = d_left * std::exp(-v_[k]);
    double u;
    if (kappa == 0.0) {
      u = scaled;
    } else {
      const double y = scaled * kappa;
      u = y <= -1.0 ? step_ : std::log1p(y) / kappa;
    }
    return position(k) + std::clamp(u, 0.0, step_);
  }
  const double scaled = d_right * std::exp(-v_[k + 1]);
  double len;
  if (kappa == 0.0) {
    len = scaled;
  } else {
    const double y = -scaled * kappa;
    len = y <= -1.0 ? step_ : -std::log1p(y) / kappa;
  }
  return position(k + 1) - std::clamp(len, 0.0, step_);
}

ScaleMap build_scale_map(const EnvironmentPath& env, double alpha, double offset) {
  return ScaleMap(env, alpha, offset);
}

double invert_scale(const ScaleMap& map, double v) { return map.invert(v); }

namespace {

class PathBuilder {
 public:
  PathBuilder(const EnvironmentPath& env, double alpha, double dt, double offset)
      : env_(env), map_(env, alpha, offset), alpha_(alpha), dt_(dt), offset_(offset) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
    driving_.push_back(0.0);
    clock_.push_back(0.0);
    positions_.push_back(0.0);
  }

  /// Appends the driving value b; returns false when S^{-1} is out of range.
  bool try_append(double b) {
    const double prev = driving_.back();
    double x;
    double x_mid;
    try {
      x = map_.invert(b);
      x_mid = map_.invert(prev + 0.5 * (b - prev));
    } catch (const RangeExceeded&) {
      return false;
    }
    const double inc = dt_ * std::exp(-2.0 * map_.potential(x_mid));
    driving_.push_back(b);
    positions_.push_back(x);
    increments_.push_back(inc);
    clock_.push_back(clock_.back() + inc);
    return true;
  }

  void rebuild(EnvironmentPath env) {
    env_ = std::move(env);
    map_ = ScaleMap(env_, alpha_, offset_);
  }

  const EnvironmentPath& environment() const { return env_; }
  double clock() const { return clock_.back(); }
  double last_driving() const { return driving_.back(); }
  std::size_t steps() const { return increments_.size(); }

  DiffusionPath finish() && {
    return DiffusionPath{dt_,
                         alpha_,
                         offset_,
                         DrivingPath{dt_, std::move(driving_)},
                         std::move(clock_),
                         std::move(increments_),
                         std::move(positions_),
                         std::move(env_)};
  }

 private:
  EnvironmentPath env_;
  ScaleMap map_;
  double alpha_;
  double dt_;
  double offset_;
  std::vector<double> driving_;
  std::vector<double> clock_;
  std::vector<double> increments_;
  std::vector<double> positions_;
};

}  // namespace

DiffusionPath simulate_path(const EnvironmentPath& env, double alpha, Rng& rng, double dt,
                            double t_target, const SimulationOptions& options) {
  if (!(t_target > 0.0)) throw std::invalid_argument("t_target must be positive");
  PathBuilder builder(env, alpha, dt, options.offset);
  std::normal_distribution<double> gauss(0.0, std::sqrt(dt));
  int widenings = 0;
  while (builder.clock() < t_target) {
    if (builder.steps() >= options.max_steps) {
      std::ostringstream msg;
      msg << "step budget of " << options.max_steps << " exhausted at clock " << builder.clock()
          << " (target " << t_target << ")";
      throw StepBudgetExceeded(msg.str(), builder.steps(), builder.clock());
    }
    const double b = builder.last_driving() + gauss(rng);
    while (!builder.try_append(b)) {
      if (options.env_rng == nullptr || widenings >= options.max_widenings) {
        throw RangeExceeded("driving path left the environment window and widening is exhausted");
      }
      builder.rebuild(widen_environment(builder.environment(), options.widen_factor,
                                        *options.env_rng));
      ++widenings;
    }
  }
  return std::move(builder).finish();
}

DiffusionPath path_from_driving(const EnvironmentPath& env, double alpha, DrivingPath driving,
                                double offset) {
  if (driving.values.size() < 2 || driving.values.front() != 0.0) {
    throw std::invalid_argument("driving path needs B(0) = 0 and at least two samples");
  }
  PathBuilder builder(env, alpha, driving.dt, offset);
  for (std::size_t k = 1; k < driving.values.size(); ++k) {
    if (!builder.try_append(driving.values[k])) {
      throw RangeExceeded("driving path leaves the range of S");
    }
  }
  return std::move(builder).finish();
}

double inverse_clock(const DiffusionPath& path, double t) {
  if (!(t >= 0.0 && t <= path.total_time())) {
    throw std::invalid_argument("time outside the simulated horizon");
  }
  const auto it = std::upper_bound(path.clock.begin(), path.clock.end(), t);
  const auto k = static_cast<std::size_t>(std::distance(path.clock.begin(), it)) - 1;
  if (k >= path.steps()) return static_cast<double>(path.steps()) * path.dt;
  const double frac = (t - path.clock[k]) / path.increments[k];
  return (static_cast<double>(k) + frac) * path.dt;
}

double clock_at(const DiffusionPath& path, double s) {
  const double f = s / path.dt;
  if (!(f >= 0.0 && f <= static_cast<double>(path.steps()))) {
    throw std::invalid_argument("driving time outside the simulated horizon");
  }
  const auto k = std::min(static_cast<std::size_t>(std::floor(f)), path.steps() - 1);
  return path.clock[k] + (f - static_cast<double>(k)) * path.increments[k];
}

std::int64_t occupation_bin(double x, double bin_width) {
  return static_cast<std::int64_t>(std::floor(x / bin_width + 0.5));
}

namespace {

void check_horizon(const DiffusionPath& path, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("t must be nonnegative");
  if (t > path.total_time()) {
    std::ostringstream msg;
    msg << "t = " << t << " beyond the simulated horizon " << path.total_time();
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

LocalTimeProfile local_time_occupation(const DiffusionPath& path, double bin_width, double t) {
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin_width must be positive");
  check_horizon(path, t);
  std::map<std::int64_t, double> acc;
  for (std::size_t k = 0; k < path.steps(); ++k) {
    if (path.clock[k] >= t) break;
    const double w = path.clock[k + 1] <= t ? path.increments[k] : t - path.clock[k];
    acc[occupation_bin(path.positions[k], bin_width)] += w;
  }
  LocalTimeProfile out{t, bin_width, {}, {}};
  if (acc.empty()) {
    out.centers.push_back(0.0);
    out.values.push_back(0.0);
    return out;
  }
  const std::int64_t lo = acc.begin()->first;
  const std::int64_t hi = acc.rbegin()->first;
  for (std::int64_t j = lo; j <= hi; ++j) {
    out.centers.push_back(static_cast<double>(j) * bin_width);
    const auto it = acc.find(j);
    out.values.push_back(it == acc.end() ? 0.0 : it->second / bin_width);
  }
  return out;
}

double local_time_transfer(const DiffusionPath& path, const ScaleMap& map, double x, double t,
                           double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("band half-width must be positive");
  check_horizon(path, t);
  const double sx = map(x);
  const double s_end = inverse_clock(path, t);
  const auto& b = path.driving.values;
  double occupied = 0.0;
  for (std::size_t j = 0; j + 1 < b.size(); ++j) {
    const double start = static_cast<double>(j) * path.dt;
    if (start >= s_end) break;
    if (std::abs(b[j] - sx) < eps) occupied += std::min(path.dt, s_end - start);
  }
  return std::exp(-map.potential(x)) * occupied / (2.0 * eps);
}

std::optional<double> hitting_time(const DiffusionPath& path, double x) {
  const auto& pos = path.positions;
  if (pos[0] == x) return 0.0;
  for (std::size_t k = 0; k < path.steps(); ++k) {
    const double a = pos[k] - x;
    const double b = pos[k + 1] - x;
    if (b == 0.0) return path.clock[k + 1];
    if ((a < 0.0) != (b < 0.0)) {
      const double frac = a / (a - b);
      return path.clock[k] + frac * path.increments[k];
    }
  }
  return std::nullopt;
}

std::optional<double> inverse_local_time(const DiffusionPath& path, double r, double x,
                                         double bin_width) {
  if (!(r >= 0.0)) throw std::invalid_argument("r must be nonnegative");
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin_width must be positive");
  if (r == 0.0) return 0.0;
  const std::int64_t target = occupation_bin(x, bin_width);
  double acc = 0.0;
  for (std::size_t k = 0; k < path.steps(); ++k) {
    if (occupation_bin(path.positions[k], bin_width) != target) continue;
    acc += path.increments[k];
    if (acc / bin_width >= r) return path.clock[k + 1];
  }
  return std::nullopt;
}

FavoritePoint favorite_point(const LocalTimeProfile& profile) {
  if (profile.values.empty()) throw std::invalid_argument("empty local-time profile");
  std::size_t best = 0;
  for (std::size_t i = 1; i < profile.values.size(); ++i) {
    if (profile.values[i] > profile.values[best]) best = i;
  }
  return {profile.centers[best], profile.values[best]};
}

ScaledEnvironment rescale_to_unit_valley(const EnvironmentPath& env, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (alpha == 1.0) return {env, FrameMap{1.0}};
  std::vector<double> values(env.values().begin(), env.values().end());
  for (double& w : values) w /= alpha;
  return {EnvironmentPath(env.step() / (alpha * alpha), env.first_knot(), std::move(values)),
          FrameMap{alpha}};
}

void write_path_csv(std::ostream& out, const DiffusionPath& path) {
  out << "t,x\n";
  char buf[64];
  for (std::size_t k = 0; k < path.clock.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", path.clock[k], path.positions[k]);
    out << buf;
  }
}

void write_profile_csv(std::ostream& out, const LocalTimeProfile& profile) {
  out << "x,L\n";
  char buf[64];
  for (std::size_t i = 0; i < profile.values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", profile.centers[i], profile.values[i]);
    out << buf;
  }
}

}  // namespace brox
