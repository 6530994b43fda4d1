#include "brox/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "brox/diffusion.hpp"
#include "brox/environment.hpp"
#include "brox/grid_chain.hpp"

namespace brox {

namespace {

// Stream tags for derive_seed, disjoint from alpha indices.
constexpr std::uint64_t kReferenceTag = 0x5245460000000001ULL;
constexpr std::uint64_t kAliasTag = 0x414c490000000002ULL;
constexpr std::uint64_t kBootstrapTag = 0x424f4f0000000003ULL;

const std::set<std::string>& experiment_names() {
  static const std::set<std::string> names{"identity", "sup-localtime", "profile", "env-approx",
                                           "exponent", "position",      "all"};
  return names;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------- config

ExperimentConfig config_from_json(const Json& j, ExperimentConfig c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "experiment") c.experiment = v.get<std::string>();
      else if (key == "alphas") c.alphas = v.get<std::vector<double>>();
      else if (key == "replicas") c.replicas = v.get<std::size_t>();
      else if (key == "r") c.r = v.get<double>();
      else if (key == "K") c.K = v.get<double>();
      else if (key == "env_step") c.env_step = v.get<double>();
      else if (key == "deltas") c.deltas = v.get<std::vector<double>>();
      else if (key == "delta_check") c.delta_check = v.get<double>();
      else if (key == "xs") c.xs = v.get<std::vector<double>>();
      else if (key == "exponent_x") c.exponent_x = v.get<double>();
      else if (key == "identity_samples") c.identity_samples = v.get<std::size_t>();
      else if (key == "reference_samples") c.reference_samples = v.get<std::size_t>();
      else if (key == "bessel_dt") c.bessel_dt = v.get<double>();
      else if (key == "besq_dt") c.besq_dt = v.get<double>();
      else if (key == "horizon") {
        for (const auto& [hk, hv] : v.items()) {
          if (hk == "level") c.horizon.level = hv.get<double>();
          else if (hk == "cutoff") c.horizon.cutoff = hv.get<double>();
          else if (hk == "allowance") c.horizon.allowance = hv.get<double>();
          else if (hk == "max_steps") c.horizon.max_steps = hv.get<std::uint64_t>();
          else if (hk == "max_nodes") c.horizon.max_nodes = hv.get<std::uint64_t>();
          else throw ConfigError("unknown horizon key: " + hk);
        }
      }
      else if (key == "bootstrap_resamples") c.bootstrap_resamples = v.get<std::size_t>();
      else if (key == "ks_level") c.ks_level = v.get<double>();
      else if (key == "ks_cap") c.ks_cap = v.get<double>();
      else if (key == "slack") c.slack = v.get<double>();
      else if (key == "fraction_threshold") c.fraction_threshold = v.get<double>();
      else if (key == "max_clamp_rate") c.max_clamp_rate = v.get<double>();
      else if (key == "max_failure_rate") c.max_failure_rate = v.get<double>();
      else if (key == "median_band") c.median_band = v.get<double>();
      else if (key == "normalization_tol") c.normalization_tol = v.get<double>();
      else if (key == "alias_check") c.alias_check = v.get<bool>();
      else if (key == "chain_max_steps") c.chain_max_steps = v.get<std::uint64_t>();
      else if (key == "max_widenings") c.max_widenings = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "workers") c.workers = v.get<unsigned>();
      else if (key == "out_dir") c.out_dir = v.get<std::string>();
      else throw ConfigError("unknown config key: " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

Json config_to_json(const ExperimentConfig& c) {
  Json j;
  j["experiment"] = c.experiment;
  j["alphas"] = c.alphas;
  j["replicas"] = c.replicas;
  j["r"] = c.r;
  j["K"] = c.K;
  j["env_step"] = c.env_step;
  j["deltas"] = c.deltas;
  j["delta_check"] = c.delta_check;
  j["xs"] = c.xs;
  j["exponent_x"] = c.exponent_x;
  j["identity_samples"] = c.identity_samples;
  j["reference_samples"] = c.reference_samples;
  j["bessel_dt"] = c.bessel_dt;
  j["besq_dt"] = c.besq_dt;
  j["horizon"] = {{"level", c.horizon.level},
                  {"cutoff", c.horizon.cutoff},
                  {"allowance", c.horizon.allowance},
                  {"max_steps", c.horizon.max_steps},
                  {"max_nodes", c.horizon.max_nodes}};
  j["bootstrap_resamples"] = c.bootstrap_resamples;
  j["ks_level"] = c.ks_level;
  j["ks_cap"] = c.ks_cap;
  j["slack"] = c.slack;
  j["fraction_threshold"] = c.fraction_threshold;
  j["max_clamp_rate"] = c.max_clamp_rate;
  j["max_failure_rate"] = c.max_failure_rate;
  j["median_band"] = c.median_band;
  j["normalization_tol"] = c.normalization_tol;
  j["alias_check"] = c.alias_check;
  j["chain_max_steps"] = c.chain_max_steps;
  j["max_widenings"] = c.max_widenings;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["out_dir"] = c.out_dir;
  return j;
}

void validate(const ExperimentConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (!experiment_names().count(c.experiment)) fail("unknown experiment: " + c.experiment);
  if (c.alphas.empty()) fail("alphas must not be empty");
  for (std::size_t i = 0; i < c.alphas.size(); ++i) {
    if (!(c.alphas[i] > 0.0)) fail("alphas must be positive");
    if (i > 0 && !(c.alphas[i] > c.alphas[i - 1])) fail("alphas must be strictly increasing");
  }
  if (c.replicas < 1) fail("replicas must be at least 1");
  if (!(c.r > 0.0 && c.r < 1.0)) fail("r must lie strictly inside (0, 1)");
  if (!(c.K > 0.0)) fail("K must be positive");
  if (!(c.env_step > 0.0)) fail("env_step must be positive");
  try {
    grid_coordinate(c.K, c.env_step);
    grid_coordinate(c.exponent_x, c.env_step);
    for (double x : c.xs) grid_coordinate(x, c.env_step);
  } catch (const DomainError&) {
    fail("K, xs and exponent_x must be multiples of env_step");
  }
  if (c.xs.empty()) fail("xs must not be empty");
  if (c.deltas.empty()) fail("deltas must not be empty");
  for (double d : c.deltas) {
    if (!(d > 0.0)) fail("deltas must be positive");
  }
  if (std::find(c.deltas.begin(), c.deltas.end(), c.delta_check) == c.deltas.end()) {
    fail("delta_check must be one of deltas");
  }
  if (c.identity_samples < 10 || c.reference_samples < 10) fail("sample counts must be >= 10");
  if (!(c.bessel_dt > 0.0 && c.besq_dt > 0.0)) fail("time steps must be positive");
  if (!(c.horizon.level > 0.0 && c.horizon.cutoff > 0.0 && c.horizon.allowance > 0.0)) {
    fail("horizon level, cutoff and allowance must be positive");
  }
  if (c.bootstrap_resamples < 2) fail("bootstrap_resamples must be at least 2");
  if (!(c.ks_level > 0.0 && c.ks_level < 1.0)) fail("ks_level must lie in (0, 1)");
  if (!(c.slack >= 1.0)) fail("slack must be >= 1");
  if (c.workers < 1) fail("workers must be at least 1");
  if (c.max_widenings < 0) fail("max_widenings must be >= 0");
}

// ---------------------------------------------------------------- workers

void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& f) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned count = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  pool.reserve(count);
  for (unsigned w = 0; w < count; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------- replicas

ReplicaOutcome run_replica(const ExperimentConfig& c, std::size_t alpha_index,
                           std::size_t replica_index) {
  ReplicaOutcome out;
  const double alpha = c.alphas.at(alpha_index);
  const std::uint64_t base = derive_seed(c.seed, alpha_index, replica_index);
  Rng env_rng = make_rng(base, 0);
  Rng walk_rng = make_rng(base, 1);
  try {
    const double step = c.env_step;
    const auto half = static_cast<std::int64_t>(std::ceil(2.0 * alpha * alpha / step));
    EnvironmentPath w = sample_environment(step, -static_cast<double>(half) * step,
                                           static_cast<double>(half) * step, env_rng);

    // Standard 1-valley of W^alpha, which is the standard alpha-valley of W.
    std::optional<ScaledEnvironment> scaled;
    std::optional<Valley> valley;
    for (;;) {
      scaled = rescale_to_unit_valley(w, alpha);
      try {
        valley = standard_valley(scaled->environment, 1.0);
        break;
      } catch (const ValleyNotContained&) {
        if (out.widenings >= c.max_widenings) throw;
        w = widen_environment(w, 2.0, env_rng);
        ++out.widenings;
      }
    }
    const std::int64_t m_knot =
        scaled->environment.first_knot() + static_cast<std::int64_t>(valley->m_index);

    ChainOptions opts;
    opts.max_steps = c.chain_max_steps;
    opts.env_rng = &env_rng;
    opts.max_widenings = c.max_widenings;
    const FrameMap frame = scaled->frame;
    const double t = std::exp(alpha);
    const ChainRun run =
        simulate_grid_chain(scaled->environment, alpha, walk_rng, frame.scaled_time(t), opts);
    out.widenings += run.widenings;
    out.steps = run.steps;

    // Back to the unscaled frame: same knots, W = alpha W^alpha.
    std::vector<double> wv(run.environment.values().begin(), run.environment.values().end());
    for (double& v : wv) v *= alpha;
    const EnvironmentPath wu(step, run.environment.first_knot(), std::move(wv));
    const auto mi = static_cast<std::size_t>(m_knot - wu.first_knot());
    const double m = wu.position(mi);
    out.valley_bottom = m;

    std::vector<double> L(run.local_time.size());
    for (std::size_t i = 0; i < L.size(); ++i) L[i] = frame.local_time(run.local_time[i]);

    std::size_t best = 0;
    double total = 0.0;
    for (std::size_t i = 0; i < L.size(); ++i) {
      if (L[i] > L[best]) best = i;
      total += L[i] * step;
    }
    out.sup_ratio = L[best] / t;
    out.favorite_offset = wu.position(best) - m;
    out.normalization = total / t;

    auto knot_at_offset = [&](double x) {
      const std::int64_t j = static_cast<std::int64_t>(mi) + grid_coordinate(x, step);
      if (j < 0 || j >= static_cast<std::int64_t>(wu.size())) {
        throw DomainError("offset " + fmt(x) + " from the valley bottom leaves the window");
      }
      return static_cast<std::size_t>(j);
    };
    for (double x : c.xs) out.profile.push_back(L[knot_at_offset(x)] / t);

    const ShiftedPotential wm(wu, mi);
    const std::int64_t kk = grid_coordinate(c.K, step);
    std::vector<double> offsets;
    for (std::int64_t j = -kk; j <= kk; ++j) offsets.push_back(static_cast<double>(j) * step);
    const std::vector<double> rbar = environment_profile(wm, alpha, c.r, offsets);
    double sup = 0.0;
    for (std::size_t j = 0; j < offsets.size(); ++j) {
      const double ratio = L[knot_at_offset(offsets[j])] / t / rbar[j];
      sup = std::max(sup, std::abs(ratio - 1.0));
    }
    out.env_sup = sup;

    const double l0 = L[wu.knot_index(c.exponent_x)];
    out.exponent_zero = !(l0 > 0.0);
    out.exponent = out.exponent_zero ? 0.0 : std::log(l0) / alpha;

    out.position_offset = wu.position(run.final_index) - m;
  } catch (const std::exception& e) {
    out.failed = true;
    out.error = e.what();
  }
  return out;
}

ReferenceSample reference_sample(const ExperimentConfig& c, std::size_t index) {
  Rng rng = make_rng(derive_seed(c.seed, kReferenceTag, index));
  const TwoSidedBessel two = sample_two_sided_bessel(c.bessel_dt, c.horizon, rng);
  const FunctionalSample f = functional_sample(two);
  ReferenceSample s{f.value, f.truncation_bound / f.value, profile_sample(two, c.xs), 0.0};
  s.position = ProfileSampler(two).draw(rng);
  return s;
}

double alias_sample(const ExperimentConfig& c, std::size_t index) {
  Rng rng = make_rng(derive_seed(c.seed, kAliasTag, index));
  return rayknight_alias_sample(c.besq_dt, rng);
}

ExperimentContext::ExperimentContext(ExperimentConfig c) : config_(std::move(c)) {
  validate(config_);
}

const std::vector<ReplicaOutcome>& ExperimentContext::replicas(std::size_t alpha_index) {
  auto it = replicas_.find(alpha_index);
  if (it != replicas_.end()) return it->second;
  std::vector<ReplicaOutcome> out(config_.replicas);
  parallel_for(out.size(), config_.workers,
               [&](std::size_t i) { out[i] = run_replica(config_, alpha_index, i); });
  return replicas_.emplace(alpha_index, std::move(out)).first->second;
}

const std::vector<ReferenceSample>& ExperimentContext::reference(std::size_t count) {
  const std::size_t have = reference_.size();
  if (have < count) {
    reference_.resize(count);
    parallel_for(count - have, config_.workers, [&](std::size_t i) {
      reference_[have + i] = reference_sample(config_, have + i);
    });
  }
  return reference_;
}

const std::vector<double>& ExperimentContext::alias(std::size_t count) {
  const std::size_t have = alias_.size();
  if (have < count) {
    alias_.resize(count);
    parallel_for(count - have, config_.workers,
                 [&](std::size_t i) { alias_[have + i] = alias_sample(config_, have + i); });
  }
  return alias_;
}

// ---------------------------------------------------------------- reports

bool ExperimentReport::pass() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

Json ExperimentReport::to_json(bool with_timing) const {
  Json j;
  j["experiment"] = experiment;
  for (const auto& [k, v] : body.items()) j[k] = v;
  Json vs = Json::array();
  for (const auto& v : verdicts) {
    vs.push_back({{"name", v.name}, {"verdict", v.pass ? "PASS" : "FAIL"}, {"detail", v.detail}});
  }
  j["verdicts"] = vs;
  j["failure_rate"] = failure_rate;
  if (with_timing) j["wall_clock_seconds"] = wall_clock;
  j["pass"] = pass();
  return j;
}

Json ks_to_json(const KsResult& r, double level) {
  return {{"test", r.test}, {"D", r.D},           {"n", r.n},
          {"m", r.m},       {"p_bound", r.p_bound}, {"verdict", r.passes(level) ? "PASS" : "FAIL"}};
}

double min_uniform_cdf(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return 2.0 * u - u * u;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct AlphaData {
  double alpha;
  const std::vector<ReplicaOutcome>* outcomes;
  std::size_t failures = 0;
  double failure_rate = 0.0;
  Json failure_messages = Json::array();
};

std::vector<AlphaData> gather(ExperimentContext& ctx) {
  const ExperimentConfig& c = ctx.config();
  std::vector<AlphaData> out;
  for (std::size_t ai = 0; ai < c.alphas.size(); ++ai) {
    AlphaData d{c.alphas[ai], &ctx.replicas(ai)};
    for (const auto& o : *d.outcomes) {
      if (!o.failed) continue;
      ++d.failures;
      if (d.failure_messages.size() < 5) d.failure_messages.push_back(o.error);
    }
    d.failure_rate = static_cast<double>(d.failures) / static_cast<double>(d.outcomes->size());
    out.push_back(std::move(d));
  }
  return out;
}

template <class F>
std::vector<double> collect(const AlphaData& d, F f) {
  std::vector<double> v;
  for (const auto& o : *d.outcomes) {
    if (!o.failed) v.push_back(f(o));
  }
  return v;
}

void add_failure_verdicts(ExperimentReport& rep, const std::vector<AlphaData>& data,
                          const ExperimentConfig& c) {
  for (const auto& d : data) {
    rep.failure_rate = std::max(rep.failure_rate, d.failure_rate);
    const bool ok = d.failure_rate < c.max_failure_rate && d.failures < d.outcomes->size();
    rep.verdicts.push_back({"failure_rate_alpha_" + fmt(d.alpha), ok,
                            fmt(static_cast<double>(d.failures)) + " of " +
                                fmt(static_cast<double>(d.outcomes->size())) + " replicas failed"});
  }
}

Json trend_json(const std::vector<double>& v, const TrendResult& t, const TrendOptions& o) {
  return {{"values", v},
          {"slack", o.slack},
          {"threshold", std::isfinite(o.threshold) ? Json(o.threshold) : Json("inf")},
          {"verdict", t.pass ? "PASS" : "FAIL"},
          {"reason", t.reason}};
}

Verdict trend_verdict(const std::string& name, const std::vector<double>& v,
                      const TrendOptions& o, Json& sink) {
  if (v.size() < 3) {
    sink[name] = {{"values", v}, {"verdict", "FAIL"}, {"reason", "fewer than 3 alphas"}};
    return {name, false, "trend needs at least 3 alphas"};
  }
  const TrendResult t = trend_check(v, o);
  sink[name] = trend_json(v, t, o);
  return {name, t.pass, t.reason};
}

std::vector<double> extract(const std::vector<ReferenceSample>& ref, std::size_t n,
                            double (*f)(const ReferenceSample&)) {
  std::vector<double> v;
  v.reserve(n);
  for (std::size_t i = 0; i < n; ++i) v.push_back(f(ref[i]));
  return v;
}

constexpr double kUnbounded = std::numeric_limits<double>::infinity();

}  // namespace

ExperimentReport run_identity_check(ExperimentContext& ctx) {
  const auto start = Clock::now();
  const ExperimentConfig& c = ctx.config();
  ExperimentReport rep;
  rep.experiment = "identity";
  const std::size_t n = c.identity_samples;
  const auto& ref = ctx.reference(n);
  const auto& alias_all = ctx.alias(n);
  const std::vector<double> f =
      extract(ref, n, [](const ReferenceSample& s) { return s.functional; });
  const std::vector<double> a(alias_all.begin(), alias_all.begin() + static_cast<long>(n));
  double max_trunc = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_trunc = std::max(max_trunc, ref[i].truncation_fraction);

  const KsResult ks = ks_two_sample(f, a);
  Rng boot = make_rng(derive_seed(c.seed, kBootstrapTag, 0));
  Json tests = Json::array();
  tests.push_back(ks_to_json(ks, c.ks_level));
  rep.verdicts.push_back({"identity_ks", ks.passes(c.ks_level),
                          "D = " + fmt(ks.D) + ", p bound = " + fmt(ks.p_bound)});

  Json means = Json::object();
  auto mean_check = [&](const std::string& name, const std::vector<double>& v) {
    const double mu = mean(v);
    const double se = stddev(v) / std::sqrt(static_cast<double>(v.size()));
    const auto ci = bootstrap_mean_ci(v, 0.95, c.bootstrap_resamples, boot);
    const bool ok = std::abs(mu - 4.0) < 3.0 * se;
    means[name] = {{"mean", mu},     {"se", se},         {"target", 4.0},
                   {"ci95_lo", ci.first}, {"ci95_hi", ci.second}, {"verdict", ok ? "PASS" : "FAIL"}};
    rep.verdicts.push_back({name + "_mean", ok,
                            "mean " + fmt(mu) + " vs 4 +- " + fmt(3.0 * se)});
  };
  mean_check("functional", f);
  mean_check("alias", a);
  rep.verdicts.push_back({"truncation_fraction", max_trunc <= 1e-3,
                          "largest truncation bound / value = " + fmt(max_trunc)});

  rep.body["samples"] = n;
  rep.body["tests"] = tests;
  rep.body["means"] = means;
  rep.body["max_truncation_fraction"] = max_trunc;
  rep.samples["identity_functional"] = f;
  rep.samples["identity_alias"] = a;
  rep.wall_clock = seconds_since(start);
  return rep;
}

ExperimentReport run_sup_localtime(ExperimentContext& ctx) {
  const auto start = Clock::now();
  const ExperimentConfig& c = ctx.config();
  ExperimentReport rep;
  rep.experiment = "sup-localtime";
  const auto data = gather(ctx);
  const auto& ref = ctx.reference(c.reference_samples);
  const std::vector<double> inv = extract(ref, c.reference_samples,
                                          [](const ReferenceSample& s) { return 1.0 / s.functional; });
  std::vector<double> inv_alias;
  if (c.alias_check) {
    const auto& alias = ctx.alias(c.reference_samples);
    for (std::size_t i = 0; i < c.reference_samples; ++i) inv_alias.push_back(1.0 / alias[i]);
  }

  Json per_alpha = Json::array();
  std::vector<double> d_ref;
  std::vector<double> d_alias;
  for (const auto& d : data) {
    const auto v = collect(d, [](const ReplicaOutcome& o) { return o.sup_ratio; });
    const auto fav = collect(d, [](const ReplicaOutcome& o) { return std::abs(o.favorite_offset); });
    Json e{{"alpha", d.alpha}, {"replicas", d.outcomes->size()}, {"failures", d.failures},
           {"failure_examples", d.failure_messages}};
    if (!v.empty()) {
      const KsResult ks = ks_two_sample(v, inv);
      d_ref.push_back(ks.D);
      e["ks_reference"] = ks_to_json(ks, c.ks_level);
      e["median_sup_ratio"] = median(v);
      e["median_abs_favorite_offset"] = median(fav);
      if (c.alias_check) {
        const KsResult ka = ks_two_sample(v, inv_alias);
        d_alias.push_back(ka.D);
        e["ks_alias"] = ks_to_json(ka, c.ks_level);
      }
    }
    rep.samples["sup_localtime_alpha_" + fmt(d.alpha)] = v;
    per_alpha.push_back(e);
  }
  rep.body["per_alpha"] = per_alpha;
  rep.body["reference_median"] = median(inv);
  Json trends = Json::object();
  const TrendOptions opts{c.slack, c.ks_cap};
  const Verdict main = trend_verdict("ks_trend", d_ref, opts, trends);
  rep.verdicts.push_back(main);
  if (c.alias_check) {
    const Verdict alt = trend_verdict("ks_trend_alias", d_alias, opts, trends);
    rep.verdicts.push_back({"alias_consistency", alt.pass == main.pass,
                            std::string("reference verdict ") + (main.pass ? "PASS" : "FAIL") +
                                ", alias verdict " + (alt.pass ? "PASS" : "FAIL")});
  }
  rep.body["trends"] = trends;
  add_failure_verdicts(rep, data, c);
  rep.samples["reference_inverse_functional"] = inv;
  rep.wall_clock = seconds_since(start);
  return rep;
}

ExperimentReport run_profile_marginals(ExperimentContext& ctx) {
  const auto start = Clock::now();
  const ExperimentConfig& c = ctx.config();
  ExperimentReport rep;
  rep.experiment = "profile";
  const auto data = gather(ctx);
  const auto& ref = ctx.reference(c.reference_samples);

  Json per_alpha = Json::array();
  std::vector<std::vector<double>> d_by_x(c.xs.size());
  for (const auto& d : data) {
    Json e{{"alpha", d.alpha}, {"replicas", d.outcomes->size()}, {"failures", d.failures}};
    Json per_x = Json::array();
    for (std::size_t xi = 0; xi < c.xs.size(); ++xi) {
      const auto v = collect(d, [xi](const ReplicaOutcome& o) { return o.profile[xi]; });
      std::vector<double> r;
      for (std::size_t i = 0; i < c.reference_samples; ++i) r.push_back(ref[i].profile[xi]);
      if (v.empty()) continue;
      const KsResult ks = ks_two_sample(v, r);
      d_by_x[xi].push_back(ks.D);
      per_x.push_back({{"x", c.xs[xi]}, {"ks", ks_to_json(ks, c.ks_level)}, {"median", median(v)},
                       {"reference_median", median(r)}});
      rep.samples["profile_alpha_" + fmt(d.alpha) + "_x_" + fmt(c.xs[xi])] = v;
    }
    e["per_x"] = per_x;
    const auto norm = collect(d, [](const ReplicaOutcome& o) { return o.normalization; });
    if (!norm.empty()) {
      const double mu = mean(norm);
      e["normalization_mean"] = mu;
      rep.verdicts.push_back({"normalization_alpha_" + fmt(d.alpha),
                              std::abs(mu - 1.0) <= c.normalization_tol,
                              "mean of sum(L dx)/t = " + fmt(mu)});
    }
    per_alpha.push_back(e);
  }
  rep.body["per_alpha"] = per_alpha;

  Json trends = Json::object();
  for (std::size_t xi = 0; xi < c.xs.size(); ++xi) {
    rep.verdicts.push_back(trend_verdict("ks_trend_x_" + fmt(c.xs[xi]), d_by_x[xi],
                                         TrendOptions{c.slack, kUnbounded}, trends));
  }
  rep.body["trends"] = trends;

  // At x = 0 the profile should track the sup statistic once the favorite
  // point has settled at the valley bottom.
  const auto zero = std::find(c.xs.begin(), c.xs.end(), 0.0);
  if (zero != c.xs.end() && !data.empty()) {
    const auto xi = static_cast<std::size_t>(std::distance(c.xs.begin(), zero));
    const auto& top = data.back();
    const auto p0 = collect(top, [xi](const ReplicaOutcome& o) { return o.profile[xi]; });
    const auto sup = collect(top, [](const ReplicaOutcome& o) { return o.sup_ratio; });
    if (!p0.empty()) {
      const double rel = std::abs(median(p0) / median(sup) - 1.0);
      rep.body["median_agreement"] = {{"alpha", top.alpha},
                                      {"median_profile_at_0", median(p0)},
                                      {"median_sup_ratio", median(sup)},
                                      {"relative_gap", rel}};
      rep.verdicts.push_back({"median_agreement", rel <= c.median_band,
                              "relative gap " + fmt(rel) + " at alpha " + fmt(top.alpha)});
    }
  }
  add_failure_verdicts(rep, data, c);
  rep.wall_clock = seconds_since(start);
  return rep;
}

ExperimentReport run_env_functional_approx(ExperimentContext& ctx) {
  const auto start = Clock::now();
  const ExperimentConfig& c = ctx.config();
  ExperimentReport rep;
  rep.experiment = "env-approx";
  const auto data = gather(ctx);

  Json per_alpha = Json::array();
  std::vector<std::vector<double>> misses(c.deltas.size());
  for (const auto& d : data) {
    const auto v = collect(d, [](const ReplicaOutcome& o) { return o.env_sup; });
    Json fr = Json::object();
    for (std::size_t k = 0; k < c.deltas.size(); ++k) {
      const double frac =
          v.empty() ? 0.0
                    : static_cast<double>(std::count_if(v.begin(), v.end(),
                                                        [&](double s) { return s <= c.deltas[k]; })) /
                          static_cast<double>(v.size());
      misses[k].push_back(1.0 - frac);
      fr[fmt(c.deltas[k])] = frac;
    }
    fr["inf"] = v.empty() ? 0.0 : 1.0;
    per_alpha.push_back({{"alpha", d.alpha},
                         {"replicas", d.outcomes->size()},
                         {"failures", d.failures},
                         {"median_sup_discrepancy", v.empty() ? Json(nullptr) : Json(median(v))},
                         {"fraction_within", fr}});
    rep.samples["env_sup_alpha_" + fmt(d.alpha)] = v;
  }
  rep.body["per_alpha"] = per_alpha;
  // "fraction nondecreasing" is checked as "miss rate nonincreasing".
  Json trends = Json::object();
  for (std::size_t k = 0; k < c.deltas.size(); ++k) {
    const bool main = c.deltas[k] == c.delta_check;
    const TrendOptions o{c.slack, main ? 1.0 - c.fraction_threshold : kUnbounded};
    rep.verdicts.push_back(
        trend_verdict("miss_rate_trend_delta_" + fmt(c.deltas[k]), misses[k], o, trends));
  }
  rep.body["trends"] = trends;
  add_failure_verdicts(rep, data, c);
  rep.wall_clock = seconds_since(start);
  return rep;
}

ExperimentReport run_exponent_law(ExperimentContext& ctx) {
  const auto start = Clock::now();
  const ExperimentConfig& c = ctx.config();
  ExperimentReport rep;
  rep.experiment = "exponent";
  const auto data = gather(ctx);

  Json per_alpha = Json::array();
  std::vector<double> ds;
  double top_clamp = 1.0;
  for (const auto& d : data) {
    std::vector<double> v;
    std::size_t clamped = 0;
    std::size_t zeros = 0;
    for (const auto& o : *d.outcomes) {
      if (o.failed) continue;
      if (o.exponent_zero) ++zeros;
      if (o.exponent_zero || o.exponent < 0.0 || o.exponent > 1.0) ++clamped;
      v.push_back(std::clamp(o.exponent, 0.0, 1.0));
    }
    Json e{{"alpha", d.alpha}, {"replicas", d.outcomes->size()}, {"failures", d.failures}};
    if (!v.empty()) {
      const KsResult ks = ks_one_sample(v, min_uniform_cdf);
      ds.push_back(ks.D);
      top_clamp = static_cast<double>(clamped) / static_cast<double>(v.size());
      e["ks"] = ks_to_json(ks, c.ks_level);
      e["clamp_rate"] = top_clamp;
      e["zero_local_time"] = zeros;
      e["mean"] = mean(v);
    }
    per_alpha.push_back(e);
    rep.samples["exponent_alpha_" + fmt(d.alpha)] = v;
  }
  rep.body["per_alpha"] = per_alpha;
  rep.body["x"] = c.exponent_x;
  Json trends = Json::object();
  rep.verdicts.push_back(trend_verdict("ks_trend", ds, TrendOptions{c.slack, kUnbounded}, trends));
  rep.body["trends"] = trends;
  rep.verdicts.push_back({"clamp_rate_top_alpha", top_clamp < c.max_clamp_rate,
                          "clamp rate " + fmt(top_clamp) + " at the largest alpha"});
  add_failure_verdicts(rep, data, c);
  rep.wall_clock = seconds_since(start);
  return rep;
}

ExperimentReport run_position_density(ExperimentContext& ctx) {
  const auto start = Clock::now();
  const ExperimentConfig& c = ctx.config();
  ExperimentReport rep;
  rep.experiment = "position";
  const auto data = gather(ctx);
  const auto& ref = ctx.reference(c.reference_samples);
  const std::vector<double> draws = extract(ref, c.reference_samples,
                                            [](const ReferenceSample& s) { return s.position; });
  Json per_alpha = Json::array();
  std::vector<double> ds;
  for (const auto& d : data) {
    const auto v = collect(d, [](const ReplicaOutcome& o) { return o.position_offset; });
    Json e{{"alpha", d.alpha}, {"replicas", d.outcomes->size()}, {"failures", d.failures}};
    if (!v.empty()) {
      const KsResult ks = ks_two_sample(v, draws);
      ds.push_back(ks.D);
      e["ks"] = ks_to_json(ks, c.ks_level);
      e["median_abs_offset"] =
          median(collect(d, [](const ReplicaOutcome& o) { return std::abs(o.position_offset); }));
    }
    per_alpha.push_back(e);
    rep.samples["position_alpha_" + fmt(d.alpha)] = v;
  }
  rep.body["per_alpha"] = per_alpha;
  Json trends = Json::object();
  rep.verdicts.push_back(trend_verdict("ks_trend", ds, TrendOptions{c.slack, kUnbounded}, trends));
  rep.body["trends"] = trends;
  rep.samples["reference_position"] = draws;
  add_failure_verdicts(rep, data, c);
  rep.wall_clock = seconds_since(start);
  return rep;
}

std::vector<ExperimentReport> run_experiments(const std::string& name, ExperimentContext& ctx) {
  using Runner = ExperimentReport (*)(ExperimentContext&);
  static const std::vector<std::pair<std::string, Runner>> table{
      {"identity", run_identity_check},       {"sup-localtime", run_sup_localtime},
      {"profile", run_profile_marginals},     {"env-approx", run_env_functional_approx},
      {"exponent", run_exponent_law},         {"position", run_position_density}};
  std::vector<ExperimentReport> out;
  for (const auto& [n, f] : table) {
    if (name == "all" || name == n) out.push_back(f(ctx));
  }
  if (out.empty()) throw ConfigError("unknown experiment: " + name);
  return out;
}

ExperimentReport run_identity_check(const ExperimentConfig& c) {
  ExperimentContext ctx(c);
  return run_identity_check(ctx);
}
ExperimentReport run_sup_localtime(const ExperimentConfig& c) {
  ExperimentContext ctx(c);
  return run_sup_localtime(ctx);
}
ExperimentReport run_profile_marginals(const ExperimentConfig& c) {
  ExperimentContext ctx(c);
  return run_profile_marginals(ctx);
}
ExperimentReport run_env_functional_approx(const ExperimentConfig& c) {
  ExperimentContext ctx(c);
  return run_env_functional_approx(ctx);
}
ExperimentReport run_exponent_law(const ExperimentConfig& c) {
  ExperimentContext ctx(c);
  return run_exponent_law(ctx);
}
ExperimentReport run_position_density(const ExperimentConfig& c) {
  ExperimentContext ctx(c);
  return run_position_density(ctx);
}

}  // namespace brox
