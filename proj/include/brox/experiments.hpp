#pragma once

// Batch experiments: each one samples replicas of the diffusion (or of the
// limit objects), compares empirical laws with reference laws, and reduces the
// comparison to PASS/FAIL verdicts backed by recorded statistics.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "brox/bessel.hpp"
#include "brox/errors.hpp"
#include "brox/stats.hpp"
#include "json.hpp"

namespace brox {

using Json = nlohmann::ordered_json;

struct ExperimentConfig {
  std::string experiment = "all";
  std::vector<double> alphas{5.0, 8.0, 11.0};
  std::size_t replicas = 300;
  double r = 0.5;
  double K = 2.0;
  double env_step = 0.05;  // grid of the unscaled potential
  std::vector<double> deltas{0.25, 0.5, 1.0};
  double delta_check = 0.5;
  std::vector<double> xs{-1.0, 0.0, 1.0};
  double exponent_x = 0.0;

  std::size_t identity_samples = 5000;
  std::size_t reference_samples = 5000;
  double bessel_dt = 0.01;
  double besq_dt = 1e-5;
  HorizonRule horizon{};
  std::size_t bootstrap_resamples = 1000;

  double ks_level = 0.01;
  double ks_cap = 0.15;
  double slack = 1.1;
  double fraction_threshold = 0.6;
  double max_clamp_rate = 0.10;
  double max_failure_rate = 0.05;
  double median_band = 0.20;
  double normalization_tol = 0.02;
  bool alias_check = true;

  std::uint64_t chain_max_steps = 4'000'000'000ULL;
  int max_widenings = 12;

  std::uint64_t seed = 20240917;
  unsigned workers = 1;
  std::string out_dir = ".";
};

/// Missing keys keep their defaults; unknown keys and invalid values throw
/// ConfigError.
ExperimentConfig config_from_json(const Json& j, ExperimentConfig base = {});
Json config_to_json(const ExperimentConfig& c);
void validate(const ExperimentConfig& c);

/// Everything measured on one replica, in the unscaled frame at t = e^alpha.
struct ReplicaOutcome {
  bool failed = false;
  std::string error;
  double valley_bottom = 0.0;     // m_alpha
  double sup_ratio = 0.0;         // L*(t) / t
  double favorite_offset = 0.0;   // m*(t) - m_alpha
  std::vector<double> profile;    // L(t, m_alpha + x) / t for x in xs
  double env_sup = 0.0;           // sup over |x| <= K of |L/t / Rbar - 1|
  double exponent = 0.0;          // log L(t, x0) / alpha, 0 when L = 0
  bool exponent_zero = false;
  double position_offset = 0.0;   // X(t) - m_alpha
  double normalization = 0.0;     // sum of L * step over t
  int widenings = 0;
  std::uint64_t steps = 0;
};

/// One replica at alpha: environment, valley, knot chain up to the scaled
/// horizon, statistics mapped back to the unscaled frame.
ReplicaOutcome run_replica(const ExperimentConfig& c, std::size_t alpha_index,
                           std::size_t replica_index);

struct ReferenceSample {
  double functional;               // int e^{-R}
  double truncation_fraction;      // truncation_bound / functional
  std::vector<double> profile;     // e^{-R(x)} / int e^{-R} for x in xs
  double position;                 // draw from that density
};

ReferenceSample reference_sample(const ExperimentConfig& c, std::size_t index);
double alias_sample(const ExperimentConfig& c, std::size_t index);

/// Runs f(0..n-1) on `workers` threads; f must write only to its own slot.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& f);

/// Lazily computed replica and reference sets shared by the experiments.
class ExperimentContext {
 public:
  explicit ExperimentContext(ExperimentConfig c);
  const ExperimentConfig& config() const { return config_; }

  const std::vector<ReplicaOutcome>& replicas(std::size_t alpha_index);
  const std::vector<ReferenceSample>& reference(std::size_t count);
  const std::vector<double>& alias(std::size_t count);

 private:
  ExperimentConfig config_;
  std::map<std::size_t, std::vector<ReplicaOutcome>> replicas_;
  std::vector<ReferenceSample> reference_;
  std::vector<double> alias_;
};

struct Verdict {
  std::string name;
  bool pass;
  std::string detail;
};

struct ExperimentReport {
  std::string experiment;
  Json body = Json::object();
  std::vector<Verdict> verdicts;
  double failure_rate = 0.0;
  double wall_clock = 0.0;
  /// Named sample sets for CSV export.
  std::map<std::string, std::vector<double>> samples;

  bool pass() const;
  /// Wall clock is left out when `with_timing` is false.
  Json to_json(bool with_timing = true) const;
};

Json ks_to_json(const KsResult& r, double level);

ExperimentReport run_identity_check(ExperimentContext& ctx);
ExperimentReport run_sup_localtime(ExperimentContext& ctx);
ExperimentReport run_profile_marginals(ExperimentContext& ctx);
ExperimentReport run_env_functional_approx(ExperimentContext& ctx);
ExperimentReport run_exponent_law(ExperimentContext& ctx);
ExperimentReport run_position_density(ExperimentContext& ctx);

/// Runs one named experiment, or all of them for "all".
std::vector<ExperimentReport> run_experiments(const std::string& name, ExperimentContext& ctx);

/// Convenience overloads with a private context.
ExperimentReport run_identity_check(const ExperimentConfig& c);
ExperimentReport run_sup_localtime(const ExperimentConfig& c);
ExperimentReport run_profile_marginals(const ExperimentConfig& c);
ExperimentReport run_env_functional_approx(const ExperimentConfig& c);
ExperimentReport run_exponent_law(const ExperimentConfig& c);
ExperimentReport run_position_density(const ExperimentConfig& c);

/// Exponent-law reference CDF: 2u - u^2 on [0, 1].
double min_uniform_cdf(double u);

// io.cpp
/// Writes report.json and one samples_<name>.csv per sample set into `dir`.
void write_outputs(const std::string& dir, const ExperimentConfig& c,
                   const std::vector<ExperimentReport>& reports);
/// Single-column CSV preceded by a '#'-prefixed JSON metadata line.
void write_sample_csv(const std::string& path, const std::string& column, const Json& meta,
                      const std::vector<double>& values);
Json combined_report(const ExperimentConfig& c, const std::vector<ExperimentReport>& reports,
                     bool with_timing = true);

}  // namespace brox
