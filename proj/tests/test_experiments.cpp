#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "brox/experiments.hpp"
#include "doctest.h"

using namespace brox;

namespace {

ExperimentConfig tiny() {
  ExperimentConfig c;
  c.alphas = {1.5, 2.0, 2.5};
  c.replicas = 16;
  c.K = 0.5;
  c.xs = {-0.5, 0.0, 0.5};
  c.identity_samples = 20;
  c.reference_samples = 20;
  c.bessel_dt = 0.05;
  c.besq_dt = 1e-3;
  c.bootstrap_resamples = 50;
  c.seed = 77;
  return c;
}

// Parse plus validation, as the CLI does.
bool throws_config(const Json& j) {
  try {
    validate(config_from_json(j));
  } catch (const ConfigError&) {
    return true;
  }
  return false;
}

}  // namespace

TEST_CASE("config parsing rejects bad input") {
  CHECK(throws_config({{"no_such_key", 1}}));
  CHECK(throws_config({{"alphas", {5.0, 5.0, 8.0}}}));
  CHECK(throws_config({{"alphas", {8.0, 5.0}}}));
  CHECK(throws_config({{"alphas", {-1.0, 5.0}}}));
  CHECK(throws_config({{"r", 1.0}}));
  CHECK(throws_config({{"r", 0.0}}));
  CHECK(throws_config({{"replicas", 0}}));
  CHECK(throws_config({{"experiment", "nonsense"}}));
  CHECK(throws_config({{"delta_check", 0.3}}));
  CHECK(throws_config({{"K", 0.123}}));
  CHECK(throws_config({{"workers", 0}}));
  CHECK(throws_config({{"alphas", "five"}}));
  CHECK(throws_config({{"horizon", {{"bogus", 1}}}}));
  CHECK_FALSE(throws_config(Json::object()));
}

TEST_CASE("config survives a JSON roundtrip") {
  ExperimentConfig c = tiny();
  c.horizon.cutoff = 12.0;
  c.alias_check = false;
  const Json j = config_to_json(c);
  const ExperimentConfig back = config_from_json(j);
  CHECK(config_to_json(back) == j);
  CHECK(back.alphas == c.alphas);
  CHECK(back.horizon.cutoff == 12.0);
  CHECK_FALSE(back.alias_check);

  const ExperimentConfig partial = config_from_json({{"replicas", 7}});
  CHECK(partial.replicas == 7);
  CHECK(partial.alphas == ExperimentConfig{}.alphas);
}

TEST_CASE("exponent reference cdf") {
  CHECK(min_uniform_cdf(-1.0) == 0.0);
  CHECK(min_uniform_cdf(0.0) == 0.0);
  CHECK(min_uniform_cdf(0.5) == 0.75);
  CHECK(min_uniform_cdf(1.0) == 1.0);
  CHECK(min_uniform_cdf(3.0) == 1.0);
}

TEST_CASE("parallel_for visits every index once") {
  for (unsigned workers : {1u, 3u, 8u}) {
    std::vector<std::atomic<int>> hits(97);
    parallel_for(hits.size(), workers, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) CHECK(h.load() == 1);
  }
  CHECK_THROWS_AS(parallel_for(10, 2,
                               [](std::size_t i) {
                                 if (i == 5) throw DomainError("boom");
                               }),
                  DomainError);
}

TEST_CASE("replicas are reproducible and well formed") {
  const ExperimentConfig c = tiny();
  for (std::size_t ai = 0; ai < c.alphas.size(); ++ai) {
    for (std::size_t k = 0; k < 4; ++k) {
      const ReplicaOutcome a = run_replica(c, ai, k);
      const ReplicaOutcome b = run_replica(c, ai, k);
      CHECK(a.failed == b.failed);
      if (a.failed) continue;
      CHECK(a.sup_ratio == b.sup_ratio);
      CHECK(a.profile == b.profile);
      CHECK(a.position_offset == b.position_offset);
      CHECK(a.sup_ratio > 0.0);
      CHECK(a.env_sup >= 0.0);
      CHECK(a.normalization == doctest::Approx(1.0).epsilon(0.05));
      REQUIRE(a.profile.size() == c.xs.size());
      for (double p : a.profile) CHECK(p <= a.sup_ratio);
    }
  }
  // Different replica indices draw different environments.
  CHECK(run_replica(c, 0, 0).valley_bottom != run_replica(c, 0, 1).valley_bottom);
}

TEST_CASE("a step budget that is too small fails the replica and is recorded") {
  ExperimentConfig c = tiny();
  c.chain_max_steps = 5;
  const ReplicaOutcome o = run_replica(c, 2, 0);
  CHECK(o.failed);
  CHECK_FALSE(o.error.empty());

  const ExperimentReport rep = run_position_density(c);
  CHECK(rep.failure_rate == 1.0);
  CHECK_FALSE(rep.pass());
}

TEST_CASE("a huge tolerance leaves no misses") {
  ExperimentConfig c = tiny();
  c.deltas = {1e9};
  c.delta_check = 1e9;
  const ExperimentReport rep = run_env_functional_approx(c);
  for (const auto& e : rep.body["per_alpha"]) CHECK(e["fraction_within"]["1e+09"] == 1.0);
}

TEST_CASE("reports do not depend on the worker count") {
  ExperimentConfig c = tiny();
  ExperimentContext one(c);
  const auto a = run_experiments("all", one);
  ExperimentContext again(c);
  const auto b = run_experiments("all", again);
  c.workers = 3;
  ExperimentContext three(c);
  const auto d = run_experiments("all", three);
  REQUIRE(a.size() == 6);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].to_json(false) == b[k].to_json(false));
    CHECK(a[k].to_json(false) == d[k].to_json(false));
  }
  CHECK_THROWS_AS(run_experiments("bogus", one), ConfigError);
}

TEST_CASE("outputs: report and sample files") {
  const ExperimentConfig c = tiny();
  ExperimentContext ctx(c);
  const auto reps = run_experiments("identity", ctx);
  const auto dir = std::filesystem::temp_directory_path() / "brox_test_outputs";
  std::filesystem::remove_all(dir);
  write_outputs(dir.string(), c, reps);
  REQUIRE(std::filesystem::exists(dir / "report.json"));
  std::ifstream in(dir / "report.json");
  const Json j = Json::parse(in);
  CHECK(j["config"]["seed"] == 77);
  CHECK(j["experiments"].size() == 1);
  CHECK(j["experiments"][0]["experiment"] == "identity");
  CHECK(j.contains("pass"));

  std::ifstream csv(dir / "samples_identity_functional.csv");
  std::string first, second;
  std::getline(csv, first);
  std::getline(csv, second);
  REQUIRE(first.rfind("# {", 0) == 0);
  const Json meta = Json::parse(first.substr(2));
  CHECK(meta["count"] == 20);
  CHECK(meta["seed"] == 77);
  CHECK(second == "identity_functional");
  int rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  CHECK(rows == 20);
  std::filesystem::remove_all(dir);
}
