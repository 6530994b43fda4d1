// Batch front end for the experiments.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "brox/experiments.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::string out;
};

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("--seed", f.seed, "master seed (overrides the config)");
  sub->add_option("--workers", f.workers, "worker threads (overrides the config)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--out", f.out, "output directory (overrides the config)");
}

brox::ExperimentConfig load(const Flags& f, const std::string& experiment) {
  brox::ExperimentConfig c;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    brox::Json j;
    try {
      j = brox::Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw brox::ConfigError(std::string("cannot parse ") + f.config + ": " + e.what());
    }
    c = brox::config_from_json(j);
  }
  c.experiment = experiment;
  if (f.seed) c.seed = *f.seed;
  if (f.workers) c.workers = *f.workers;
  if (!f.out.empty()) c.out_dir = f.out;
  brox::validate(c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Brox diffusion simulations and limit-law checks"};
  app.require_subcommand(1, 1);
  Flags flags;
  const char* names[][2] = {
      {"identity", "int e^{-R} versus 4 tau + 4 tau' (two-sample KS and means)"},
      {"sup-localtime", "law of L*(t)/t versus 1 / int e^{-R}"},
      {"profile", "local-time marginals near the valley bottom versus e^{-R(x)} / int e^{-R}"},
      {"env-approx", "sup discrepancy between local time and the environment density"},
      {"exponent", "log L(t, x) / log t versus min(U, U')"},
      {"position", "X(t) - m versus draws from e^{-R} / int e^{-R}"},
      {"all", "every experiment above, sharing replicas"}};
  for (const auto& n : names) add_flags(app.add_subcommand(n[0], n[1]), flags);
  CLI11_PARSE(app, argc, argv);
  const std::string experiment = app.get_subcommands().front()->get_name();

  try {
    const brox::ExperimentConfig c = load(flags, experiment);
    brox::ExperimentContext ctx(c);
    const auto reports = brox::run_experiments(experiment, ctx);
    brox::write_outputs(c.out_dir, c, reports);
    bool pass = true;
    for (const auto& r : reports) {
      for (const auto& v : r.verdicts) {
        std::printf("%-14s %-34s %s  %s\n", r.experiment.c_str(), v.name.c_str(),
                    v.pass ? "PASS" : "FAIL", v.detail.c_str());
      }
      pass = pass && r.pass() && r.failure_rate < c.max_failure_rate;
    }
    std::printf("report: %s/report.json\n", c.out_dir.c_str());
    return pass ? 0 : 1;
  } catch (const brox::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
