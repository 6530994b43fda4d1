#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "brox/experiments.hpp"

namespace brox {

Json combined_report(const ExperimentConfig& c, const std::vector<ExperimentReport>& reports,
                     bool with_timing) {
  Json j;
  j["config"] = config_to_json(c);
  j["provenance"] = {{"master_seed", c.seed},
                     {"generator", "mt19937_64 seeded through seed_seq"},
                     {"replica_seed", "splitmix64 chain of (master, alpha_index, replica_index)"},
                     {"workers", c.workers}};
  Json list = Json::array();
  bool pass = true;
  double failure = 0.0;
  for (const auto& r : reports) {
    list.push_back(r.to_json(with_timing));
    pass = pass && r.pass();
    failure = std::max(failure, r.failure_rate);
  }
  j["experiments"] = list;
  j["max_failure_rate"] = failure;
  j["pass"] = pass && failure < c.max_failure_rate;
  return j;
}

void write_sample_csv(const std::string& path, const std::string& column, const Json& meta,
                      const std::vector<double>& values) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# " << meta.dump() << "\n" << column << "\n";
  char buf[32];
  for (double v : values) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out << buf;
  }
}

void write_outputs(const std::string& dir, const ExperimentConfig& c,
                   const std::vector<ExperimentReport>& reports) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "report.json");
    if (!out) throw std::runtime_error("cannot write report.json in " + dir);
    out << combined_report(c, reports).dump(2) << "\n";
  }
  for (const auto& r : reports) {
    for (const auto& [name, values] : r.samples) {
      const Json meta{{"experiment", r.experiment},
                      {"sample", name},
                      {"seed", c.seed},
                      {"bessel_dt", c.bessel_dt},
                      {"besq_dt", c.besq_dt},
                      {"cutoff", c.horizon.cutoff},
                      {"env_step", c.env_step},
                      {"count", values.size()}};
      write_sample_csv((fs::path(dir) / ("samples_" + name + ".csv")).string(), name, meta, values);
    }
  }
}

}  // namespace brox
