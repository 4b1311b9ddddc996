#pragma once

#include "rci/datagen.hpp"
#include "rci/estimators.hpp"
#include "rci/noise.hpp"
#include "rci/solver.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace rci {

struct DataSource {
  std::optional<std::string> path; // observed CSV
  std::optional<DgpSpec> dgp;      // or a generator
  std::string covariates_csv;      // ihdp_mediation input
};

// Noise for `generate`: an explicit model, or a level of a schedule.
struct NoiseChoice {
  std::optional<NoiseModel> model;
  std::optional<NoiseSchedule> schedule;
  int level = 0;
  NoiseModel resolve() const;
};

struct BenchmarkConfig {
  NoiseSchedule schedule = NoiseSchedule::kang_schafer;
  std::vector<int> levels;          // default: every level of the schedule
  std::vector<double> gamma_table;  // gamma for level l is gamma_table[l - 1]
  int datasets = 10;
  int replicates = 10;
};

struct TvBoundConfig {
  std::string method; // huber | misclassification | tilting | pinsker
  double rate = 0.0;
  std::vector<double> p, q;
  std::vector<double> theta, theta_tilde;
  std::string samples_p, samples_q, column;
  int bins = 50;
};

struct RunConfig {
  EstimatorSpec estimator;
  SolverConfig solver;
  DataSource data;
  std::optional<NoiseChoice> noise;
  BenchmarkConfig benchmark;
  std::optional<TvBoundConfig> tv_bound;
  std::optional<std::string> trace_path;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string output;

  void validate() const;
};

// Strict: unknown keys and wrong types are ParseErrors naming the key path.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);

} // namespace rci
