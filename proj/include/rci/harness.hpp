#pragma once

#include "rci/config.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace rci {

// One (level, dataset, replicate) trial of the coverage experiment.
struct ReplicateRecord {
  int level = 0;
  int dataset = 0;
  int replicate = 0;
  double gamma = 0.0;
  double true_ate = 0.0;
  double tau_lower = 0.0;
  double tau_upper = 0.0;
  double naive = 0.0;
  bool feasible = false;
  bool covers = false;
  bool naive_covers = false; // the dataset's naive interval covers true_ate
  bool ok = true;
  std::string error;
};

struct CoverageRow {
  int level = 0;
  double gamma = 0.0;
  double noise_mean = 0.0;
  double noise_sd = 0.0;
  std::string method; // "rci" or "naive"
  double coverage = 0.0;
  double standard_error = 0.0;
  double mean_width = 0.0;
  int trials = 0;
  int failed = 0;
};

struct CoverageReport {
  std::string estimator;
  std::string dgp;
  std::vector<CoverageRow> rows;
  std::vector<ReplicateRecord> replicates; // sorted by (level, dataset, replicate)

  const CoverageRow& row(int level, const std::string& method) const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
  std::string replicates_jsonl() const;
};

// Naive interval over a dataset's noisy-replicate estimates:
// mean +- 1.96 sd / sqrt(R).
std::pair<double, double> naive_interval(const std::vector<double>& estimates);

CoverageReport run_benchmark(const RunConfig& config);

// Recomputes coverage rows from per-replicate records (used to cross-check
// the report against its own log).
std::vector<CoverageRow> aggregate(const std::vector<ReplicateRecord>& records,
                                   const std::vector<std::pair<int, GaussianNoise>>& levels);

nlohmann::json to_json(const BoundResult& r, const SolverConfig& config);
nlohmann::json to_json(const GammaEstimate& g);

} // namespace rci
