#include "rci/harness.hpp"
#include "rci/errors.hpp"
#include "rci/random.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace rci {

using nlohmann::json;

namespace {

constexpr std::uint64_t kDatasetStream = 0xda7a;
constexpr std::uint64_t kNoiseStream = 0x4015e;

} // namespace

std::pair<double, double> naive_interval(const std::vector<double>& estimates) {
  if (estimates.empty()) throw InvalidArgument("naive interval needs at least one estimate");
  const double r = static_cast<double>(estimates.size());
  double mean = 0.0;
  for (double e : estimates) mean += e;
  mean /= r;
  double ss = 0.0;
  for (double e : estimates) ss += (e - mean) * (e - mean);
  const double sd = estimates.size() > 1 ? std::sqrt(ss / (r - 1.0)) : 0.0;
  const double half = 1.96 * sd / std::sqrt(r);
  return {mean - half, mean + half};
}

const CoverageRow& CoverageReport::row(int level, const std::string& method) const {
  for (const auto& r : rows)
    if (r.level == level && r.method == method) return r;
  throw InvalidArgument("no coverage row for level " + std::to_string(level) + " / " + method);
}

std::vector<CoverageRow> aggregate(const std::vector<ReplicateRecord>& records,
                                   const std::vector<std::pair<int, GaussianNoise>>& levels) {
  std::vector<CoverageRow> rows;
  for (const auto& [level, noise] : levels) {
    CoverageRow rci{level, 0.0, noise.mean, noise.sd, "rci"};
    CoverageRow naive{level, 0.0, noise.mean, noise.sd, "naive"};
    int covered = 0, naive_covered = 0;
    double width = 0.0;
    for (const auto& rec : records) {
      if (rec.level != level) continue;
      rci.gamma = naive.gamma = rec.gamma;
      if (!rec.ok) {
        ++rci.failed;
        ++naive.failed;
        continue;
      }
      ++rci.trials;
      ++naive.trials;
      covered += rec.covers;
      naive_covered += rec.naive_covers;
      width += rec.tau_upper - rec.tau_lower;
    }
    auto fill = [](CoverageRow& row, int hits) {
      row.coverage = row.trials > 0 ? static_cast<double>(hits) / row.trials : 0.0;
      row.standard_error =
          row.trials > 0 ? std::sqrt(row.coverage * (1.0 - row.coverage) / row.trials) : 0.0;
    };
    fill(rci, covered);
    fill(naive, naive_covered);
    rci.mean_width = rci.trials > 0 ? width / rci.trials : 0.0;
    rows.push_back(rci);
    rows.push_back(naive);
  }
  return rows;
}

CoverageReport run_benchmark(const RunConfig& config) {
  config.validate();
  if (!config.data.dgp) throw ParseError("config $.data.dgp: the benchmark needs a generator");
  const DgpSpec& base = *config.data.dgp;
  const auto& bench = config.benchmark;
  const auto schedule = noise_levels(bench.schedule);
  std::vector<int> level_ids = bench.levels;
  if (level_ids.empty())
    for (int l = 1; l <= static_cast<int>(schedule.size()); ++l) level_ids.push_back(l);
  const std::vector<double> gammas =
      bench.gamma_table.empty() ? default_gamma_table() : bench.gamma_table;
  for (int l : level_ids)
    if (l > static_cast<int>(gammas.size()))
      throw ParseError("config $.benchmark.gamma_table: no gamma for level " + std::to_string(l));

  const int n_data = bench.datasets, n_rep = bench.replicates;
  const int workers = std::max(1, config.workers);

  // Noiseless datasets are shared across noise levels.
  std::vector<LabeledDataset> datasets(n_data);
  std::vector<std::string> gen_errors(n_data);
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (int d = 0; d < n_data; ++d) {
    try {
      DgpSpec spec = base;
      spec.seed = derive_seed(config.seed, kDatasetStream, static_cast<std::uint64_t>(d), base.seed);
      datasets[d] = generate(spec, config.data.covariates_csv);
    } catch (const std::exception& e) {
      gen_errors[d] = e.what();
    }
  }
  for (const auto& e : gen_errors)
    if (!e.empty()) throw NumericalFailure("data generation failed: " + e);

  struct Task {
    int level, dataset, replicate;
  };
  std::vector<Task> tasks;
  for (int l : level_ids)
    for (int d = 0; d < n_data; ++d)
      for (int r = 0; r < n_rep; ++r) tasks.push_back({l, d, r});

  std::vector<ReplicateRecord> records(tasks.size());
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const Task& task = tasks[k];
    ReplicateRecord& rec = records[k];
    rec.level = task.level;
    rec.dataset = task.dataset;
    rec.replicate = task.replicate;
    rec.gamma = gammas[task.level - 1];
    const LabeledDataset& lab = datasets[task.dataset];
    rec.true_ate = lab.true_ate;
    try {
      const auto noise_seed =
          derive_seed(config.seed, kNoiseStream, static_cast<std::uint64_t>(task.level),
                      static_cast<std::uint64_t>(task.dataset) * 1000003ULL + task.replicate);
      const ObservedDataset noisy = corrupt(lab.data, schedule[task.level - 1], noise_seed);
      SolverConfig solver = config.solver;
      solver.budgets = TvBudget::both(rec.gamma);
      solver.trace = false;
      const PreparedData prep(noisy, config.estimator);
      const BoundResult b = solve_bounds(prep, solver);
      rec.tau_lower = b.tau_lower;
      rec.tau_upper = b.tau_upper;
      rec.naive = b.naive;
      rec.feasible = b.lower.feasible && b.upper.feasible;
      rec.covers = b.tau_lower <= lab.true_ate && lab.true_ate <= b.tau_upper;
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
    }
  }

  // Naive intervals per (level, dataset) over the successful replicates.
  std::map<std::pair<int, int>, std::vector<double>> naive_by_dataset;
  for (const auto& rec : records)
    if (rec.ok) naive_by_dataset[{rec.level, rec.dataset}].push_back(rec.naive);
  for (auto& rec : records) {
    if (!rec.ok) continue;
    const auto [lo, hi] = naive_interval(naive_by_dataset.at({rec.level, rec.dataset}));
    rec.naive_covers = lo <= rec.true_ate && rec.true_ate <= hi;
  }

  CoverageReport report;
  report.estimator = to_string(config.estimator.kind);
  report.dgp = to_string(base.kind);
  report.replicates = std::move(records);
  std::vector<std::pair<int, GaussianNoise>> levels;
  for (int l : level_ids) levels.emplace_back(l, schedule[l - 1]);
  report.rows = aggregate(report.replicates, levels);
  return report;
}

json CoverageReport::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows)
    rows_json.push_back({{"level", r.level},
                         {"gamma", r.gamma},
                         {"noise_mean", r.noise_mean},
                         {"noise_sd", r.noise_sd},
                         {"method", r.method},
                         {"coverage", r.coverage},
                         {"standard_error", r.standard_error},
                         {"mean_width", r.mean_width},
                         {"trials", r.trials},
                         {"failed", r.failed}});
  return {{"estimator", estimator}, {"dgp", dgp}, {"rows", rows_json}};
}

std::string CoverageReport::to_csv() const {
  std::ostringstream os;
  os << "estimator,level,gamma,noise_mean,noise_sd,method,coverage,standard_error,mean_width,"
        "trials,failed\n";
  for (const auto& r : rows)
    os << estimator << ',' << r.level << ',' << format_double(r.gamma) << ','
       << format_double(r.noise_mean) << ',' << format_double(r.noise_sd) << ',' << r.method
       << ',' << format_double(r.coverage) << ',' << format_double(r.standard_error) << ','
       << format_double(r.mean_width) << ',' << r.trials << ',' << r.failed << '\n';
  return os.str();
}

std::string CoverageReport::replicates_jsonl() const {
  std::ostringstream os;
  for (const auto& r : replicates) {
    json j = {{"level", r.level},         {"dataset", r.dataset},   {"replicate", r.replicate},
              {"gamma", r.gamma},         {"true_ate", r.true_ate}, {"ok", r.ok},
              {"tau_lower", r.tau_lower}, {"tau_upper", r.tau_upper},
              {"naive", r.naive},         {"feasible", r.feasible}, {"covers", r.covers},
              {"naive_covers", r.naive_covers}};
    if (!r.ok) j["error"] = r.error;
    os << j.dump() << '\n';
  }
  return os.str();
}

namespace {

json side_json(const GdaResult& g) {
  return {{"objective", g.objective},
          {"v", g.v},
          {"lambda", g.best.lambda},
          {"iterate", g.best.t},
          {"feasible", g.feasible},
          {"theta", std::vector<double>(g.best.theta.theta.data(),
                                        g.best.theta.theta.data() + g.best.theta.theta.size())}};
}

} // namespace

json to_json(const BoundResult& r, const SolverConfig& config) {
  json j = {{"tau_lower", r.tau_lower},
            {"tau_upper", r.tau_upper},
            {"naive", r.naive},
            {"feasible", {{"lower", r.lower.feasible}, {"upper", r.upper.feasible}}},
            {"gamma", {config.budgets.gamma0(), config.budgets.gamma1()}},
            {"lower", side_json(r.lower)},
            {"upper", side_json(r.upper)}};
  if (r.confidence)
    j["confidence"] = {{"alpha", *config.alpha},
                       {"rho", r.confidence->rho},
                       {"lower_of_tau_lower", r.confidence->lower_of_lower},
                       {"upper_of_tau_lower", r.confidence->upper_of_lower},
                       {"lower_of_tau_upper", r.confidence->lower_of_upper},
                       {"upper_of_tau_upper", r.confidence->upper_of_upper}};
  return j;
}

json to_json(const GammaEstimate& g) {
  return {{"gamma", {g.gamma0, g.gamma1}}, {"method", g.method}, {"diagnostics", g.diagnostics}};
}

} // namespace rci
