// rci: generate | bound | benchmark | tv-bound
#include "rci/config.hpp"
#include "rci/errors.hpp"
#include "rci/harness.hpp"
#include "rci/random.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace rci;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kNoiseStream = 0x401e5;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void emit(const std::string& output, const json& doc) {
  const std::string text = doc.dump(2) + "\n";
  if (output.empty() || output == "-") std::cout << text;
  else write_text(output, text);
}

json noise_json(const NoiseModel& m) {
  json j = {{"kind", noise_kind(m)}};
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GaussianNoise>) {
          j["mean"] = n.mean;
          j["sd"] = n.sd;
        } else if constexpr (std::is_same_v<T, HuberNoise>) {
          j["rate"] = n.rate;
          j["contaminant_mean"] = n.contaminant_mean;
          j["contaminant_sd"] = n.contaminant_sd;
        } else if constexpr (std::is_same_v<T, MisclassificationNoise>) {
          j["values"] = n.values;
          json rows = json::array();
          for (Eigen::Index a = 0; a < n.table.rows(); ++a) {
            std::vector<double> row(n.table.cols());
            for (Eigen::Index b = 0; b < n.table.cols(); ++b) row[b] = n.table(a, b);
            rows.push_back(row);
          }
          j["table"] = rows;
        } else {
          j["theta"] = n.theta;
          j["theta_tilde"] = n.theta_tilde;
        }
      },
      m);
  return j;
}

// The observed data for `bound`: a CSV, or a generated dataset with the
// configured noise applied.
ObservedDataset load_observed(const RunConfig& c) {
  if (c.data.path) return read_csv(*c.data.path);
  if (!c.data.dgp) throw ParseError("config $.data: give path or dgp");
  const LabeledDataset lab = generate(*c.data.dgp, c.data.covariates_csv);
  if (!c.noise) return lab.data;
  return corrupt(lab.data, c.noise->resolve(), derive_seed(c.seed, kNoiseStream));
}

int cmd_generate(RunConfig c) {
  if (!c.data.dgp) throw ParseError("config $.data.dgp: generate needs a generator");
  if (c.output.empty()) throw ParseError("generate needs --output <directory>");
  const LabeledDataset lab = generate(*c.data.dgp, c.data.covariates_csv);
  ObservedDataset noisy = lab.data;
  json meta = lab.metadata;
  meta["dgp"] = to_string(c.data.dgp->kind);
  meta["seed"] = c.data.dgp->seed;
  meta["n"] = lab.data.size();
  if (c.noise) {
    const NoiseModel m = c.noise->resolve();
    const auto noise_seed = derive_seed(c.seed, kNoiseStream);
    noisy = corrupt(lab.data, m, noise_seed);
    meta["noise"] = noise_json(m);
    if (c.noise->schedule) {
      meta["noise"]["schedule"] = to_string(*c.noise->schedule);
      meta["noise"]["level"] = c.noise->level;
    }
    meta["noise_seed"] = noise_seed;
  } else {
    meta["noise"] = nullptr;
  }
  const fs::path dir = c.output;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  write_csv((dir / "noiseless.csv").string(), lab.data);
  write_csv((dir / "noisy.csv").string(), noisy);
  write_text(dir / "metadata.json", meta.dump(2) + "\n");
  return 0;
}

int cmd_bound(const RunConfig& c) {
  const ObservedDataset data = load_observed(c);
  const PreparedData prep(data, c.estimator);
  const BoundResult r = solve_bounds(prep, c.solver);
  json doc = to_json(r, c.solver);
  doc["estimator"] = to_string(c.estimator.kind);
  doc["n"] = data.size();
  emit(c.output, doc);
  if (c.trace_path) {
    std::ostringstream os;
    for (const auto* side : {&r.lower, &r.upper})
      for (const auto& t : side->trace)
        os << json{{"direction", side == &r.lower ? "lower" : "upper"},
                   {"t", t.t},
                   {"objective", t.objective},
                   {"v", t.v},
                   {"lambda", t.lambda}}
                  .dump()
           << '\n';
    write_text(*c.trace_path, os.str());
  }
  return r.lower.feasible && r.upper.feasible ? 0 : 4;
}

int cmd_benchmark(const RunConfig& c) {
  if (c.output.empty()) throw ParseError("benchmark needs --output <directory>");
  const CoverageReport report = run_benchmark(c);
  const fs::path dir = c.output;
  write_text(dir / "report.json", report.to_json().dump(2) + "\n");
  write_text(dir / "report.csv", report.to_csv());
  write_text(dir / "replicates.jsonl", report.replicates_jsonl());
  return 0;
}

std::vector<double> column_by_arm(const ObservedDataset& d, Eigen::Index col, int arm) {
  std::vector<double> out;
  for (Eigen::Index i : d.arm_rows(arm)) out.push_back(d.x()(i, col));
  return out;
}

int cmd_tv_bound(const RunConfig& c) {
  if (!c.tv_bound) throw ParseError("config $.tv_bound: missing");
  const TvBoundConfig& t = *c.tv_bound;
  GammaEstimate g;
  if (t.method == "huber") {
    g = gamma_huber(t.rate);
  } else if (t.method == "misclassification") {
    g = gamma_misclassification(t.p, t.q);
  } else if (t.method == "tilting") {
    // unit-variance Gaussian location family
    const Eigen::VectorXd th = Eigen::Map<const Eigen::VectorXd>(t.theta.data(), t.theta.size());
    const Eigen::VectorXd tt =
        Eigen::Map<const Eigen::VectorXd>(t.theta_tilde.data(), t.theta_tilde.size());
    if (th.size() != tt.size()) throw ParseError("config $.tv_bound: theta and theta_tilde differ in length");
    g = gamma_tilting(th, tt, [](const Eigen::VectorXd& v) {
      return std::make_pair(0.5 * v.squaredNorm(), Eigen::VectorXd(v));
    });
  } else {
    const ObservedDataset p = read_csv(t.samples_p), q = read_csv(t.samples_q);
    if (p.dim() != q.dim()) throw DimensionError("sample files have different covariate counts");
    Eigen::Index col = 0;
    if (!t.column.empty()) {
      if (t.column.size() < 2 || t.column[0] != 'x')
        throw ParseError("config $.tv_bound.column: expected x1..x" + std::to_string(p.dim()));
      col = std::stol(t.column.substr(1)) - 1;
      if (col < 0 || col >= p.dim()) throw ParseError("column " + t.column + " not found");
    }
    const auto g0 = gamma_pinsker(column_by_arm(p, col, 0), column_by_arm(q, col, 0), t.bins);
    const auto g1 = gamma_pinsker(column_by_arm(p, col, 1), column_by_arm(q, col, 1), t.bins);
    g = g0;
    g.gamma1 = g1.gamma1;
    g.diagnostics.clear();
    for (const auto& [k, v] : g0.diagnostics) g.diagnostics[k + "_arm0"] = v;
    for (const auto& [k, v] : g1.diagnostics) g.diagnostics[k + "_arm1"] = v;
  }
  emit(c.output, to_json(g));
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust causal intervals under noisy covariates"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, output;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  app.add_option("--config", config_path, "JSON run config")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed (overrides config)");
  app.add_option("--workers", workers, "benchmark worker threads")->check(CLI::PositiveNumber);
  app.add_option("--output", output, "output file or directory");
  auto* gen = app.add_subcommand("generate", "write noiseless.csv, noisy.csv and metadata.json");
  auto* bound = app.add_subcommand("bound", "compute [tau_L, tau_U] for a dataset");
  auto* bench = app.add_subcommand("benchmark", "coverage experiment");
  auto* tv = app.add_subcommand("tv-bound", "estimate the TV budget for a noise model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    RunConfig c = config_path.empty() ? parse_config(json::object()) : load_config(config_path);
    if (seed) {
      c.seed = *seed;
      if (c.data.dgp) c.data.dgp->seed = *seed;
    }
    if (workers) c.workers = *workers;
    if (!output.empty()) c.output = output;
    c.validate();
    if (*gen) return cmd_generate(c);
    if (*bound) return cmd_bound(c);
    if (*bench) return cmd_benchmark(c);
    if (*tv) return cmd_tv_bound(c);
  } catch (const Error& e) {
    std::cerr << "rci: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "rci: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
