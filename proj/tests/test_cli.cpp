// Drives the rci binary end to end.
#include "rci/config.hpp"
#include "rci/harness.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rci;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "rci_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(RCI_BIN) + " " + args + " >" + (kDir / "stdout").string() +
                          " 2>" + (kDir / "stderr").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path write_config(const std::string& name, const json& j) {
  const fs::path p = kDir / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

struct Scratch {
  Scratch() {
    fs::remove_all(kDir);
    fs::create_directories(kDir);
  }
  ~Scratch() { fs::remove_all(kDir); }
};

const json kGenerate = R"({
  "data": {"dgp": {"kind": "logistic_backdoor", "n": 2000, "mc_draws": 200000}},
  "noise": {"kind": "level", "schedule": "binary_outcome", "level": 1},
  "estimator": {"kind": "backdoor", "outcome_family": "logistic"},
  "seed": 17
})"_json;

} // namespace

TEST_CASE("generate is byte-identical across runs") {
  Scratch s;
  const auto cfg = write_config("gen.json", kGenerate);
  REQUIRE(run("generate --config " + cfg.string() + " --output " + (kDir / "a").string()) == 0);
  REQUIRE(run("generate --config " + cfg.string() + " --output " + (kDir / "b").string()) == 0);
  for (const char* f : {"noiseless.csv", "noisy.csv", "metadata.json"}) {
    const std::string a = slurp(kDir / "a" / f);
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(kDir / "b" / f));
  }
  const json meta = json::parse(slurp(kDir / "a" / "metadata.json"));
  CHECK(meta["dgp"] == "logistic_backdoor");
  CHECK(meta["noise"]["schedule"] == "binary_outcome");
  CHECK(meta["noise"]["mean"] == 0.1);
  REQUIRE(run("generate --config " + cfg.string() + " --seed 18 --output " + (kDir / "c").string()) == 0);
  CHECK(slurp(kDir / "a" / "noisy.csv") != slurp(kDir / "c" / "noisy.csv"));
}

TEST_CASE("bound from generated data matches the library and covers the truth") {
  Scratch s;
  const auto gen = write_config("gen.json", kGenerate);
  REQUIRE(run("generate --config " + gen.string() + " --output " + kDir.string()) == 0);
  const json meta = json::parse(slurp(kDir / "metadata.json"));

  json bj = kGenerate;
  bj.erase("noise");
  bj["data"] = {{"path", (kDir / "noisy.csv").string()}};
  bj["solver"] = {{"gamma", 0.1}, {"trace", (kDir / "trace.jsonl").string()}};
  const auto cfg = write_config("bound.json", bj);
  REQUIRE(run("bound --config " + cfg.string() + " --output " + (kDir / "bound.json").string()) == 0);
  const json out = json::parse(slurp(kDir / "bound.json"));

  RunConfig c = parse_config(bj);
  const ObservedDataset data = read_csv((kDir / "noisy.csv").string());
  const BoundResult r = solve_bounds(PreparedData(data, c.estimator), c.solver);
  CHECK(out["tau_lower"].get<double>() == r.tau_lower);
  CHECK(out["tau_upper"].get<double>() == r.tau_upper);
  CHECK(out["naive"].get<double>() == r.naive);
  CHECK(out["n"] == 2000);

  const double truth = meta["true_ate"];
  CHECK(out["tau_lower"].get<double>() <= truth);
  CHECK(truth <= out["tau_upper"].get<double>());

  std::istringstream trace(slurp(kDir / "trace.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(trace, line)) {
    const json t = json::parse(line);
    CHECK(t.contains("lambda"));
    ++lines;
  }
  CHECK(lines == 2 * 2001); // the initial state is recorded too
}

TEST_CASE("gamma zero gives a degenerate interval") {
  Scratch s;
  const auto gen = write_config("gen.json", kGenerate);
  REQUIRE(run("generate --config " + gen.string() + " --output " + kDir.string()) == 0);
  json bj = kGenerate;
  bj.erase("noise");
  bj["data"] = {{"path", (kDir / "noisy.csv").string()}};
  const auto cfg = write_config("bound.json", bj);
  REQUIRE(run("bound --config " + cfg.string()) == 0);
  const json out = json::parse(slurp(kDir / "stdout"));
  CHECK(out["tau_upper"].get<double>() - out["tau_lower"].get<double>() <= 1e-3);
  CHECK(out["tau_lower"].get<double>() <= out["naive"].get<double>() + 1e-3);
}

TEST_CASE("benchmark output is reproducible") {
  Scratch s;
  const json bj = R"({
    "data": {"dgp": {"kind": "logistic_backdoor", "n": 200, "mc_draws": 10000}},
    "estimator": {"kind": "backdoor", "outcome_family": "logistic"},
    "solver": {"iterations": 150},
    "benchmark": {"schedule": "binary_outcome", "levels": [2], "datasets": 2, "replicates": 2},
    "seed": 3
  })"_json;
  const auto cfg = write_config("bench.json", bj);
  REQUIRE(run("benchmark --config " + cfg.string() + " --output " + (kDir / "a").string()) == 0);
  REQUIRE(run("benchmark --config " + cfg.string() + " --workers 2 --output " + (kDir / "b").string()) == 0);
  for (const char* f : {"report.json", "report.csv", "replicates.jsonl"}) {
    CHECK_FALSE(slurp(kDir / "a" / f).empty());
    CHECK(slurp(kDir / "a" / f) == slurp(kDir / "b" / f));
  }
}

TEST_CASE("tv-bound") {
  Scratch s;
  auto tv = [&](const json& t) {
    const auto cfg = write_config("tv.json", {{"tv_bound", t}});
    REQUIRE(run("tv-bound --config " + cfg.string()) == 0);
    return json::parse(slurp(kDir / "stdout"));
  };
  CHECK(tv({{"method", "huber"}, {"rate", 0.3}})["gamma"][0] == 0.3);
  CHECK(tv({{"method", "misclassification"}, {"p", {0.7, 0.3}}, {"q", {0.6, 0.4}}})["gamma"][1]
            .get<double>() == doctest::Approx(0.1));
  CHECK(tv({{"method", "tilting"}, {"theta", {0.0}}, {"theta_tilde", {1.0}}})["gamma"][0]
            .get<double>() == doctest::Approx(0.5));
}

TEST_CASE("exit codes") {
  Scratch s;
  CHECK(run("") == 2);
  CHECK(run("bound --frobnicate") == 2);
  CHECK(run("bound --config /nonexistent/c.json") == 2);
  CHECK(run("bound --config " + write_config("u.json", {{"bogus", 1}}).string()) == 2);
  CHECK(slurp(kDir / "stderr").find("$.bogus: unknown key") != std::string::npos);

  std::ofstream(kDir / "noy.csv") << "z,x1\n0,1\n1,2\n";
  CHECK(run("bound --config " +
            write_config("noy.json", {{"data", {{"path", (kDir / "noy.csv").string()}}}}).string()) == 2);
  CHECK(slurp(kDir / "stderr").find("column y not found") != std::string::npos);

  {
    std::ofstream f(kDir / "huge.csv");
    f << "y,z,x1\n";
    for (int i = 0; i < 40; ++i) f << (i % 3) * 1e300 << ',' << i % 2 << ',' << (i % 5) * 1e300 << '\n';
  }
  CHECK(run("bound --config " +
            write_config("huge.json", {{"data", {{"path", (kDir / "huge.csv").string()}}}}).string()) == 3);
}
