#include "rci/config.hpp"
#include "rci/errors.hpp"

#include <filesystem>
#include <fstream>
#include <set>

namespace rci {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown.
class Reader {
public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }

  Reader object(const std::string& key) { return Reader(raw(key), at(key)); }

  double number(const std::string& key, double dflt) {
    if (!has(key)) return dflt;
    const json& v = raw(key);
    if (!v.is_number()) fail(at(key), "expected a number");
    return v.get<double>();
  }

  long integer(const std::string& key, long dflt) {
    if (!has(key)) return dflt;
    const json& v = raw(key);
    if (!v.is_number_integer()) fail(at(key), "expected an integer");
    return v.get<long>();
  }

  std::uint64_t seed(const std::string& key, std::uint64_t dflt) {
    if (!has(key)) return dflt;
    const json& v = raw(key);
    if (!v.is_number_unsigned()) fail(at(key), "expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool dflt) {
    if (!has(key)) return dflt;
    const json& v = raw(key);
    if (!v.is_boolean()) fail(at(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& dflt) {
    if (!has(key)) return dflt;
    const json& v = raw(key);
    if (!v.is_string()) fail(at(key), "expected a string");
    return v.get<std::string>();
  }

  std::string required_string(const std::string& key) {
    if (!has(key)) fail(at(key), "is required");
    return string(key, "");
  }

  std::vector<double> numbers(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) fail(at(key), "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(at(key), "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  // A number, or a two-element [control, treated] array.
  std::array<double, 2> per_arm(const std::string& key, std::array<double, 2> dflt) {
    if (!has(key)) return dflt;
    if (j_.at(key).is_number()) {
      const double v = number(key, 0.0);
      return {v, v};
    }
    const auto v = numbers(key);
    if (v.size() != 2) fail(at(key), "expected a number or a [control, treated] pair");
    return {v[0], v[1]};
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown key");
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ParseError("config " + where + ": " + what);
  }

private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
auto wrap_enum(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const InvalidArgument& e) {
    Reader::fail(where, e.what());
  }
}

EstimatorSpec parse_estimator(Reader r) {
  EstimatorSpec s;
  const std::string kind = r.string("kind", "backdoor");
  s.kind = wrap_enum(r.at("kind"), [&] { return estimator_from_string(kind); });
  const std::string fam = r.string("outcome_family", "linear");
  s.outcome_family = wrap_enum(r.at("outcome_family"), [&] { return family_from_string(fam); });
  s.slack = r.number("slack", s.slack);
  s.propensity_clip = r.number("propensity_clip", s.propensity_clip);
  s.split_seed = r.seed("split_seed", s.split_seed);
  r.finish();
  return s;
}

SolverConfig parse_solver(Reader r, std::optional<std::string>& trace_path) {
  SolverConfig c;
  c.eta_theta = r.number("eta_theta", c.eta_theta);
  c.eta_lambda = r.number("eta_lambda", c.eta_lambda);
  c.eta_z = r.per_arm("eta_z", c.eta_z);
  c.iterations = static_cast<int>(r.integer("iterations", c.iterations));
  const auto g = r.per_arm("gamma", {0.0, 0.0});
  try {
    c.budgets = TvBudget(g[0], g[1]);
  } catch (const Error& e) {
    Reader::fail(r.at("gamma"), e.what());
  }
  const std::string dir = r.string("direction", "lower");
  if (dir != "lower" && dir != "upper") Reader::fail(r.at("direction"), "expected lower or upper");
  c.direction = dir == "lower" ? Direction::lower : Direction::upper;
  c.tolerance_feas = r.number("tolerance_feas", c.tolerance_feas);
  c.lambda_init = r.number("lambda_init", c.lambda_init);
  if (r.has("alpha")) c.alpha = r.number("alpha", 0.05);
  if (r.has("trace")) {
    trace_path = r.string("trace", "");
    c.trace = true;
  }
  r.finish();
  return c;
}

DgpSpec parse_dgp(Reader r, std::string& covariates_csv) {
  DgpSpec d;
  const std::string kind = r.required_string("kind");
  d.kind = wrap_enum(r.at("kind"), [&] { return dgp_from_string(kind); });
  d.n = r.integer("n", d.n);
  d.seed = r.seed("seed", d.seed);
  if (r.has("coefficients")) {
    Reader c = r.object("coefficients");
    const json& raw = r.raw("coefficients");
    for (auto it = raw.begin(); it != raw.end(); ++it) {
      if (it->is_number()) d.coefficients[it.key()] = {c.number(it.key(), 0.0)};
      else d.coefficients[it.key()] = c.numbers(it.key());
    }
    c.finish();
  }
  d.treatment_link = r.string("treatment_link", d.treatment_link);
  d.standardize = r.boolean("standardize", d.standardize);
  d.mc_draws = r.integer("mc_draws", d.mc_draws);
  covariates_csv = r.string("covariates_csv", "");
  r.finish();
  return d;
}

NoiseChoice parse_noise(Reader r) {
  NoiseChoice n;
  const std::string kind = r.required_string("kind");
  if (kind == "gaussian_additive") {
    n.model = GaussianNoise{r.number("mean", 0.0), r.number("sd", 1.0)};
  } else if (kind == "huber") {
    n.model = HuberNoise{r.number("rate", 0.0), r.number("contaminant_mean", 0.0),
                         r.number("contaminant_sd", 1.0)};
  } else if (kind == "misclassification") {
    MisclassificationNoise m;
    m.values = r.numbers("values");
    const json& t = r.raw("table");
    if (!t.is_array()) Reader::fail(r.at("table"), "expected an array of rows");
    m.table.resize(static_cast<Eigen::Index>(t.size()),
                   static_cast<Eigen::Index>(t.empty() ? 0 : t[0].size()));
    for (std::size_t a = 0; a < t.size(); ++a) {
      if (!t[a].is_array() || t[a].size() != t[0].size())
        Reader::fail(r.at("table"), "rows must be arrays of equal length");
      for (std::size_t b = 0; b < t[a].size(); ++b) {
        if (!t[a][b].is_number()) Reader::fail(r.at("table"), "entries must be numbers");
        m.table(a, b) = t[a][b].get<double>();
      }
    }
    n.model = m;
  } else if (kind == "exponential_tilting") {
    n.model = TiltingNoise{r.number("theta", 0.0), r.number("theta_tilde", 0.0)};
  } else if (kind == "level") {
    const std::string sched = r.required_string("schedule");
    n.schedule = wrap_enum(r.at("schedule"), [&] { return noise_schedule_from_string(sched); });
    n.level = static_cast<int>(r.integer("level", 1));
  } else {
    Reader::fail(r.at("kind"), "unknown noise kind '" + kind + "'");
  }
  r.finish();
  if (n.model) {
    try {
      validate(*n.model);
    } catch (const Error& e) {
      Reader::fail(r.at("kind"), e.what());
    }
  }
  return n;
}

BenchmarkConfig parse_benchmark(Reader r) {
  BenchmarkConfig b;
  const std::string sched = r.string("schedule", "kang_schafer");
  b.schedule = wrap_enum(r.at("schedule"), [&] { return noise_schedule_from_string(sched); });
  if (r.has("levels"))
    for (double v : r.numbers("levels")) {
      if (v != static_cast<int>(v)) Reader::fail(r.at("levels"), "levels are integers");
      b.levels.push_back(static_cast<int>(v));
    }
  if (r.has("gamma_table")) b.gamma_table = r.numbers("gamma_table");
  b.datasets = static_cast<int>(r.integer("datasets", b.datasets));
  b.replicates = static_cast<int>(r.integer("replicates", b.replicates));
  r.finish();
  return b;
}

TvBoundConfig parse_tv_bound(Reader r) {
  TvBoundConfig t;
  t.method = r.required_string("method");
  if (t.method == "huber") {
    t.rate = r.number("rate", 0.0);
  } else if (t.method == "misclassification") {
    t.p = r.numbers("p");
    t.q = r.numbers("q");
  } else if (t.method == "tilting") {
    t.theta = r.numbers("theta");
    t.theta_tilde = r.numbers("theta_tilde");
  } else if (t.method == "pinsker") {
    t.samples_p = r.required_string("samples_p");
    t.samples_q = r.required_string("samples_q");
    t.column = r.string("column", "");
    t.bins = static_cast<int>(r.integer("bins", t.bins));
  } else {
    Reader::fail(r.at("method"), "unknown method '" + t.method + "'");
  }
  r.finish();
  return t;
}

} // namespace

NoiseModel NoiseChoice::resolve() const {
  if (model) return *model;
  return noise_level(*schedule, level);
}

void RunConfig::validate() const {
  auto guard = [](const char* where, auto&& f) {
    try {
      f();
    } catch (const InvalidArgument& e) {
      throw ParseError(std::string("config ") + where + ": " + e.what());
    }
  };
  guard("$.estimator", [&] { estimator.validate(); });
  guard("$.solver", [&] { solver.validate(); });
  if (data.dgp) guard("$.data.dgp", [&] { data.dgp->validate(); });
  if (data.path && !std::filesystem::exists(*data.path))
    throw ParseError("config $.data.path: file '" + *data.path + "' does not exist");
  if (!data.covariates_csv.empty() && !std::filesystem::exists(data.covariates_csv))
    throw ParseError("config $.data.dgp.covariates_csv: file '" + data.covariates_csv +
                     "' does not exist");
  if (noise && noise->schedule)
    guard("$.noise.level", [&] { noise_level(*noise->schedule, noise->level); });
  if (benchmark.datasets < 1 || benchmark.replicates < 1)
    throw ParseError("config $.benchmark: datasets and replicates must be at least 1");
  const auto levels = noise_levels(benchmark.schedule);
  for (int l : benchmark.levels)
    if (l < 1 || l > static_cast<int>(levels.size()))
      throw ParseError("config $.benchmark.levels: level " + std::to_string(l) +
                       " is not in the schedule");
  for (double g : benchmark.gamma_table)
    if (!(g >= 0.0 && g <= 1.0)) throw ParseError("config $.benchmark.gamma_table: gamma must lie in [0, 1]");
  if (!benchmark.gamma_table.empty())
    for (int l : benchmark.levels)
      if (l > static_cast<int>(benchmark.gamma_table.size()))
        throw ParseError("config $.benchmark.gamma_table: no gamma for level " + std::to_string(l));
  if (workers < 1) throw ParseError("config $.workers: must be at least 1");
}

RunConfig parse_config(const json& doc) {
  Reader r(doc, "$");
  RunConfig c;
  if (r.has("estimator")) c.estimator = parse_estimator(r.object("estimator"));
  if (r.has("solver")) c.solver = parse_solver(r.object("solver"), c.trace_path);
  if (r.has("data")) {
    Reader d = r.object("data");
    if (d.has("path")) c.data.path = d.string("path", "");
    if (d.has("dgp")) c.data.dgp = parse_dgp(d.object("dgp"), c.data.covariates_csv);
    d.finish();
    if (c.data.path && c.data.dgp) Reader::fail("$.data", "give either path or dgp, not both");
  }
  if (r.has("noise")) c.noise = parse_noise(r.object("noise"));
  if (r.has("benchmark")) c.benchmark = parse_benchmark(r.object("benchmark"));
  if (r.has("tv_bound")) c.tv_bound = parse_tv_bound(r.object("tv_bound"));
  c.seed = r.seed("seed", c.seed);
  c.workers = static_cast<int>(r.integer("workers", c.workers));
  c.output = r.string("output", "");
  r.finish();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

} // namespace rci
