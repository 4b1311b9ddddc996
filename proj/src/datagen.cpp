#include "rci/datagen.hpp"
#include "rci/errors.hpp"
#include "rci/kernels.hpp"
#include "rci/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace rci {

using kernels::sigmoid;

const char* to_string(DgpKind k) {
  switch (k) {
  case DgpKind::logistic_backdoor: return "logistic_backdoor";
  case DgpKind::kang_schafer: return "kang_schafer";
  case DgpKind::frontdoor_single: return "frontdoor_single";
  case DgpKind::frontdoor_multi: return "frontdoor_multi";
  case DgpKind::ihdp_mediation: return "ihdp_mediation";
  }
  return "?";
}

DgpKind dgp_from_string(const std::string& s) {
  for (auto k : {DgpKind::logistic_backdoor, DgpKind::kang_schafer, DgpKind::frontdoor_single,
                 DgpKind::frontdoor_multi, DgpKind::ihdp_mediation})
    if (s == to_string(k)) return k;
  throw InvalidArgument("unknown data generator '" + s + "'");
}

namespace {

// stream labels for derive_seed
constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kTruthStream = 2;
constexpr std::uint64_t kCoefStream = 3;

// name -> length; 0 means "any length" (checked by the generator)
const std::map<std::string, std::size_t>& allowed_coefficients(DgpKind k) {
  static const std::map<DgpKind, std::map<std::string, std::size_t>> table = {
      {DgpKind::logistic_backdoor,
       {{"alpha0", 1}, {"alpha1", 5}, {"beta0", 1}, {"beta1", 1}, {"beta2", 5}}},
      {DgpKind::kang_schafer, {{"outcome", 5}, {"treatment", 4}}},
      {DgpKind::frontdoor_single,
       {{"a0", 1}, {"a1", 5}, {"gamma0", 1}, {"gamma1", 1}, {"beta0", 1}, {"beta1", 1}, {"beta2", 5}}},
      {DgpKind::frontdoor_multi, {{"c1", 5}, {"c2", 5}, {"beta", 5}}},
      {DgpKind::ihdp_mediation, {{"a", 1}, {"c", 1}, {"sigma_um", 1}, {"b", 0}}},
  };
  return table.at(k);
}

std::vector<double> coef(const DgpSpec& spec, const std::string& name, std::vector<double> dflt) {
  auto it = spec.coefficients.find(name);
  return it == spec.coefficients.end() ? dflt : it->second;
}

double coef1(const DgpSpec& spec, const std::string& name, double dflt) {
  return coef(spec, name, {dflt})[0];
}

double dot(const std::vector<double>& a, const double* b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

// Welford over a stream of Monte-Carlo terms.
class Accumulator {
public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / n_;
    m2_ += d * (x - mean_);
  }
  MeanSe result() const {
    return {mean_, n_ > 1 ? std::sqrt(m2_ / (n_ - 1) / n_) : 0.0};
  }
private:
  long n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

nlohmann::json base_metadata(const DgpSpec& spec) {
  nlohmann::json m;
  m["kind"] = to_string(spec.kind);
  m["n"] = spec.n;
  m["seed"] = spec.seed;
  return m;
}

void finish(LabeledDataset& out, double ate, double se, bool exact) {
  out.true_ate = ate;
  out.true_ate_se = se;
  out.true_ate_exact = exact;
  out.metadata["true_ate"] = ate;
  out.metadata["true_ate_se"] = se;
  out.metadata["true_ate_exact"] = exact;
  if (!std::isfinite(ate)) throw NumericalFailure("ground-truth ATE is not finite");
}

} // namespace

void DgpSpec::validate() const {
  if (n < 2) throw InvalidArgument("a generated dataset needs n >= 2");
  if (mc_draws < 2) throw InvalidArgument("mc_draws must be at least 2");
  if (treatment_link != "sigmoid" && treatment_link != "clamped_exp")
    throw InvalidArgument("treatment_link must be 'sigmoid' or 'clamped_exp'");
  const auto& allowed = allowed_coefficients(kind);
  for (const auto& [name, values] : coefficients) {
    auto it = allowed.find(name);
    if (it == allowed.end())
      throw InvalidArgument("coefficient '" + name + "' does not apply to " + to_string(kind));
    if (it->second != 0 && values.size() != it->second)
      throw InvalidArgument("coefficient '" + name + "' needs " + std::to_string(it->second) +
                            " values");
    for (double v : values)
      if (!std::isfinite(v)) throw InvalidArgument("coefficient '" + name + "' is not finite");
  }
}

LabeledDataset gen_logistic_backdoor(const DgpSpec& spec) {
  spec.validate();
  const double a0 = coef1(spec, "alpha0", -1.0);
  const auto a1 = coef(spec, "alpha1", {1, -1, 1, 1, -1});
  const double b0 = coef1(spec, "beta0", -1.0);
  const double b1 = coef1(spec, "beta1", 1.0);
  const auto b2 = coef(spec, "beta2", {-1, -1, -1, 1, 1});

  Rng rng(derive_seed(spec.seed, kDataStream));
  Eigen::MatrixXd x(spec.n, 5);
  Eigen::VectorXd y(spec.n), z(spec.n);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    double row[5];
    for (int j = 0; j < 5; ++j) row[j] = x(i, j) = normal(rng, 1.0, 1.0);
    z[i] = bernoulli(rng, sigmoid(a0 + dot(a1, row)));
    y[i] = bernoulli(rng, sigmoid(b0 + b1 * z[i] + dot(b2, row)));
  }

  Rng mc(derive_seed(spec.seed, kTruthStream));
  Accumulator acc;
  for (long k = 0; k < spec.mc_draws; ++k) {
    double row[5];
    for (double& v : row) v = normal(mc, 1.0, 1.0);
    const double s = b0 + dot(b2, row);
    acc.add(sigmoid(s + b1) - sigmoid(s));
  }

  LabeledDataset out{ObservedDataset(x, y, z), x, 0, 0, false, base_metadata(spec)};
  out.metadata["coefficients"] = {{"alpha0", a0}, {"alpha1", a1}, {"beta0", b0},
                                  {"beta1", b1},  {"beta2", b2}};
  const auto r = acc.result();
  finish(out, r.mean, r.se, b1 == 0.0);
  return out;
}

LabeledDataset gen_kang_schafer(const DgpSpec& spec) {
  spec.validate();
  const auto oc = coef(spec, "outcome", {210.0, 27.4, 13.72, 13.7, 13.7});
  const auto tc = coef(spec, "treatment", {-1.0, -2.0, -0.25, -0.1});
  const bool clamped = spec.treatment_link == "clamped_exp";

  Rng rng(derive_seed(spec.seed, kDataStream));
  Eigen::MatrixXd x(spec.n, 4);
  Eigen::VectorXd y(spec.n), z(spec.n);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    double u[4];
    for (double& v : u) v = std_normal(rng);
    x(i, 0) = std::exp(u[0] / 2.0);
    x(i, 1) = u[1] / (1.0 + std::exp(u[0])) + 10.0;
    x(i, 2) = std::pow(u[0] * u[2] + 0.6, 3);
    x(i, 3) = std::pow(u[1] + u[3] + 20.0, 2);
    const double score = dot(tc, u);
    const double p = clamped ? std::min(1.0, std::exp(score)) : sigmoid(score);
    z[i] = bernoulli(rng, p);
    y[i] = oc[0] + oc[1] * u[0] + oc[2] * u[1] + oc[3] * u[2] + oc[4] * u[3] + std_normal(rng);
  }

  nlohmann::json meta = base_metadata(spec);
  meta["coefficients"] = {{"outcome", oc}, {"treatment", tc}};
  meta["treatment_link"] = spec.treatment_link;
  meta["standardized"] = spec.standardize;
  if (spec.standardize) {
    std::vector<double> means, sds;
    for (Eigen::Index j = 0; j < 4; ++j) {
      const double m = x.col(j).mean();
      const double sd = std::sqrt((x.col(j).array() - m).square().sum() / (spec.n - 1));
      x.col(j) = (x.col(j).array() - m) / (sd > 0.0 ? sd : 1.0);
      means.push_back(m);
      sds.push_back(sd);
    }
    meta["standardization"] = {{"mean", means}, {"sd", sds}};
  }
  LabeledDataset out{ObservedDataset(x, y, z), x, 0, 0, true, meta};
  // Y has no treatment term.
  finish(out, 0.0, 0.0, true);
  return out;
}

LabeledDataset gen_frontdoor_single(const DgpSpec& spec) {
  spec.validate();
  const double a0 = coef1(spec, "a0", -1.0);
  const auto a1 = coef(spec, "a1", {1, -1, 1, 1, -1});
  const double g0 = coef1(spec, "gamma0", 1.0);
  const double g1 = coef1(spec, "gamma1", 1.0);
  const double b0 = coef1(spec, "beta0", 1.0);
  const double b1 = coef1(spec, "beta1", -1.0);
  const auto b2 = coef(spec, "beta2", {-1, -1, -1, 1, 1});

  Rng rng(derive_seed(spec.seed, kDataStream));
  Eigen::MatrixXd x(spec.n, 1);
  Eigen::VectorXd y(spec.n), z(spec.n);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    double u[5];
    for (double& v : u) v = normal(rng, 1.0, 1.0);
    z[i] = bernoulli(rng, sigmoid(a0 + dot(a1, u)));
    x(i, 0) = bernoulli(rng, sigmoid(g0 + g1 * z[i]));
    y[i] = bernoulli(rng, sigmoid(b0 + b1 * x(i, 0) + dot(b2, u)));
  }

  // E[Y(z)] = sum_x P(x | z) E_U[P(Y = 1 | x, U)]
  Rng mc(derive_seed(spec.seed, kTruthStream));
  Accumulator acc;
  for (long k = 0; k < spec.mc_draws; ++k) {
    double u[5];
    for (double& v : u) v = normal(mc, 1.0, 1.0);
    const double s = b0 + dot(b2, u);
    acc.add(sigmoid(s + b1) - sigmoid(s));
  }
  const double shift = sigmoid(g0 + g1) - sigmoid(g0);
  const auto r = acc.result();

  LabeledDataset out{ObservedDataset(x, y, z), x, 0, 0, false, base_metadata(spec)};
  out.metadata["coefficients"] = {{"a0", a0},         {"a1", a1},         {"gamma0", g0},
                                  {"gamma1", g1},     {"beta0", b0},      {"beta1", b1},
                                  {"beta2", b2}};
  finish(out, shift * r.mean, std::abs(shift) * r.se, g1 == 0.0 || b1 == 0.0);
  return out;
}

LabeledDataset gen_frontdoor_multi(const DgpSpec& spec) {
  spec.validate();
  constexpr int m = 5;
  Rng crng(derive_seed(spec.seed, kCoefStream));
  std::vector<double> c1(m), c2(m), beta(m);
  for (auto& v : c1) v = normal(crng, -2.0, 1.0);
  for (auto& v : c2) v = normal(crng, -2.0, 1.0);
  for (auto& v : beta) v = normal(crng, 1.0, 1.0);
  c1 = coef(spec, "c1", c1);
  c2 = coef(spec, "c2", c2);
  beta = coef(spec, "beta", beta);
  const double sd_z = std::sqrt(0.5);

  Rng rng(derive_seed(spec.seed, kDataStream));
  Eigen::MatrixXd x(spec.n, m);
  Eigen::VectorXd y(spec.n), z(spec.n), u(spec.n);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    u[i] = normal(rng, -2.0, 1.0);
    z[i] = bernoulli(rng, sigmoid(u[i] + normal(rng, 0.0, sd_z)));
    double s = 0.0;
    for (int j = 0; j < m; ++j) {
      x(i, j) = bernoulli(rng, sigmoid(c1[j] + c2[j] * z[i] + normal(rng, -1.0, 1.0)));
      s += beta[j] * x(i, j);
    }
    y[i] = bernoulli(rng, sigmoid(2.0 * s + u[i] + normal(rng, -1.0, 1.0)));
  }

  // do(Z = 1) versus do(Z = 0) with common random numbers.
  Rng mc(derive_seed(spec.seed, kTruthStream));
  Accumulator acc;
  for (long k = 0; k < spec.mc_draws; ++k) {
    const double uu = normal(mc, -2.0, 1.0);
    double s1 = 0.0, s0 = 0.0;
    for (int j = 0; j < m; ++j) {
      const double ex = normal(mc, -1.0, 1.0);
      const double draw = uniform01(mc);
      s1 += beta[j] * (draw < sigmoid(c1[j] + c2[j] + ex) ? 1.0 : 0.0);
      s0 += beta[j] * (draw < sigmoid(c1[j] + ex) ? 1.0 : 0.0);
    }
    const double ey = normal(mc, -1.0, 1.0);
    acc.add(sigmoid(2.0 * s1 + uu + ey) - sigmoid(2.0 * s0 + uu + ey));
  }
  const auto r = acc.result();
  const bool null_effect = std::all_of(c2.begin(), c2.end(), [](double v) { return v == 0.0; });

  LabeledDataset out{ObservedDataset(x, y, z), x, 0, 0, false, base_metadata(spec)};
  out.metadata["coefficients"] = {{"c1", c1}, {"c2", c2}, {"beta", beta}};
  out.metadata["epsilon_z_sd"] = sd_z;
  finish(out, r.mean, r.se, null_effect);
  return out;
}

LabeledDataset gen_ihdp_mediation(const DgpSpec& spec, const Eigen::VectorXd& z,
                                  const Eigen::MatrixXd& w) {
  DgpSpec s = spec;
  s.n = z.size();
  s.validate();
  if (w.rows() != z.size() || w.rows() < 2)
    throw DimensionError("IHDP covariates and treatment differ in length");
  const double a = coef1(s, "a", 10.0);
  const double c = coef1(s, "c", 1.0);
  const double sigma = coef1(s, "sigma_um", 2.0);
  if (!(sigma >= 0.0)) throw InvalidArgument("sigma_um must be nonnegative");

  std::vector<double> b;
  if (auto it = s.coefficients.find("b"); it != s.coefficients.end()) {
    b = it->second;
    if (static_cast<Eigen::Index>(b.size()) != w.cols())
      throw InvalidArgument("coefficient 'b' needs one value per covariate");
  } else {
    // values 0..4 with probabilities .5 .2 .15 .1 .05
    Rng crng(derive_seed(s.seed, kCoefStream));
    const double cum[] = {0.5, 0.7, 0.85, 0.95, 1.0};
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      const double u = uniform01(crng);
      b.push_back(static_cast<double>(std::find_if(cum, cum + 5, [u](double t) { return u < t; }) - cum));
    }
  }

  Rng rng(derive_seed(s.seed, kDataStream));
  Eigen::MatrixXd x(s.n, 1);
  Eigen::VectorXd y(s.n);
  for (Eigen::Index i = 0; i < s.n; ++i) {
    if (z[i] != 0.0 && z[i] != 1.0) throw ParseError("IHDP treatment must be 0 or 1");
    x(i, 0) = normal(rng, c * z[i], sigma);
    y[i] = a * x(i, 0) + w.row(i).dot(Eigen::Map<const Eigen::VectorXd>(b.data(), w.cols())) +
           std_normal(rng);
  }

  LabeledDataset out{ObservedDataset(x, y, z), x, 0, 0, true, base_metadata(s)};
  out.metadata["coefficients"] = {{"a", a}, {"c", c}, {"sigma_um", sigma}, {"b", b}};
  finish(out, c * a, 0.0, true);
  return out;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> read_ihdp_covariates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open IHDP covariate file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::vector<std::string> header;
  std::string line;
  long lineno = 0;
  int z_col = -1;
  std::vector<int> w_cols;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (rows.empty() && header.empty()) {
      char* end = nullptr;
      std::strtod(fields[0].c_str(), &end);
      const bool numeric = end != fields[0].c_str();
      if (!numeric) {
        header = fields;
        for (std::size_t j = 0; j < fields.size(); ++j) {
          if (fields[j] == "z" || fields[j] == "treatment") z_col = static_cast<int>(j);
          else if (fields[j] != "y") w_cols.push_back(static_cast<int>(j));
        }
        if (z_col < 0) throw ParseError(path + ": column z not found");
        continue;
      }
      if (fields.size() != 30)
        throw ParseError(path + ": headerless IHDP file must have 30 columns");
      z_col = 0;
      for (int j = 5; j < 30; ++j) w_cols.push_back(j);
    }
    const std::size_t width = header.empty() ? 30 : header.size();
    if (fields.size() != width)
      throw ParseError(path + ": line " + std::to_string(lineno) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(width));
    std::vector<double> row;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      char* end = nullptr;
      const double v = std::strtod(fields[j].c_str(), &end);
      if (end == fields[j].c_str() || *end != '\0' || !std::isfinite(v))
        throw ParseError(path + ": line " + std::to_string(lineno) + ", column " +
                         std::to_string(j + 1) + ": not a number");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw ParseError(path + ": too few rows");
  Eigen::VectorXd z(rows.size());
  Eigen::MatrixXd w(rows.size(), w_cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    z[i] = rows[i][z_col];
    for (std::size_t j = 0; j < w_cols.size(); ++j) w(i, j) = rows[i][w_cols[j]];
  }
  return {z, w};
}

LabeledDataset gen_ihdp_mediation(const DgpSpec& spec, const std::string& covariates_csv) {
  const auto [z, w] = read_ihdp_covariates(covariates_csv);
  return gen_ihdp_mediation(spec, z, w);
}

LabeledDataset generate(const DgpSpec& spec, const std::string& covariates_csv) {
  switch (spec.kind) {
  case DgpKind::logistic_backdoor: return gen_logistic_backdoor(spec);
  case DgpKind::kang_schafer: return gen_kang_schafer(spec);
  case DgpKind::frontdoor_single: return gen_frontdoor_single(spec);
  case DgpKind::frontdoor_multi: return gen_frontdoor_multi(spec);
  case DgpKind::ihdp_mediation:
    if (covariates_csv.empty()) throw InvalidArgument("ihdp_mediation needs a covariate file");
    return gen_ihdp_mediation(spec, covariates_csv);
  }
  throw InvalidArgument("unknown data generator");
}

} // namespace rci
