#include "rci/noise.hpp"
#include "rci/errors.hpp"
#include "rci/random.hpp"

#include <algorithm>
#include <cmath>

namespace rci {

std::string noise_kind(const NoiseModel& m) {
  struct {
    std::string operator()(const GaussianNoise&) const { return "gaussian_additive"; }
    std::string operator()(const HuberNoise&) const { return "huber"; }
    std::string operator()(const MisclassificationNoise&) const { return "misclassification"; }
    std::string operator()(const TiltingNoise&) const { return "exponential_tilting"; }
  } v;
  return std::visit(v, m);
}

void validate(const NoiseModel& m) {
  if (auto g = std::get_if<GaussianNoise>(&m)) {
    if (!(g->sd > 0.0) || !std::isfinite(g->mean)) throw InvalidArgument("gaussian noise needs sd > 0");
  } else if (auto h = std::get_if<HuberNoise>(&m)) {
    if (!(h->rate >= 0.0 && h->rate <= 1.0)) throw InvalidArgument("huber rate must lie in [0, 1]");
    if (!(h->contaminant_sd >= 0.0)) throw InvalidArgument("huber contaminant sd must be >= 0");
  } else if (auto c = std::get_if<MisclassificationNoise>(&m)) {
    const auto k = static_cast<Eigen::Index>(c->values.size());
    if (k == 0 || c->table.rows() != k || c->table.cols() != k)
      throw InvalidArgument("misclassification table must be square over the listed values");
    for (Eigen::Index a = 0; a < k; ++a) {
      if ((c->table.row(a).array() < 0.0).any() || std::abs(c->table.row(a).sum() - 1.0) > 1e-9)
        throw InvalidArgument("misclassification table rows must be distributions");
    }
  } else if (auto t = std::get_if<TiltingNoise>(&m)) {
    if (!std::isfinite(t->theta) || !std::isfinite(t->theta_tilde))
      throw InvalidArgument("tilting parameters must be finite");
  }
}

Eigen::MatrixXd corrupt_covariates(const Eigen::MatrixXd& x, const NoiseModel& model,
                                   std::uint64_t seed) {
  validate(model);
  Rng rng(derive_seed(seed, 0x401e));
  Eigen::MatrixXd out = x;
  // Row-major draw order so a row's noise does not depend on the column count
  // of later rows.
  if (auto g = std::get_if<GaussianNoise>(&model)) {
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j) out(i, j) += normal(rng, g->mean, g->sd);
  } else if (auto h = std::get_if<HuberNoise>(&model)) {
    if (h->rate == 0.0) return out;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (uniform01(rng) >= h->rate) continue;
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        out(i, j) = normal(rng, h->contaminant_mean, h->contaminant_sd);
    }
  } else if (auto c = std::get_if<MisclassificationNoise>(&model)) {
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const auto it = std::find(c->values.begin(), c->values.end(), x(i, j));
        if (it == c->values.end())
          throw InvalidArgument("misclassification needs discrete covariates; value " +
                                format_double(x(i, j)) + " at row " + std::to_string(i + 1) +
                                " is not in the table");
        const auto a = it - c->values.begin();
        double u = uniform01(rng);
        Eigen::Index b = 0;
        for (; b + 1 < c->table.cols(); ++b) {
          u -= c->table(a, b);
          if (u < 0.0) break;
        }
        out(i, j) = c->values[b];
      }
  } else if (auto t = std::get_if<TiltingNoise>(&model)) {
    out.array() += t->theta_tilde - t->theta;
  }
  return out;
}

ObservedDataset corrupt(const ObservedDataset& data, const NoiseModel& model, std::uint64_t seed) {
  return data.with_covariates(corrupt_covariates(data.x(), model, seed));
}

GammaEstimate gamma_huber(double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw InvalidArgument("huber rate must lie in [0, 1]");
  return {rate, rate, "huber", {{"rate", rate}}};
}

namespace {

void check_distribution(std::span<const double> p, const char* name) {
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw InvalidArgument(std::string(name) + " has a negative entry");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9) throw InvalidArgument(std::string(name) + " does not sum to 1");
}

GammaEstimate both(double g, std::string method) {
  GammaEstimate e;
  e.gamma0 = e.gamma1 = std::clamp(g, 0.0, 1.0);
  e.method = std::move(method);
  return e;
}

} // namespace

GammaEstimate gamma_misclassification(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty())
    throw DimensionError("misclassification tables must share a nonempty support");
  check_distribution(p, "true table");
  check_distribution(q, "noisy table");
  double g = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) g = std::max(g, std::abs(p[i] - q[i]));
  return both(g, "misclassification");
}

GammaEstimate gamma_tilting(const Eigen::VectorXd& theta, const Eigen::VectorXd& theta_tilde,
                            const LogPartition& log_partition) {
  if (theta.size() != theta_tilde.size())
    throw DimensionError("tilting parameters differ in dimension");
  const auto [a, grad] = log_partition(theta);
  const auto [a_tilde, unused] = log_partition(theta_tilde);
  (void)unused;
  if (grad.size() != theta.size()) throw DimensionError("log-partition gradient has wrong size");
  const double bregman = a_tilde - a - grad.dot(theta_tilde - theta);
  if (!std::isfinite(bregman) || bregman < -1e-12)
    throw InvalidArgument("log-partition function is not convex at the supplied parameters");
  GammaEstimate e = both(std::sqrt(0.5 * std::max(0.0, bregman)), "exponential_tilting");
  e.diagnostics["bregman"] = bregman;
  return e;
}

GammaEstimate gamma_pinsker(std::span<const double> samples_p, std::span<const double> samples_q,
                            int bins) {
  if (samples_p.empty() || samples_q.empty()) throw InvalidArgument("pinsker needs samples from both distributions");
  if (bins < 2) throw InvalidArgument("pinsker needs at least 2 bins");
  double lo = samples_p[0], hi = samples_p[0];
  for (auto s : {samples_p, samples_q})
    for (double v : s) {
      if (!std::isfinite(v)) throw InvalidArgument("pinsker samples must be finite");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const double width = hi > lo ? (hi - lo) / bins : 1.0;
  auto histogram = [&](std::span<const double> s) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(bins);
    for (double v : s) {
      auto b = static_cast<int>((v - lo) / width);
      c[std::clamp(b, 0, bins - 1)] += 1.0;
    }
    const double n = static_cast<double>(s.size());
    const double smooth = 1.0 / (n * bins);
    return Eigen::VectorXd((c.array() / n + smooth) / (1.0 + bins * smooth));
  };
  const Eigen::VectorXd p = histogram(samples_p), q = histogram(samples_q);
  double kl = 0.0;
  for (int b = 0; b < bins; ++b) kl += p[b] * std::log(p[b] / q[b]);
  kl = std::max(0.0, kl);
  GammaEstimate e = both(std::sqrt(0.5 * kl), "pinsker");
  e.diagnostics["kl"] = kl;
  e.diagnostics["bins"] = bins;
  return e;
}

NoiseSchedule noise_schedule_from_string(const std::string& s) {
  if (s == "kang_schafer") return NoiseSchedule::kang_schafer;
  if (s == "multi_mediator") return NoiseSchedule::multi_mediator;
  if (s == "binary_outcome") return NoiseSchedule::binary_outcome;
  throw InvalidArgument("unknown noise schedule '" + s + "'");
}

const char* to_string(NoiseSchedule s) {
  switch (s) {
  case NoiseSchedule::kang_schafer: return "kang_schafer";
  case NoiseSchedule::multi_mediator: return "multi_mediator";
  case NoiseSchedule::binary_outcome: return "binary_outcome";
  }
  return "?";
}

std::vector<GaussianNoise> noise_levels(NoiseSchedule s) {
  switch (s) {
  case NoiseSchedule::kang_schafer: return {{1, 1}, {2, 1}, {3, 1}, {4, 1}, {5, 1}};
  case NoiseSchedule::multi_mediator: return {{0.1, 0.5}, {0.2, 0.5}, {0.3, 1}, {0.4, 1}, {0.5, 1}};
  case NoiseSchedule::binary_outcome: return {{0.1, 0.5}, {0.3, 0.5}, {0.5, 1}};
  }
  return {};
}

GaussianNoise noise_level(NoiseSchedule s, int level) {
  const auto levels = noise_levels(s);
  if (level < 1 || level > static_cast<int>(levels.size()))
    throw InvalidArgument("noise level " + std::to_string(level) + " is not in the " +
                          to_string(s) + " schedule");
  return levels[level - 1];
}

std::vector<double> default_gamma_table() { return {0.1, 0.2, 0.3, 0.4, 0.5}; }

} // namespace rci
