#include "rci/models.hpp"
#include "rci/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rci {

using kernels::Loss;

const char* to_string(Family f) {
  switch (f) {
  case Family::linear: return "linear";
  case Family::logistic: return "logistic";
  case Family::plm: return "plm";
  }
  return "?";
}

Family family_from_string(const std::string& s) {
  if (s == "linear") return Family::linear;
  if (s == "logistic") return Family::logistic;
  if (s == "plm") return Family::plm;
  throw InvalidArgument("unknown model family '" + s + "'");
}

ModelParams ModelParams::zeros(Family family, Eigen::Index covariate_dim) {
  return ModelParams{family, Eigen::VectorXd::Zero(covariate_dim + 2), 1.0};
}

Eigen::VectorXd ModelParams::theta0() const {
  Eigen::VectorXd out(theta.size() - 1);
  out[0] = theta[0];
  out.tail(covariate_dim()) = covariates();
  return out;
}

void ModelParams::validate() const {
  if (theta.size() < 2) throw DimensionError("model parameters need intercept and treatment slots");
  if (family != Family::logistic && !(sigma > 0.0)) throw InvalidArgument("noise scale must be positive");
}

namespace {

double score(const ModelParams& params, std::span<const double> x, int z) {
  params.validate();
  if (static_cast<Eigen::Index>(x.size()) != params.covariate_dim())
    throw DimensionError("covariate vector has " + std::to_string(x.size()) +
                         " entries, model expects " + std::to_string(params.covariate_dim()));
  double s = params.theta[0] + params.theta[1] * z;
  for (std::size_t j = 0; j < x.size(); ++j) s += params.theta[2 + j] * x[j];
  return s;
}

void require_samples(const ModelParams& params, std::span<const WeightedSample> samples) {
  if (samples.empty()) throw InvalidArgument("empty sample set");
  for (const auto& s : samples) {
    if (static_cast<Eigen::Index>(s.x.size()) != params.covariate_dim())
      throw DimensionError("sample covariate dimension does not match the model");
    if (s.weight < 0.0) throw InvalidArgument("negative sample weight");
  }
}

Eigen::VectorXd sample_weights(std::span<const WeightedSample> samples) {
  Eigen::VectorXd w(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) w[i] = samples[i].weight;
  return w;
}

Loss loglik_loss(Family family, Target target) {
  if (target == Target::propensity || family == Family::logistic) return Loss::bernoulli_nll;
  return Loss::gaussian_nll;
}

} // namespace

double linear_predict(const ModelParams& params, std::span<const double> x, int z) {
  return score(params, x, z);
}

double logistic_predict(const ModelParams& params, std::span<const double> x, int z) {
  // stays strictly inside (0, 1) even where the sigmoid rounds to 0 or 1
  return std::clamp(kernels::sigmoid(score(params, x, z)), std::numeric_limits<double>::min(),
                    std::nextafter(1.0, 0.0));
}

Design Design::from(const ObservedDataset& data) {
  Design d;
  const Eigen::Index n = data.size();
  d.phi.resize(n, data.dim() + 2);
  d.phi.col(0).setOnes();
  d.phi.col(1) = data.z();
  d.phi.rightCols(data.dim()) = data.x();
  d.propensity_phi = d.phi;
  d.propensity_phi.col(1).setZero();
  d.y = data.y();
  d.z = data.z();
  return d;
}

Design Design::from(std::span<const WeightedSample> samples) {
  Design d;
  const auto n = static_cast<Eigen::Index>(samples.size());
  const auto dim = n > 0 ? static_cast<Eigen::Index>(samples[0].x.size()) : 0;
  d.phi.resize(n, dim + 2);
  d.y.resize(n);
  d.z.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[i];
    if (static_cast<Eigen::Index>(s.x.size()) != dim)
      throw DimensionError("samples have inconsistent covariate dimensions");
    d.phi(i, 0) = 1.0;
    d.phi(i, 1) = s.z;
    for (Eigen::Index j = 0; j < dim; ++j) d.phi(i, 2 + j) = s.x[j];
    d.y[i] = s.y;
    d.z[i] = s.z;
  }
  d.propensity_phi = d.phi;
  if (n > 0) d.propensity_phi.col(1).setZero();
  return d;
}

double weighted_loglik(const ModelParams& params, std::span<const WeightedSample> samples,
                       Target target) {
  require_samples(params, samples);
  const Design d = Design::from(samples);
  return -kernels::row_loss(loglik_loss(params.family, target), d.features(target),
                            d.response(target), params.theta, sample_weights(samples),
                            params.sigma)
              .value;
}

Eigen::VectorXd loglik_grad_theta(const ModelParams& params,
                                  std::span<const WeightedSample> samples, Target target) {
  require_samples(params, samples);
  const Design d = Design::from(samples);
  return -kernels::row_loss(loglik_loss(params.family, target), d.features(target),
                            d.response(target), params.theta, sample_weights(samples),
                            params.sigma)
              .grad;
}

double mse_residual(const ModelParams& params, std::span<const WeightedSample> samples) {
  if (params.family == Family::logistic)
    throw InvalidArgument("mse_residual is defined for Gaussian families; use the likelihood");
  require_samples(params, samples);
  const Design d = Design::from(samples);
  return kernels::row_loss(Loss::squared, d.phi, d.y, params.theta, sample_weights(samples)).value;
}

kernels::Loss fit_loss(Family family, Target target) {
  if (target == Target::propensity || family == Family::logistic) return Loss::bernoulli_nll;
  return Loss::squared;
}

kernels::RowLoss evaluate_fit_loss(const ModelParams& params, const Design& design,
                                   const Eigen::VectorXd& omega, Target target) {
  return kernels::row_loss(fit_loss(params.family, target), design.features(target),
                           design.response(target), params.theta, omega, params.sigma);
}

Eigen::MatrixXd fit_curvature(const ModelParams& params, const Design& design,
                              const Eigen::VectorXd& omega, Target target) {
  return kernels::curvature(fit_loss(params.family, target), design.features(target),
                            params.theta, omega, params.sigma);
}

namespace {

// Columns that carry free parameters: the treatment column is fixed at zero
// for propensity models.
std::vector<Eigen::Index> free_columns(Eigen::Index p, Target target) {
  std::vector<Eigen::Index> cols;
  for (Eigen::Index j = 0; j < p; ++j)
    if (!(target == Target::propensity && j == 1)) cols.push_back(j);
  return cols;
}

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    Eigen::VectorXd x = ldlt.solve(b);
    if (x.allFinite() && (a * x - b).norm() <= 1e-9 * (1.0 + b.norm())) return x;
  }
  return a.completeOrthogonalDecomposition().solve(b);
}

Eigen::MatrixXd restrict(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(cols.size(), cols.size());
  for (std::size_t a = 0; a < cols.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b) out(a, b) = m(cols[a], cols[b]);
  return out;
}

Eigen::VectorXd restrict(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& cols) {
  Eigen::VectorXd out(cols.size());
  for (std::size_t a = 0; a < cols.size(); ++a) out[a] = v[cols[a]];
  return out;
}

} // namespace

FitResult fit_weighted(Family family, const Design& design, const Eigen::VectorXd& omega,
                       Target target, const ModelParams* warm_start) {
  if (design.rows() == 0) throw InvalidArgument("cannot fit a model to an empty sample set");
  if (omega.size() != design.rows()) throw DimensionError("weight vector length does not match rows");
  const Eigen::Index p = design.phi.cols();
  const auto cols = free_columns(p, target);
  const Loss loss = fit_loss(family, target);

  FitResult result;
  result.params = ModelParams::zeros(family, p - 2);
  if (warm_start && warm_start->theta.size() == p) result.params.theta = warm_start->theta;
  if (target == Target::propensity) result.params.theta[1] = 0.0;

  if (loss == Loss::squared) {
    const Eigen::MatrixXd& x = design.features(target);
    const Eigen::MatrixXd gram = x.transpose() * omega.asDiagonal() * x;
    const Eigen::VectorXd rhs = x.transpose() * omega.cwiseProduct(design.response(target));
    const Eigen::VectorXd sol = solve_spd(restrict(gram, cols), restrict(rhs, cols));
    for (std::size_t a = 0; a < cols.size(); ++a) result.params.theta[cols[a]] = sol[a];
    const auto check = evaluate_fit_loss(result.params, design, omega, target);
    result.gradient_norm = restrict(check.grad, cols).lpNorm<Eigen::Infinity>();
    result.converged = result.params.theta.allFinite();
    result.iterations = 1;
    return result;
  }

  // Damped Newton on the weighted Bernoulli negative log-likelihood.
  const double mass = std::max(omega.sum(), 1e-300);
  const double grad_tol = 1e-11 * mass;
  auto current = evaluate_fit_loss(result.params, design, omega, target);
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd g = restrict(current.grad, cols);
    result.gradient_norm = g.lpNorm<Eigen::Infinity>();
    result.iterations = it;
    if (result.gradient_norm <= grad_tol) {
      result.converged = true;
      return result;
    }
    Eigen::MatrixXd h = restrict(fit_curvature(result.params, design, omega, target), cols);
    h.diagonal().array() += 1e-12 * mass;
    const Eigen::VectorXd step = solve_spd(h, g);
    // Newton decrement below rounding of the loss: nothing left to gain.
    if (g.dot(step) <= 1e-15 * mass) {
      result.converged = true;
      return result;
    }
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      ModelParams trial = result.params;
      for (std::size_t a = 0; a < cols.size(); ++a) trial.theta[cols[a]] -= t * step[a];
      auto next = evaluate_fit_loss(trial, design, omega, target);
      if (std::isfinite(next.value) && next.value <= current.value + 1e-4 * t * -g.dot(step)) {
        result.params = std::move(trial);
        current = std::move(next);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }
  const Eigen::VectorXd g = restrict(current.grad, cols);
  result.gradient_norm = g.lpNorm<Eigen::Infinity>();
  // Stalled line search at a flat point still counts as an optimum.
  result.converged = result.gradient_norm <= std::max(grad_tol, 1e-8 * mass);
  return result;
}

} // namespace rci
