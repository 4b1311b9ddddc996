#pragma once

#include "rci/dataset.hpp"
#include "rci/kernels.hpp"

#include <Eigen/Dense>

#include <span>

namespace rci {

enum class Family { linear, logistic, plm };
enum class Target { outcome, propensity };

const char* to_string(Family f);
Family family_from_string(const std::string& s);

/// Parameters of a parametric family. The layout of `theta` is
/// (intercept, treatment coefficient, covariate coefficients...) for every
/// family. For the partially linear model the treatment coefficient is the
/// effect slice theta_1 and the rest is the nuisance slice theta_0.
/// Propensity models keep the treatment slot at zero.
struct ModelParams {
  Family family = Family::linear;
  Eigen::VectorXd theta;
  double sigma = 1.0; // Gaussian noise scale (linear, plm)

  static ModelParams zeros(Family family, Eigen::Index covariate_dim);

  Eigen::Index covariate_dim() const { return theta.size() - 2; }
  double intercept() const { return theta[0]; }
  double treatment() const { return theta[1]; }
  Eigen::VectorXd covariates() const { return theta.tail(covariate_dim()); }

  Eigen::VectorXd theta0() const; // (intercept, covariates)
  double theta1() const { return theta[1]; }

  void validate() const;
};

/// One observed row joined with the probability mass the current weight
/// table assigns to it.
struct WeightedSample {
  std::span<const double> x;
  double y = 0.0;
  int z = 0;
  double weight = 0.0;
};

double linear_predict(const ModelParams& params, std::span<const double> x, int z);
double logistic_predict(const ModelParams& params, std::span<const double> x, int z);

/// sum_i weight_i log p_theta(row_i). Outcome target: Gaussian density of y
/// (linear, plm) or Bernoulli mass of y (logistic). Propensity target:
/// Bernoulli mass of z under sigmoid(intercept + covariates . x).
double weighted_loglik(const ModelParams& params, std::span<const WeightedSample> samples,
                       Target target);
Eigen::VectorXd loglik_grad_theta(const ModelParams& params,
                                  std::span<const WeightedSample> samples, Target target);
/// sum_i weight_i (y_i - prediction_i)^2 (linear and plm only).
double mse_residual(const ModelParams& params, std::span<const WeightedSample> samples);

/// Design rows (1, z, x) for a block of samples. `propensity_phi` is the same
/// matrix with the treatment column zeroed.
struct Design {
  Eigen::MatrixXd phi;
  Eigen::MatrixXd propensity_phi;
  Eigen::VectorXd y;
  Eigen::VectorXd z;

  static Design from(const ObservedDataset& data);
  static Design from(std::span<const WeightedSample> samples);
  Eigen::Index rows() const { return phi.rows(); }

  const Eigen::MatrixXd& features(Target t) const {
    return t == Target::outcome ? phi : propensity_phi;
  }
  const Eigen::VectorXd& response(Target t) const { return t == Target::outcome ? y : z; }
};

/// The per-row criterion whose weighted sum defines the fitting problem:
/// squared error for Gaussian outcomes, Bernoulli negative log-likelihood
/// for logistic outcomes and propensity models.
kernels::Loss fit_loss(Family family, Target target);

kernels::RowLoss evaluate_fit_loss(const ModelParams& params, const Design& design,
                                   const Eigen::VectorXd& omega, Target target);
Eigen::MatrixXd fit_curvature(const ModelParams& params, const Design& design,
                              const Eigen::VectorXd& omega, Target target);

struct FitResult {
  ModelParams params;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
};

/// Weighted maximum-likelihood fit (weighted least squares for Gaussian
/// families, damped Newton for Bernoulli ones). `warm_start` seeds Newton.
FitResult fit_weighted(Family family, const Design& design, const Eigen::VectorXd& omega,
                       Target target, const ModelParams* warm_start = nullptr);

} // namespace rci
