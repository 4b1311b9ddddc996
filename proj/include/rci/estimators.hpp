#pragma once

#include "rci/dataset.hpp"
#include "rci/empirical.hpp"
#include "rci/models.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace rci {

enum class EstimatorKind { backdoor, ipw, frontdoor, double_ml };

const char* to_string(EstimatorKind k);
EstimatorKind estimator_from_string(const std::string& s);

/// A causal adjustment plug-in: which identification formula is the
/// objective, which parametric model it uses, and the slack of the
/// likelihood constraint.
struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::backdoor;
  /// Outcome model family for backdoor and frontdoor (linear or logistic).
  /// IPW always fits a logistic propensity model and double ML a partially
  /// linear model.
  Family outcome_family = Family::linear;
  /// epsilon: allowed excess of the fitting criterion over its attained
  /// minimum under the candidate weights.
  double slack = 1e-3;
  /// Propensities are clipped to [clip, 1 - clip] inside the IPW score.
  double propensity_clip = 0.01;
  /// Seed of the shuffle that assigns rows to the fitting and evaluation
  /// halves for double ML.
  std::uint64_t split_seed = 0;

  Family model_family() const;
  Target model_target() const;
  void validate() const;
};

struct AteEstimate {
  double value = 0.0;
  EstimatorKind kind = EstimatorKind::backdoor;
  ModelParams theta;
};

/// Dataset-dependent state shared by every evaluation: the design matrix,
/// arm bookkeeping and (for double ML) the sample split. Immutable.
class PreparedData {
public:
  PreparedData(const ObservedDataset& data, const EstimatorSpec& spec);

  const ObservedDataset& data() const { return *data_; }
  const EstimatorSpec& spec() const { return spec_; }
  const Design& design() const { return design_; }

  /// Row weights used by the fitting criterion.
  Eigen::VectorXd fit_row_weights(const WeightTable& w) const;
  /// Chain rule from d/d(fit row weight) to per-arm weight gradients.
  std::array<Eigen::VectorXd, 2> fit_weight_gradient(const WeightTable& w,
                                                     const Eigen::VectorXd& d_omega) const;

  /// Double ML: whether row i belongs to the fitting half.
  bool in_fit_half(Eigen::Index i) const { return fit_half_.empty() || fit_half_[i]; }
  const std::vector<char>& fit_half_mask() const { return fit_half_; }

  // Arm-local position of each dataset row.
  int arm_of(Eigen::Index i) const { return arm_[i]; }
  Eigen::Index slot_of(Eigen::Index i) const { return slot_[i]; }

private:
  const ObservedDataset* data_;
  EstimatorSpec spec_;
  Design design_;
  std::vector<int> arm_;
  std::vector<Eigen::Index> slot_;
  std::vector<char> fit_half_; // empty unless double ML
  std::array<double, 2> fit_arm_frequency_{};
};

struct ObjectiveEval {
  double value = 0.0;
  Eigen::VectorXd grad_theta;
  std::array<Eigen::VectorXd, 2> grad_w;
};

struct ConstraintEval {
  double v = 0.0;        // f1(theta) - f1(refit) - slack
  double f1 = 0.0;
  double f1_min = 0.0;   // attained minimum under the same weights
  Eigen::VectorXd grad_theta;
  std::array<Eigen::VectorXd, 2> grad_w;
  FitResult refit;       // weighted MLE under the same weights
};

/// Q(theta, weights) with gradients in theta and in the per-arm weights.
ObjectiveEval evaluate_objective(const PreparedData& prep, const ModelParams& theta,
                                 const WeightTable& weights);

/// Constraint residual v and its gradients. The weight gradient of the
/// attained minimum uses the envelope theorem (per-row loss at the refit).
ConstraintEval evaluate_constraint(const PreparedData& prep, const ModelParams& theta,
                                   const WeightTable& weights,
                                   const ModelParams* refit_warm_start = nullptr);

/// Weighted MLE of the spec's model under `weights`.
FitResult fit_model(const PreparedData& prep, const WeightTable& weights,
                    const ModelParams* warm_start = nullptr);

// Single-shot forms of the objectives. Each prepares the dataset on every
// call; the solver uses PreparedData directly.
double backdoor_objective(const ModelParams& theta, const WeightTable& weights,
                          const ObservedDataset& data);
double ipw_objective(const ModelParams& theta, const WeightTable& weights,
                     const ObservedDataset& data, double propensity_clip = 0.01);
double frontdoor_objective(const ModelParams& theta, const WeightTable& weights,
                           const ObservedDataset& data);
double doubleml_objective(const ModelParams& theta, const WeightTable& weights,
                          const ObservedDataset& data, std::uint64_t split_seed = 0);

double likelihood_constraint(const EstimatorSpec& spec, const ModelParams& theta,
                             const WeightTable& weights, const ObservedDataset& data);

/// Unweighted fit on the data as given, objective at uniform weights.
AteEstimate naive_estimate(const EstimatorSpec& spec, const ObservedDataset& data);

} // namespace rci
