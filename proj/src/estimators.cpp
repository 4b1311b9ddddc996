#include "rci/estimators.hpp"
#include "rci/errors.hpp"
#include "rci/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rci {

const char* to_string(EstimatorKind k) {
  switch (k) {
  case EstimatorKind::backdoor: return "backdoor";
  case EstimatorKind::ipw: return "ipw";
  case EstimatorKind::frontdoor: return "frontdoor";
  case EstimatorKind::double_ml: return "double_ml";
  }
  return "?";
}

EstimatorKind estimator_from_string(const std::string& s) {
  if (s == "backdoor") return EstimatorKind::backdoor;
  if (s == "ipw") return EstimatorKind::ipw;
  if (s == "frontdoor") return EstimatorKind::frontdoor;
  if (s == "double_ml" || s == "doubleml") return EstimatorKind::double_ml;
  throw InvalidArgument("unknown estimator '" + s + "'");
}

Family EstimatorSpec::model_family() const {
  switch (kind) {
  case EstimatorKind::ipw: return Family::logistic;
  case EstimatorKind::double_ml: return Family::plm;
  default: return outcome_family;
  }
}

Target EstimatorSpec::model_target() const {
  return kind == EstimatorKind::ipw ? Target::propensity : Target::outcome;
}

void EstimatorSpec::validate() const {
  if (!(slack >= 0.0)) throw InvalidArgument("likelihood slack must be nonnegative");
  if (!(propensity_clip > 0.0 && propensity_clip < 0.5))
    throw InvalidArgument("propensity clip must lie in (0, 0.5)");
  if ((kind == EstimatorKind::backdoor || kind == EstimatorKind::frontdoor) &&
      outcome_family == Family::plm)
    throw InvalidArgument("backdoor and frontdoor outcome models are linear or logistic");
}

PreparedData::PreparedData(const ObservedDataset& data, const EstimatorSpec& spec)
    : data_(&data), spec_(spec), design_(Design::from(data)) {
  spec_.validate();
  data.require_both_arms();
  const Eigen::Index n = data.size();
  arm_.resize(n);
  slot_.resize(n);
  for (int z = 0; z < 2; ++z)
    for (std::size_t k = 0; k < data.arm_rows(z).size(); ++k) {
      arm_[data.arm_rows(z)[k]] = z;
      slot_[data.arm_rows(z)[k]] = static_cast<Eigen::Index>(k);
    }

  if (spec_.kind == EstimatorKind::double_ml) {
    if (n < 4) throw PositivityError("double ML needs at least four rows to split");
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(spec_.split_seed, 0x5b17));
    for (Eigen::Index i = n - 1; i > 0; --i) {
      const auto j = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(i + 1));
      std::swap(order[i], order[j]);
    }
    fit_half_.assign(n, 0);
    for (Eigen::Index k = 0; k < n / 2; ++k) fit_half_[order[k]] = 1;
    std::array<double, 2> counts{0.0, 0.0};
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (fit_half_[i]) {
        counts[arm_[i]] += 1.0;
        total += 1.0;
      }
    for (int z = 0; z < 2; ++z) fit_arm_frequency_[z] = counts[z] / total;
  } else {
    for (int z = 0; z < 2; ++z) fit_arm_frequency_[z] = data.arm_frequency(z);
  }
}

namespace {

// Per-arm mass of the rows selected by `mask` (all rows when empty).
std::array<double, 2> masked_arm_mass(const PreparedData& prep, const WeightTable& w,
                                      const std::vector<char>& mask, char keep) {
  std::array<double, 2> mass{0.0, 0.0};
  for (Eigen::Index i = 0; i < prep.data().size(); ++i)
    if (mask.empty() || mask[i] == keep)
      mass[prep.arm_of(i)] += w.arm(prep.arm_of(i))[prep.slot_of(i)];
  return mass;
}

} // namespace

Eigen::VectorXd PreparedData::fit_row_weights(const WeightTable& w) const {
  const Eigen::Index n = data_->size();
  Eigen::VectorXd omega = Eigen::VectorXd::Zero(n);
  if (fit_half_.empty()) {
    for (Eigen::Index i = 0; i < n; ++i)
      omega[i] = fit_arm_frequency_[arm_[i]] * w.arm(arm_[i])[slot_[i]];
    return omega;
  }
  const auto mass = masked_arm_mass(*this, w, fit_half_, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!fit_half_[i]) continue;
    const int z = arm_[i];
    if (mass[z] <= 0.0) throw NumericalFailure("an arm has no mass in the double ML fitting half");
    omega[i] = fit_arm_frequency_[z] * w.arm(z)[slot_[i]] / mass[z];
  }
  return omega;
}

std::array<Eigen::VectorXd, 2> PreparedData::fit_weight_gradient(
    const WeightTable& w, const Eigen::VectorXd& d_omega) const {
  std::array<Eigen::VectorXd, 2> g{Eigen::VectorXd::Zero(data_->arm_size(0)),
                                   Eigen::VectorXd::Zero(data_->arm_size(1))};
  const Eigen::Index n = data_->size();
  if (fit_half_.empty()) {
    for (Eigen::Index i = 0; i < n; ++i)
      g[arm_[i]][slot_[i]] = fit_arm_frequency_[arm_[i]] * d_omega[i];
    return g;
  }
  // omega_i = pi_z w_i / S_z over the fitting half; quotient rule.
  const auto mass = masked_arm_mass(*this, w, fit_half_, 1);
  std::array<double, 2> mean{0.0, 0.0};
  for (Eigen::Index i = 0; i < n; ++i)
    if (fit_half_[i]) mean[arm_[i]] += w.arm(arm_[i])[slot_[i]] / mass[arm_[i]] * d_omega[i];
  for (Eigen::Index i = 0; i < n; ++i)
    if (fit_half_[i]) {
      const int z = arm_[i];
      g[z][slot_[i]] = fit_arm_frequency_[z] / mass[z] * (d_omega[i] - mean[z]);
    }
  return g;
}

namespace {

struct OutcomeCurve {
  double value;
  double slope; // d value / d score
};

inline OutcomeCurve outcome_curve(Family family, double score) {
  if (family == Family::logistic) {
    const double p = kernels::sigmoid(score);
    return {p, p * (1.0 - p)};
  }
  return {score, 1.0};
}

void require_matching(const PreparedData& prep, const ModelParams& theta, const WeightTable& w) {
  if (theta.theta.size() != prep.design().phi.cols())
    throw DimensionError("parameter vector does not match the covariate dimension");
  for (int z = 0; z < 2; ++z)
    if (w.arm(z).support_size() != prep.data().arm_size(z))
      throw DimensionError("weight table does not match the arm sizes of the dataset");
}

ObjectiveEval init_eval(const PreparedData& prep) {
  ObjectiveEval e;
  e.grad_theta = Eigen::VectorXd::Zero(prep.design().phi.cols());
  for (int z = 0; z < 2; ++z) e.grad_w[z] = Eigen::VectorXd::Zero(prep.data().arm_size(z));
  return e;
}

// Backdoor and frontdoor share the structure
//   Q = sum_z sum_{rows of arm z} w_z h_z(x),  h_z(x) = sum_{z'} c[z][z'] g(x, z'; theta).
enum class Adjustment { backdoor, frontdoor };

ObjectiveEval adjustment_objective(const PreparedData& prep, const ModelParams& theta,
                                   const WeightTable& w, Adjustment form) {
  ObjectiveEval e = init_eval(prep);
  const auto& data = prep.data();
  const Eigen::MatrixXd& base_phi = prep.design().propensity_phi; // (1, 0, x)
  const Eigen::VectorXd base = base_phi * theta.theta;
  const Family fam = theta.family;
  const std::array<double, 2> pz{data.arm_frequency(0), data.arm_frequency(1)};
  double c[2][2];
  switch (form) {
  case Adjustment::backdoor:
    c[0][0] = -1.0, c[0][1] = 0.0, c[1][0] = 0.0, c[1][1] = 1.0;
    break;
  case Adjustment::frontdoor:
    for (int z = 0; z < 2; ++z) {
      const double sign = z == 1 ? 1.0 : -1.0;
      c[z][0] = sign * pz[0], c[z][1] = sign * pz[1];
    }
    break;
  }

  // coef_on_phi: d Q / d theta through the (1, 0, x) part of each row;
  // coef_on_treat: through the treatment slot.
  Eigen::VectorXd coef_on_phi = Eigen::VectorXd::Zero(data.size());
  double coef_on_treat = 0.0;
  for (int z = 0; z < 2; ++z) {
    const auto& rows = data.arm_rows(z);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const Eigen::Index i = rows[k];
      double h = 0.0, dh_phi = 0.0, dh_treat = 0.0;
      for (int zp = 0; zp < 2; ++zp) {
        if (c[z][zp] == 0.0) continue;
        const OutcomeCurve g = outcome_curve(fam, base[i] + theta.theta[1] * zp);
        h += c[z][zp] * g.value;
        dh_phi += c[z][zp] * g.slope;
        dh_treat += c[z][zp] * g.slope * zp;
      }
      const double wk = w.arm(z)[k];
      e.value += wk * h;
      e.grad_w[z][k] = h;
      coef_on_phi[i] = wk * dh_phi;
      coef_on_treat += wk * dh_treat;
    }
  }
  e.grad_theta = base_phi.transpose() * coef_on_phi;
  e.grad_theta[1] += coef_on_treat;
  return e;
}

ObjectiveEval ipw(const PreparedData& prep, const ModelParams& theta, const WeightTable& w) {
  ObjectiveEval e = init_eval(prep);
  const auto& data = prep.data();
  const Eigen::MatrixXd& phi = prep.design().propensity_phi;
  const Eigen::VectorXd scores = phi * theta.theta;
  const double lo = prep.spec().propensity_clip, hi = 1.0 - lo;
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const int z = prep.arm_of(i);
    const double y = data.y()[i];
    const double p = kernels::sigmoid(scores[i]);
    const double f = std::clamp(p, lo, hi);
    const bool clipped = f != p;
    const double omega = data.arm_frequency(z) * w.arm(z)[prep.slot_of(i)];
    double s, ds;
    if (z == 1) {
      s = y / f;
      ds = clipped ? 0.0 : -y * (1.0 - f) / f;
    } else {
      s = -y / (1.0 - f);
      ds = clipped ? 0.0 : -y * f / (1.0 - f);
    }
    e.value += omega * s;
    e.grad_w[z][prep.slot_of(i)] = data.arm_frequency(z) * s;
    coef[i] = omega * ds;
  }
  e.grad_theta = phi.transpose() * coef;
  e.grad_theta[1] = 0.0;
  return e;
}

// (y - f(x; theta_0)) z / z^2 averaged over the evaluation half: with z in
// {0, 1} this is the weighted mean of y - f(x; theta_0) over treated rows
// of the evaluation half, arm-1 weights renormalised within that half.
ObjectiveEval double_ml(const PreparedData& prep, const ModelParams& theta, const WeightTable& w) {
  ObjectiveEval e = init_eval(prep);
  const auto& data = prep.data();
  const Eigen::MatrixXd& phi = prep.design().propensity_phi; // (1, 0, x)
  const Eigen::VectorXd nuisance = phi * theta.theta;
  const auto& rows = data.arm_rows(1);
  double mass = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k)
    if (!prep.in_fit_half(rows[k])) mass += w.arm(1)[k];
  bool any = false;
  for (auto i : rows) any = any || !prep.in_fit_half(i);
  if (!any) throw PositivityError("double ML evaluation half has no treated rows (E[Z^2] = 0)");
  if (mass <= 0.0) throw NumericalFailure("double ML evaluation half carries no treated mass");

  Eigen::VectorXd coef = Eigen::VectorXd::Zero(data.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Eigen::Index i = rows[k];
    if (prep.in_fit_half(i)) continue;
    const double r = data.y()[i] - nuisance[i];
    e.value += w.arm(1)[k] / mass * r;
    coef[i] = -w.arm(1)[k] / mass;
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Eigen::Index i = rows[k];
    if (prep.in_fit_half(i)) continue;
    e.grad_w[1][k] = (data.y()[i] - nuisance[i] - e.value) / mass;
  }
  e.grad_theta = phi.transpose() * coef;
  e.grad_theta[1] = 0.0;
  return e;
}

} // namespace

ObjectiveEval evaluate_objective(const PreparedData& prep, const ModelParams& theta,
                                 const WeightTable& weights) {
  require_matching(prep, theta, weights);
  switch (prep.spec().kind) {
  case EstimatorKind::backdoor:
    return adjustment_objective(prep, theta, weights, Adjustment::backdoor);
  case EstimatorKind::frontdoor: return adjustment_objective(prep, theta, weights, Adjustment::frontdoor);
  case EstimatorKind::ipw: return ipw(prep, theta, weights);
  case EstimatorKind::double_ml: return double_ml(prep, theta, weights);
  }
  throw InvalidArgument("unknown estimator kind");
}

FitResult fit_model(const PreparedData& prep, const WeightTable& weights,
                    const ModelParams* warm_start) {
  const auto& spec = prep.spec();
  return fit_weighted(spec.model_family(), prep.design(), prep.fit_row_weights(weights),
                      spec.model_target(), warm_start);
}

ConstraintEval evaluate_constraint(const PreparedData& prep, const ModelParams& theta,
                                   const WeightTable& weights,
                                   const ModelParams* refit_warm_start) {
  require_matching(prep, theta, weights);
  const auto& spec = prep.spec();
  const Eigen::VectorXd omega = prep.fit_row_weights(weights);
  const Target target = spec.model_target();

  ConstraintEval c;
  c.refit = fit_weighted(spec.model_family(), prep.design(), omega, target,
                         refit_warm_start ? refit_warm_start : &theta);
  ModelParams current = theta;
  current.family = spec.model_family();
  const auto at_theta = evaluate_fit_loss(current, prep.design(), omega, target);
  const auto at_min = evaluate_fit_loss(c.refit.params, prep.design(), omega, target);
  c.f1 = at_theta.value;
  c.f1_min = at_min.value;
  c.v = c.f1 - c.f1_min - spec.slack;
  c.grad_theta = at_theta.grad;
  if (target == Target::propensity) c.grad_theta[1] = 0.0;
  c.grad_w = prep.fit_weight_gradient(weights, at_theta.per_row - at_min.per_row);
  return c;
}

namespace {

double objective_once(EstimatorSpec spec, const ModelParams& theta, const WeightTable& weights,
                      const ObservedDataset& data) {
  if (spec.kind != EstimatorKind::ipw && spec.kind != EstimatorKind::double_ml)
    spec.outcome_family = theta.family == Family::logistic ? Family::logistic : Family::linear;
  const PreparedData prep(data, spec);
  return evaluate_objective(prep, theta, weights).value;
}

} // namespace

double backdoor_objective(const ModelParams& theta, const WeightTable& weights,
                          const ObservedDataset& data) {
  return objective_once({.kind = EstimatorKind::backdoor}, theta, weights, data);
}

double ipw_objective(const ModelParams& theta, const WeightTable& weights,
                     const ObservedDataset& data, double propensity_clip) {
  return objective_once({.kind = EstimatorKind::ipw, .propensity_clip = propensity_clip}, theta,
                        weights, data);
}

double frontdoor_objective(const ModelParams& theta, const WeightTable& weights,
                           const ObservedDataset& data) {
  return objective_once({.kind = EstimatorKind::frontdoor}, theta, weights, data);
}

double doubleml_objective(const ModelParams& theta, const WeightTable& weights,
                          const ObservedDataset& data, std::uint64_t split_seed) {
  return objective_once({.kind = EstimatorKind::double_ml, .split_seed = split_seed}, theta,
                        weights, data);
}

double likelihood_constraint(const EstimatorSpec& spec, const ModelParams& theta,
                             const WeightTable& weights, const ObservedDataset& data) {
  const PreparedData prep(data, spec);
  return evaluate_constraint(prep, theta, weights).v;
}

AteEstimate naive_estimate(const EstimatorSpec& spec, const ObservedDataset& data) {
  const PreparedData prep(data, spec);
  const WeightTable uniform = WeightTable::uniform(data);
  const FitResult fit = fit_model(prep, uniform);
  if (!fit.converged) throw NumericalFailure("naive model fit did not converge");
  const double value = evaluate_objective(prep, fit.params, uniform).value;
  if (!std::isfinite(value)) throw NumericalFailure("naive estimate is not finite");
  return AteEstimate{value, spec.kind, fit.params};
}

} // namespace rci
