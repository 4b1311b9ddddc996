#pragma once

#include "rci/dataset.hpp"

#include <Eigen/Dense>

#include <array>

namespace rci {

/// A probability vector over a finite set of support rows. Construction
/// validates nonnegativity and unit mass (within 1e-12).
class EmpiricalDistribution {
public:
  EmpiricalDistribution() = default;
  explicit EmpiricalDistribution(Eigen::VectorXd weights);

  static EmpiricalDistribution uniform(Eigen::Index support_size);

  Eigen::Index support_size() const { return w_.size(); }
  const Eigen::VectorXd& weights() const { return w_; }
  double operator[](Eigen::Index i) const { return w_[i]; }

  bool operator==(const EmpiricalDistribution& o) const {
    return w_.size() == o.w_.size() && w_ == o.w_;
  }

private:
  Eigen::VectorXd w_;
};

/// Per-arm TV budgets (gamma_0 for control, gamma_1 for treated).
class TvBudget {
public:
  TvBudget() = default;
  TvBudget(double gamma0, double gamma1);
  static TvBudget both(double gamma) { return TvBudget(gamma, gamma); }

  double operator[](int z) const { return z == 0 ? gamma0_ : gamma1_; }
  double gamma0() const { return gamma0_; }
  double gamma1() const { return gamma1_; }

private:
  double gamma0_ = 0.0;
  double gamma1_ = 0.0;
};

/// Candidate per-arm row weights. `arm(z)` is laid out in the order of
/// `ObservedDataset::arm_rows(z)`.
struct WeightTable {
  std::array<EmpiricalDistribution, 2> arms;

  const EmpiricalDistribution& arm(int z) const { return arms[z]; }
  static WeightTable uniform(const ObservedDataset& data);
};

/// Total variation distance between distributions on a shared finite
/// support: half the l1 distance.
double tv_distance(const EmpiricalDistribution& p, const EmpiricalDistribution& q);

/// Euclidean projection onto the probability simplex (sort-based).
EmpiricalDistribution project_simplex(const Eigen::VectorXd& w);

/// Euclidean projection onto {v : ||v - center||_1 <= radius}.
Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& w, const EmpiricalDistribution& center,
                                double radius);

/// Euclidean projection onto the simplex intersected with the TV ball of
/// radius `gamma` (l1 radius 2*gamma) around `center`. Solved exactly from
/// the KKT conditions: the solution moves mass up on rows above one
/// threshold and down on rows below another, and each threshold is the root
/// of a monotone piecewise-linear mass equation.
EmpiricalDistribution project_feasible(const Eigen::VectorXd& w,
                                       const EmpiricalDistribution& center, double gamma);

/// Reference implementation of project_feasible by Dykstra's alternating
/// projections between the simplex and the l1 ball. Slow; kept for tests.
EmpiricalDistribution project_feasible_dykstra(const Eigen::VectorXd& w,
                                               const EmpiricalDistribution& center, double gamma,
                                               int max_rounds = 500, double tol = 1e-10);

/// Largest violation of {w >= 0, sum w = 1, ||w - center||_1 <= 2 gamma}.
double feasibility_residual(const Eigen::VectorXd& w, const EmpiricalDistribution& center,
                            double gamma);

} // namespace rci
