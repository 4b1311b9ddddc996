#pragma once

#include "rci/estimators.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace rci {

enum class Direction { lower, upper };
const char* to_string(Direction d);

struct SolverConfig {
  // eta_theta scales a curvature-preconditioned step (1 = full step).
  double eta_theta = 1.0;
  double eta_lambda = 100.0;
  // Largest per-row weight move per iteration, in units of 1/n_z.
  std::array<double, 2> eta_z{0.1, 0.1};
  int iterations = 2000;
  TvBudget budgets;
  Direction direction = Direction::lower;
  // Best-iterate selection accepts iterates with v <= tolerance_feas.
  double tolerance_feas = 1e-4;
  std::uint64_t seed = 0;
  double lambda_init = 1.0;
  // Confidence level for the sampling-uncertainty limits; unset disables them.
  std::optional<double> alpha;
  bool trace = false;

  void validate() const;
};

struct LagrangeState {
  ModelParams theta;
  double lambda = 0.0;
  WeightTable weights;
  int t = 0;
};

struct TraceRecord {
  int t = 0;
  double objective = 0.0;
  double v = 0.0;
  double lambda = 0.0;
};

struct GdaResult {
  LagrangeState best;
  double objective = 0.0; // Q at the returned iterate
  double v = 0.0;         // constraint residual at the returned iterate
  bool feasible = false;
  std::vector<TraceRecord> trace;
};

struct ConfidenceLimits {
  double lower_of_lower = 0.0; // l_{tau_L}
  double upper_of_lower = 0.0; // u_{tau_L}
  double lower_of_upper = 0.0; // l_{tau_U}
  double upper_of_upper = 0.0; // u_{tau_U}
  double rho = 0.0;
};

struct BoundResult {
  double tau_lower = 0.0;
  double tau_upper = 0.0;
  double naive = 0.0;
  GdaResult lower;
  GdaResult upper;
  std::optional<ConfidenceLimits> confidence;
};

// sign(direction) Q + lambda v; the sign flips Q only.
double lagrangian(const PreparedData& prep, const LagrangeState& state, Direction direction);
double lagrangian(const EstimatorSpec& spec, const LagrangeState& state,
                  const ObservedDataset& data, Direction direction);

// Extra player for the confidence limits: a joint reweighting q of all n
// rows inside a TV ball of `radius` around uniform. q multiplies the arm
// weights (renormalised per arm). `same_sense` means q moves Q the same way
// as the arm weights.
struct OuterBall {
  double radius = 0.0;
  bool same_sense = true;
};

GdaResult projected_gda(const PreparedData& prep, const SolverConfig& config,
                        const std::optional<OuterBall>& outer = std::nullopt);
GdaResult projected_gda(const EstimatorSpec& spec, const ObservedDataset& data,
                        const SolverConfig& config);

BoundResult solve_bounds(const PreparedData& prep, const SolverConfig& config);
BoundResult solve_bounds(const EstimatorSpec& spec, const ObservedDataset& data,
                         const SolverConfig& config);

double chi_square_quantile(double alpha);

// Needs config.alpha. tau_lower/tau_upper anchor the ordering l <= tau <= u.
ConfidenceLimits confidence_limits(const PreparedData& prep, const SolverConfig& config,
                                   double tau_lower, double tau_upper);
ConfidenceLimits confidence_limits(const EstimatorSpec& spec, const ObservedDataset& data,
                                   const SolverConfig& config);

} // namespace rci
