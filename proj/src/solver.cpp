#include "rci/solver.hpp"
#include "rci/errors.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace rci {

const char* to_string(Direction d) { return d == Direction::lower ? "lower" : "upper"; }

void SolverConfig::validate() const {
  auto rate = [](double r, const char* name) {
    if (!(r >= 0.0) || !std::isfinite(r))
      throw InvalidArgument(std::string(name) + " must be a finite nonnegative learning rate");
  };
  rate(eta_theta, "eta_theta");
  rate(eta_lambda, "eta_lambda");
  rate(eta_z[0], "eta_z[0]");
  rate(eta_z[1], "eta_z[1]");
  if (iterations < 1) throw InvalidArgument("iterations must be at least 1");
  if (!(tolerance_feas > 0.0)) throw InvalidArgument("tolerance_feas must be positive");
  if (!(lambda_init >= 0.0)) throw InvalidArgument("lambda_init must be nonnegative");
  if (alpha && !(*alpha > 0.0 && *alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
}

namespace {

double sign_of(Direction d) { return d == Direction::lower ? 1.0 : -1.0; }

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

// Floor on lambda in the parameter preconditioner.
constexpr double kMinCurvatureScale = 1e-2;

// Arm weights times the outer reweighting q, renormalised per arm.
struct Composed {
  WeightTable table;
  std::array<double, 2> mass{1.0, 1.0};
};

Composed compose(const PreparedData& prep, const WeightTable& w, const Eigen::VectorXd* q) {
  Composed c;
  if (!q) {
    c.table = w;
    return c;
  }
  const auto& data = prep.data();
  for (int z = 0; z < 2; ++z) {
    const auto& rows = data.arm_rows(z);
    Eigen::VectorXd v(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) v[k] = w.arm(z)[k] * (*q)[rows[k]];
    c.mass[z] = v.sum();
    if (!(c.mass[z] > 0.0)) throw NumericalFailure("composed weights lost all mass in an arm");
    v /= c.mass[z];
    // Renormalisation is exact up to rounding; absorb it in the largest entry.
    Eigen::Index big;
    v.maxCoeff(&big);
    v[big] += 1.0 - v.sum();
    c.table.arms[z] = EmpiricalDistribution(v.cwiseMax(0.0));
  }
  return c;
}

// Gradient in the arm weights and in q from a gradient in the composed weights.
void chain_composed(const PreparedData& prep, const WeightTable& w, const Eigen::VectorXd& q,
                    const Composed& c, const std::array<Eigen::VectorXd, 2>& g,
                    std::array<Eigen::VectorXd, 2>& g_w, Eigen::VectorXd& g_q) {
  const auto& data = prep.data();
  g_q = Eigen::VectorXd::Zero(data.size());
  for (int z = 0; z < 2; ++z) {
    const auto& rows = data.arm_rows(z);
    const double mean = c.table.arm(z).weights().dot(g[z]);
    g_w[z].resize(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const double centred = (g[z][k] - mean) / c.mass[z];
      g_w[z][k] = q[rows[k]] * centred;
      g_q[rows[k]] = w.arm(z)[k] * centred;
    }
  }
}

// Step whose largest per-row move is eta times the uniform mass 1/n.
Eigen::VectorXd normalised_step(const Eigen::VectorXd& w, const Eigen::VectorXd& g, double eta) {
  const Eigen::VectorXd centred = g.array() - g.mean();
  const double scale = centred.cwiseAbs().maxCoeff();
  if (eta == 0.0 || !(scale > 0.0)) return w;
  return w - (eta / (static_cast<double>(w.size()) * scale)) * centred;
}

} // namespace

double lagrangian(const PreparedData& prep, const LagrangeState& state, Direction direction) {
  const auto obj = evaluate_objective(prep, state.theta, state.weights);
  const auto con = evaluate_constraint(prep, state.theta, state.weights);
  return sign_of(direction) * obj.value + state.lambda * con.v;
}

double lagrangian(const EstimatorSpec& spec, const LagrangeState& state,
                  const ObservedDataset& data, Direction direction) {
  return lagrangian(PreparedData(data, spec), state, direction);
}

GdaResult projected_gda(const PreparedData& prep, const SolverConfig& config,
                        const std::optional<OuterBall>& outer) {
  config.validate();
  const auto& data = prep.data();
  const auto& spec = prep.spec();
  const double sign = sign_of(config.direction);
  const Target target = spec.model_target();
  const bool propensity = target == Target::propensity;

  WeightTable w = WeightTable::uniform(data);
  const WeightTable center = w;
  Eigen::VectorXd q;
  EmpiricalDistribution q_center;
  if (outer) {
    q_center = EmpiricalDistribution::uniform(data.size());
    q = q_center.weights();
  }
  const double q_sign = outer && !outer->same_sense ? -1.0 : 1.0;
  const double eta_q = 0.5 * (config.eta_z[0] + config.eta_z[1]);
  // The mixed min-max runs need the outer player to settle before an
  // iterate is a meaningful candidate.
  const int burn_in = outer && !outer->same_sense ? config.iterations / 10 : 0;

  Composed comp = compose(prep, w, outer ? &q : nullptr);
  FitResult start = fit_model(prep, comp.table);
  if (!start.converged) throw NumericalFailure("initial fit did not converge", 0);
  ModelParams theta = start.params;
  ModelParams warm = start.params;
  double lambda = config.lambda_init;

  GdaResult out;
  bool have_feasible = false;
  double best_value = 0.0;
  double best_v_infeasible = std::numeric_limits<double>::infinity();

  for (int t = 0; t <= config.iterations; ++t) {
    const ObjectiveEval obj = evaluate_objective(prep, theta, comp.table);
    const ConstraintEval con = evaluate_constraint(prep, theta, comp.table, &warm);
    if (!std::isfinite(obj.value) || !std::isfinite(con.v) || !all_finite(obj.grad_theta) ||
        !all_finite(con.grad_theta) || !all_finite(obj.grad_w[0]) || !all_finite(obj.grad_w[1]) ||
        !all_finite(con.grad_w[0]) || !all_finite(con.grad_w[1]))
      throw NumericalFailure("non-finite objective or gradient", t);
    if (con.refit.converged) warm = con.refit.params;
    if (config.trace) out.trace.push_back({t, obj.value, con.v, lambda});

    // Candidate: the iterate's weights with theta at their exact weighted
    // MLE, which satisfies the likelihood constraint by construction.
    if (t >= burn_in) {
      if (con.refit.converged) {
        const double value = evaluate_objective(prep, con.refit.params, comp.table).value;
        const double v_polished = -spec.slack;
        if (std::isfinite(value) && v_polished <= config.tolerance_feas &&
            (!have_feasible || sign * value < sign * best_value)) {
          have_feasible = true;
          best_value = value;
          out.best = {con.refit.params, lambda, comp.table, t};
          out.objective = value;
          out.v = v_polished;
          out.feasible = true;
        }
      } else if (!have_feasible && con.v < best_v_infeasible) {
        best_v_infeasible = con.v;
        out.best = {theta, lambda, comp.table, t};
        out.objective = obj.value;
        out.v = con.v;
        out.feasible = false;
      }
    }
    if (t == config.iterations) break;

    // lambda: projected ascent on v.
    lambda = std::max(0.0, lambda + config.eta_lambda * con.v);

    // Weights: projected descent on the Lagrangian.
    std::array<Eigen::VectorXd, 2> g_w;
    for (int z = 0; z < 2; ++z) g_w[z] = sign * obj.grad_w[z] + lambda * con.grad_w[z];
    Eigen::VectorXd g_q;
    if (outer) {
      std::array<Eigen::VectorXd, 2> g_obj_w, g_con_w;
      Eigen::VectorXd g_obj_q, g_con_q;
      chain_composed(prep, w, q, comp, obj.grad_w, g_obj_w, g_obj_q);
      chain_composed(prep, w, q, comp, con.grad_w, g_con_w, g_con_q);
      for (int z = 0; z < 2; ++z) g_w[z] = sign * g_obj_w[z] + lambda * g_con_w[z];
      g_q = q_sign * sign * g_obj_q + lambda * g_con_q;
    }
    for (int z = 0; z < 2; ++z) {
      if (config.budgets[z] == 0.0) continue;
      w.arms[z] = project_feasible(normalised_step(w.arm(z).weights(), g_w[z], config.eta_z[z]),
                                   center.arm(z), config.budgets[z]);
    }
    if (outer && outer->radius > 0.0)
      q = project_feasible(normalised_step(q, g_q, eta_q), q_center, outer->radius).weights();
    comp = compose(prep, w, outer ? &q : nullptr);

    // theta: preconditioned descent on the Lagrangian at the new weights,
    // so that theta never lags the weights by a step.
    if (config.eta_theta > 0.0) {
      const Eigen::VectorXd omega = prep.fit_row_weights(comp.table);
      ModelParams at = theta;
      at.family = spec.model_family();
      const auto fit = evaluate_fit_loss(at, prep.design(), omega, target);
      const ObjectiveEval here = evaluate_objective(prep, theta, comp.table);
      Eigen::VectorXd g_theta = sign * here.grad_theta + lambda * fit.grad;
      const double scale = std::max(lambda, kMinCurvatureScale);
      Eigen::MatrixXd h = fit_curvature(at, prep.design(), omega, target) * scale;
      h.diagonal().array() += 1e-10 * (h.trace() + 1.0);
      if (propensity) {
        h.row(1).setZero();
        h.col(1).setZero();
        h(1, 1) = 1.0;
        g_theta[1] = 0.0;
      }
      const Eigen::VectorXd step = h.ldlt().solve(g_theta);
      if (!all_finite(step)) throw NumericalFailure("non-finite parameter step", t);
      // Backtrack on the Lagrangian at fixed (w, lambda): saturated logistic
      // fits have almost no curvature and a full step can run away.
      auto lagrange_at = [&](ModelParams p) {
        const double q_val = evaluate_objective(prep, p, comp.table).value;
        p.family = spec.model_family();
        return sign * q_val + lambda * evaluate_fit_loss(p, prep.design(), omega, target).value;
      };
      const double base = sign * here.value + lambda * fit.value;
      const double slope = g_theta.dot(step);
      double rate = config.eta_theta;
      for (int ls = 0; ls < 30 && slope > 0.0; ++ls, rate *= 0.5) {
        ModelParams trial = theta;
        trial.theta -= rate * step;
        const double value = lagrange_at(trial);
        if (std::isfinite(value) && value <= base - 1e-4 * rate * slope) {
          theta = std::move(trial);
          break;
        }
      }
    }
  }
  return out;
}

GdaResult projected_gda(const EstimatorSpec& spec, const ObservedDataset& data,
                        const SolverConfig& config) {
  return projected_gda(PreparedData(data, spec), config);
}

BoundResult solve_bounds(const PreparedData& prep, const SolverConfig& config) {
  config.validate();
  BoundResult r;
  r.naive = naive_estimate(prep.spec(), prep.data()).value;
  SolverConfig side = config;
  side.direction = Direction::lower;
  r.lower = projected_gda(prep, side);
  side.direction = Direction::upper;
  r.upper = projected_gda(prep, side);
  r.tau_lower = r.lower.objective;
  r.tau_upper = r.upper.objective;
  if (config.alpha) r.confidence = confidence_limits(prep, config, r.tau_lower, r.tau_upper);
  return r;
}

BoundResult solve_bounds(const EstimatorSpec& spec, const ObservedDataset& data,
                         const SolverConfig& config) {
  return solve_bounds(PreparedData(data, spec), config);
}

double chi_square_quantile(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  return boost::math::quantile(boost::math::chi_squared(1.0), 1.0 - alpha);
}

ConfidenceLimits confidence_limits(const PreparedData& prep, const SolverConfig& config,
                                   double tau_lower, double tau_upper) {
  if (!config.alpha) throw InvalidArgument("confidence limits need alpha");
  ConfidenceLimits c;
  c.rho = chi_square_quantile(*config.alpha);
  const double radius = std::min(1.0, c.rho / static_cast<double>(prep.data().size()));
  auto run = [&](Direction d, bool same) {
    SolverConfig side = config;
    side.direction = d;
    side.trace = false;
    return projected_gda(prep, side, OuterBall{radius, same}).objective;
  };
  c.lower_of_lower = std::min(tau_lower, run(Direction::lower, true));
  c.upper_of_lower = std::max(tau_lower, run(Direction::lower, false));
  c.lower_of_upper = std::min(tau_upper, run(Direction::upper, false));
  c.upper_of_upper = std::max(tau_upper, run(Direction::upper, true));
  return c;
}

ConfidenceLimits confidence_limits(const EstimatorSpec& spec, const ObservedDataset& data,
                                   const SolverConfig& config) {
  const PreparedData prep(data, spec);
  SolverConfig plain = config;
  plain.alpha.reset();
  const BoundResult b = solve_bounds(prep, plain);
  return confidence_limits(prep, config, b.tau_lower, b.tau_upper);
}

} // namespace rci
