#include "rci/empirical.hpp"
#include "rci/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

namespace rci {

namespace {

constexpr double kMassTol = 1e-12;

void require_same_size(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b)
    throw DimensionError(std::string(what) + ": support sizes differ (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
}

bool in_simplex(const Eigen::VectorXd& w) {
  return w.size() > 0 && w.minCoeff() >= 0.0 && std::abs(w.sum() - 1.0) <= kMassTol;
}

// Projection onto {x >= 0, sum x = mass} for mass > 0.
Eigen::VectorXd project_scaled_simplex(const Eigen::VectorXd& w, double mass) {
  std::vector<double> s(w.data(), w.data() + w.size());
  std::sort(s.begin(), s.end(), std::greater<>());
  double cumsum = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    cumsum += s[j];
    const double t = (cumsum - mass) / static_cast<double>(j + 1);
    if (s[j] - t > 0.0) theta = t;
  }
  return (w.array() - theta).max(0.0).matrix();
}

} // namespace

EmpiricalDistribution::EmpiricalDistribution(Eigen::VectorXd weights) : w_(std::move(weights)) {
  if (w_.size() == 0) throw InvalidArgument("empirical distribution needs at least one row");
  if (!w_.allFinite()) throw InvalidArgument("empirical distribution has non-finite weights");
  if (w_.minCoeff() < 0.0) throw InvalidArgument("empirical distribution has a negative weight");
  if (std::abs(w_.sum() - 1.0) > kMassTol)
    throw InvalidArgument("empirical distribution weights sum to " + format_double(w_.sum()));
}

EmpiricalDistribution EmpiricalDistribution::uniform(Eigen::Index support_size) {
  if (support_size <= 0) throw InvalidArgument("uniform distribution needs a positive support size");
  return EmpiricalDistribution(
      Eigen::VectorXd::Constant(support_size, 1.0 / static_cast<double>(support_size)));
}

TvBudget::TvBudget(double gamma0, double gamma1) : gamma0_(gamma0), gamma1_(gamma1) {
  for (double g : {gamma0, gamma1})
    if (!(g >= 0.0 && g <= 1.0)) throw InvalidArgument("TV budget must lie in [0, 1]");
}

WeightTable WeightTable::uniform(const ObservedDataset& data) {
  data.require_both_arms();
  return WeightTable{{EmpiricalDistribution::uniform(data.arm_size(0)),
                      EmpiricalDistribution::uniform(data.arm_size(1))}};
}

double tv_distance(const EmpiricalDistribution& p, const EmpiricalDistribution& q) {
  require_same_size(p.support_size(), q.support_size(), "tv_distance");
  return 0.5 * (p.weights() - q.weights()).lpNorm<1>();
}

EmpiricalDistribution project_simplex(const Eigen::VectorXd& w) {
  if (w.size() == 0) throw DimensionError("project_simplex: empty vector");
  if (!w.allFinite()) throw InvalidArgument("project_simplex: non-finite input");
  if (in_simplex(w)) return EmpiricalDistribution(w);
  Eigen::VectorXd x = project_scaled_simplex(w, 1.0);
  // Absorb rounding so the invariant check holds for very long vectors.
  x /= x.sum();
  return EmpiricalDistribution(std::move(x));
}

Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& w, const EmpiricalDistribution& center,
                                double radius) {
  if (!(radius >= 0.0)) throw InvalidArgument("project_l1_ball: negative radius");
  require_same_size(w.size(), center.support_size(), "project_l1_ball");
  const Eigen::VectorXd v = w - center.weights();
  if (v.lpNorm<1>() <= radius) return w;
  if (radius == 0.0) return center.weights();
  const Eigen::VectorXd mag = project_scaled_simplex(v.cwiseAbs(), radius);
  return center.weights() + (v.array().sign() * mag.array()).matrix();
}

namespace {

// Smallest a with sum_i (u_i - a)_+ = mass (mass > 0).
double solve_upper_threshold(const Eigen::VectorXd& u, double mass) {
  std::vector<double> s(u.data(), u.data() + u.size());
  std::sort(s.begin(), s.end(), std::greater<>());
  double cumsum = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    cumsum += s[k];
    const double a = (cumsum - mass) / static_cast<double>(k + 1);
    if (k + 1 == s.size() || s[k + 1] <= a) return a;
  }
  return (cumsum - mass) / static_cast<double>(s.size());
}

// b with sum_i min(c_i, (b - u_i)_+) = mass, for 0 < mass <= sum c_i.
double solve_lower_threshold(const Eigen::VectorXd& u, const Eigen::VectorXd& c, double mass) {
  std::vector<std::pair<double, int>> events;
  events.reserve(2 * u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (c[i] <= 0.0) continue;
    events.emplace_back(u[i], +1);
    events.emplace_back(u[i] + c[i], -1);
  }
  std::sort(events.begin(), events.end());
  double level = 0.0, pos = events.front().first;
  int slope = 0;
  for (const auto& [p, delta] : events) {
    const double next = level + slope * (p - pos);
    if (slope > 0 && next >= mass) return pos + (mass - level) / slope;
    level = next;
    pos = p;
    slope += delta;
  }
  return pos;
}

} // namespace

EmpiricalDistribution project_feasible(const Eigen::VectorXd& w,
                                       const EmpiricalDistribution& center, double gamma) {
  require_same_size(w.size(), center.support_size(), "project_feasible");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidArgument("project_feasible: gamma outside [0, 1]");
  if (!w.allFinite()) throw InvalidArgument("project_feasible: non-finite input");
  if (gamma == 0.0) return center;
  const Eigen::VectorXd& c = center.weights();
  if (in_simplex(w) && (w - c).lpNorm<1>() <= 2.0 * gamma) return EmpiricalDistribution(w);

  EmpiricalDistribution onto_simplex = project_simplex(w);
  if ((onto_simplex.weights() - c).lpNorm<1>() <= 2.0 * gamma) return onto_simplex;

  // Ball active: exactly gamma of mass moves up and gamma moves down.
  const Eigen::VectorXd u = w - c;
  const double a = solve_upper_threshold(u, gamma);
  const double b = solve_lower_threshold(u, c, gamma);
  if (!(b <= a)) return project_feasible_dykstra(w, center, gamma, 100000, 1e-13);

  Eigen::VectorXd x(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (u[i] > a) x[i] = w[i] - a;
    else if (u[i] >= b) x[i] = c[i];
    else x[i] = std::max(0.0, w[i] - b);
  }
  x /= x.sum();
  return EmpiricalDistribution(std::move(x));
}

EmpiricalDistribution project_feasible_dykstra(const Eigen::VectorXd& w,
                                               const EmpiricalDistribution& center, double gamma,
                                               int max_rounds, double tol) {
  require_same_size(w.size(), center.support_size(), "project_feasible_dykstra");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidArgument("project_feasible: gamma outside [0, 1]");
  if (gamma == 0.0) return center;
  Eigen::VectorXd x = w;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(w.size());
  Eigen::VectorXd q = Eigen::VectorXd::Zero(w.size());
  Eigen::VectorXd y = x;
  for (int round = 0; round < max_rounds; ++round) {
    const Eigen::VectorXd prev_y = y;
    y = project_scaled_simplex(x + p, 1.0);
    p = x + p - y;
    const Eigen::VectorXd next = project_l1_ball(y + q, center, 2.0 * gamma);
    q = y + q - next;
    // x alone can stall for a round while the corrections still move
    const double change = std::max({(next - x).lpNorm<Eigen::Infinity>(),
                                    (y - prev_y).lpNorm<Eigen::Infinity>(),
                                    (y - next).lpNorm<Eigen::Infinity>()});
    x = next;
    if (change < tol) break;
  }
  y /= y.sum();
  return EmpiricalDistribution(std::move(y));
}

double feasibility_residual(const Eigen::VectorXd& w, const EmpiricalDistribution& center,
                            double gamma) {
  require_same_size(w.size(), center.support_size(), "feasibility_residual");
  const double neg = std::max(0.0, -w.minCoeff());
  const double mass = std::abs(w.sum() - 1.0);
  const double ball = std::max(0.0, (w - center.weights()).lpNorm<1>() - 2.0 * gamma);
  return std::max({neg, mass, ball});
}

} // namespace rci
