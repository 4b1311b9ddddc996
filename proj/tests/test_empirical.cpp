#include "oracles.hpp"
#include "rci/empirical.hpp"
#include "rci/errors.hpp"

#include <doctest.h>

using namespace rci;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(v.size());
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

EmpiricalDistribution dist(std::initializer_list<double> v) { return EmpiricalDistribution(vec(v)); }

VectorXd random_vector(Rng& rng, int d, double scale = 1.0) {
  VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = scale * std_normal(rng);
  return v;
}

EmpiricalDistribution random_distribution(Rng& rng, int d) {
  VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = uniform01(rng) + 1e-3;
  return EmpiricalDistribution(v / v.sum());
}

} // namespace

TEST_CASE("distribution invariants") {
  CHECK_THROWS_AS(EmpiricalDistribution(vec({0.5, 0.6})), InvalidArgument);
  CHECK_THROWS_AS(EmpiricalDistribution(vec({1.5, -0.5})), InvalidArgument);
  CHECK(EmpiricalDistribution::uniform(4)[2] == doctest::Approx(0.25));
  CHECK_THROWS(TvBudget(-0.1, 0.1));
  CHECK_THROWS(TvBudget(0.1, 1.1));
}

TEST_CASE("tv distance") {
  CHECK(tv_distance(dist({0.5, 0.5}), dist({0.5, 0.5})) == 0.0);
  CHECK(tv_distance(dist({1, 0}), dist({0, 1})) == doctest::Approx(1.0));
  // coupling LP on 2 points: mismatch mass is |0.7 - 0.5|
  CHECK(tv_distance(dist({0.7, 0.3}), dist({0.5, 0.5})) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK_THROWS_AS(tv_distance(dist({1.0}), dist({0.5, 0.5})), DimensionError);

  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const int d = 2 + static_cast<int>(rng() % 8);
    auto p = random_distribution(rng, d), q = random_distribution(rng, d),
         r = random_distribution(rng, d);
    CHECK(tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-12);
    CHECK(tv_distance(p, p) == 0.0);
    CHECK(tv_distance(p, q) > 0.0);
  }
}

TEST_CASE("simplex projection") {
  CHECK(project_simplex(vec({0.5, 0.5})).weights().isApprox(vec({0.5, 0.5})));
  CHECK(project_simplex(vec({1.0, 1.0})).weights().isApprox(vec({0.5, 0.5})));
  CHECK_THROWS_AS(project_simplex(VectorXd()), DimensionError);

  // 3-d: brute force over a fine grid, then polish the best grid point by
  // enumerating supports (the projection onto sum = 1 of a support subset).
  const VectorXd w = vec({0.9, 0.4, -0.1});
  VectorXd best;
  double best_d = 1e9;
  for (int mask = 1; mask < 8; ++mask) {
    VectorXd v = VectorXd::Zero(3);
    int k = 0;
    double s = 0;
    for (int i = 0; i < 3; ++i)
      if (mask >> i & 1) ++k, s += w[i];
    bool ok = true;
    for (int i = 0; i < 3; ++i)
      if (mask >> i & 1) {
        v[i] = w[i] + (1.0 - s) / k;
        ok = ok && v[i] >= 0;
      }
    if (ok && (v - w).norm() < best_d) best_d = (v - w).norm(), best = v;
  }
  double grid_d = 1e9;
  oracle::for_each_grid_simplex(3, 400, [&](const VectorXd& v) { grid_d = std::min(grid_d, (v - w).norm()); });
  CHECK(best_d <= grid_d + 1e-12);
  CHECK((project_simplex(w).weights() - best).norm() < 1e-8);

  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const int d = 1 + static_cast<int>(rng() % 20);
    const VectorXd a = random_vector(rng, d), b = random_vector(rng, d);
    const VectorXd pa = project_simplex(a).weights(), pb = project_simplex(b).weights();
    CHECK((project_simplex(pa).weights() - pa).norm() < 1e-12);
    CHECK((pa - pb).norm() <= (a - b).norm() + 1e-12);
  }
}

TEST_CASE("l1 ball projection") {
  const auto c = dist({0.5, 0.5});
  CHECK(project_l1_ball(vec({0.55, 0.45}), c, 0.2).isApprox(vec({0.55, 0.45})));
  CHECK(project_l1_ball(vec({0.9, 0.0}), c, 0.0).isApprox(c.weights()));
  CHECK_THROWS_AS(project_l1_ball(vec({0.9, 0.1}), c, -1.0), InvalidArgument);

  // fine grid over the ball's boundary and interior in 2-d
  const VectorXd w = vec({0.8, 0.2});
  const VectorXd p = project_l1_ball(w, c, 0.2);
  double grid_best = 1e9;
  VectorXd grid_arg;
  const int steps = 4000;
  for (int i = 0; i <= steps; ++i)
    for (int j = 0; j <= steps; ++j) {
      VectorXd v = vec({0.3 + 0.4 * i / steps, 0.3 + 0.4 * j / steps});
      if ((v - c.weights()).cwiseAbs().sum() > 0.2 + 1e-15) continue;
      const double dd = (v - w).norm();
      if (dd < grid_best) grid_best = dd, grid_arg = v;
    }
  CHECK((p - grid_arg).norm() < 2e-4);
  CHECK(p.isApprox(vec({0.6, 0.4}), 1e-8));

  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    const int d = 1 + static_cast<int>(rng() % 20);
    const auto center = random_distribution(rng, d);
    const double r = uniform01(rng);
    const VectorXd a = random_vector(rng, d), b = random_vector(rng, d);
    const VectorXd pa = project_l1_ball(a, center, r), pb = project_l1_ball(b, center, r);
    CHECK((pa - center.weights()).cwiseAbs().sum() <= r + 1e-12);
    CHECK((project_l1_ball(pa, center, r) - pa).norm() < 1e-12);
    CHECK((pa - pb).norm() <= (a - b).norm() + 1e-12);
  }
}

TEST_CASE("feasible projection examples") {
  const auto c = dist({0.5, 0.5});
  CHECK(project_feasible(vec({0.9, 0.3}), c, 0.0).weights().isApprox(c.weights()));
  CHECK(project_feasible(vec({0.55, 0.45}), c, 0.1).weights().isApprox(vec({0.55, 0.45})));
  // 1-d grid over t in [0.4, 0.6]
  double best_t = 0, best_d = 1e9;
  for (int i = 0; i <= 20000; ++i) {
    const double t = 0.4 + 0.2 * i / 20000.0;
    const double dd = std::hypot(t - 0.8, (1 - t) - 0.2);
    if (dd < best_d) best_d = dd, best_t = t;
  }
  const VectorXd p = project_feasible(vec({0.8, 0.2}), c, 0.1).weights();
  CHECK(p[0] == doctest::Approx(best_t).epsilon(1e-6));
  CHECK(p.isApprox(vec({0.6, 0.4}), 1e-12));
}

TEST_CASE("feasible projection satisfies both constraints") {
  Rng rng(7);
  for (int t = 0; t < 1000; ++t) {
    const int d = 2 + static_cast<int>(rng() % 49);
    const auto center = random_distribution(rng, d);
    const double gamma = uniform01(rng);
    const VectorXd w = center.weights() + random_vector(rng, d, 0.5 / d);
    const auto p = project_feasible(w, center, gamma);
    CHECK(feasibility_residual(p.weights(), center, gamma) <= 1e-8);
    CHECK(p.weights().minCoeff() >= 0.0);
    CHECK(std::abs(p.weights().sum() - 1.0) <= 1e-8);
    CHECK((p.weights() - center.weights()).cwiseAbs().sum() <= 2 * gamma + 1e-8);
  }
}

TEST_CASE("feasible projection matches brute-force QP") {
  Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    const int d = 2 + static_cast<int>(rng() % 4);
    const auto center = random_distribution(rng, d);
    const double gamma = 0.5 * uniform01(rng);
    const VectorXd w = center.weights() + random_vector(rng, d, 0.4);
    const VectorXd want = oracle::project_feasible_bruteforce(w, center.weights(), gamma);
    REQUIRE(want.size() == d);
    CHECK((project_feasible(w, center, gamma).weights() - want).norm() <= 1e-6);
    CHECK((project_feasible_dykstra(w, center, gamma, 100000, 1e-12).weights() - want).norm() <= 1e-6);
  }
}

TEST_CASE("feasible projection rejects a bad center") {
  CHECK_THROWS_AS(project_feasible(vec({0.5, 0.5}), EmpiricalDistribution(), 0.1), DimensionError);
}
