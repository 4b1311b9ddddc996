// Small linear-backdoor problems and an exhaustive grid oracle over their
// feasible weight sets.
#pragma once

#include "oracles.hpp"
#include "rci/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace small {

// k0 control rows and k1 treated rows, one covariate.
inline rci::ObservedDataset make(rci::Rng& rng, int k0, int k1) {
  const int n = k0 + k1;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n), z(n);
  for (int i = 0; i < n; ++i) {
    z[i] = i < k0 ? 0.0 : 1.0;
    x(i, 0) = std::round(4.0 * rci::std_normal(rng)) / 4.0;
    y[i] = 0.5 * z[i] + x(i, 0) + rci::std_normal(rng);
  }
  return {x, y, z};
}

// Backdoor value at the exact weighted least-squares fit under per-arm
// weights w0, w1 (row weights n_z / n times the arm weight).
inline double polished_backdoor(const rci::ObservedDataset& d, const Eigen::VectorXd& w0,
                                const Eigen::VectorXd& w1) {
  const Eigen::Index n = d.size();
  Eigen::MatrixXd phi(n, 3);
  Eigen::VectorXd omega(n);
  Eigen::Index k[2] = {0, 0};
  for (Eigen::Index i = 0; i < n; ++i) {
    const int z = d.z()[i] > 0.5;
    phi(i, 0) = 1.0;
    phi(i, 1) = z;
    phi(i, 2) = d.x()(i, 0);
    omega[i] = static_cast<double>(d.arm_size(z)) / n * (z ? w1 : w0)[k[z]++];
  }
  const Eigen::MatrixXd h = phi.transpose() * omega.asDiagonal() * phi;
  const Eigen::VectorXd beta =
      h.completeOrthogonalDecomposition().solve(phi.transpose() * omega.cwiseProduct(d.y()));
  double q = 0.0;
  k[0] = k[1] = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int z = d.z()[i] > 0.5;
    const double g = beta[0] + beta[1] * z + beta[2] * d.x()(i, 0);
    q += (z ? 1.0 : -1.0) * (z ? w1 : w0)[k[z]++] * g;
  }
  return q;
}

// Grid resolution (step < 1e-3). Divisible by 2, 3 and 4, so that with a
// budget on the same grid every vertex of a feasible set is a grid point.
inline constexpr int kSteps = 1200;

inline double on_grid(double gamma) { return std::round(gamma * kSteps) / kSteps; }

// Grid points of the k-simplex (step 1/steps) within TV gamma of uniform.
inline std::vector<Eigen::VectorXd> feasible_grid(int k, int steps, double gamma) {
  std::vector<Eigen::VectorXd> out;
  oracle::for_each_grid_simplex(k, steps, [&](const Eigen::VectorXd& v) {
    if (0.5 * (v.array() - 1.0 / k).abs().sum() <= gamma + 1e-12) out.push_back(v);
  });
  return out;
}

// Exhaustive search over the product grid when it is small enough,
// otherwise a coarse product grid followed by exhaustive per-arm sweeps at
// full resolution until neither arm improves.
inline double grid_optimum(const rci::ObservedDataset& d, double gamma, bool lower, int steps = kSteps) {
  const double sign = lower ? 1.0 : -1.0;
  const int k0 = static_cast<int>(d.arm_size(0)), k1 = static_cast<int>(d.arm_size(1));
  const auto fine0 = feasible_grid(k0, steps, gamma), fine1 = feasible_grid(k1, steps, gamma);
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd b0, b1;
  if (fine0.size() * fine1.size() <= 4'000'000) {
    for (const auto& a : fine0)
      for (const auto& b : fine1) {
        const double v = sign * polished_backdoor(d, a, b);
        if (v < best) best = v, b0 = a, b1 = b;
      }
    return sign * best;
  }
  const auto coarse0 = feasible_grid(k0, 50, gamma), coarse1 = feasible_grid(k1, 50, gamma);
  for (const auto& a : coarse0)
    for (const auto& b : coarse1) {
      const double v = sign * polished_backdoor(d, a, b);
      if (v < best) best = v, b0 = a, b1 = b;
    }
  for (int round = 0; round < 10; ++round) {
    const double before = best;
    for (const auto& a : fine0) {
      const double v = sign * polished_backdoor(d, a, b1);
      if (v < best) best = v, b0 = a;
    }
    for (const auto& b : fine1) {
      const double v = sign * polished_backdoor(d, b0, b);
      if (v < best) best = v, b1 = b;
    }
    if (best >= before - 1e-15) break;
  }
  return sign * best;
}

} // namespace small
