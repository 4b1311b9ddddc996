// Small random datasets and weight tables shared by the tests.
#pragma once

#include "oracles.hpp"
#include "rci/empirical.hpp"
#include "rci/estimators.hpp"

namespace fixture {

// x ~ N(0, 1)^d, z ~ Bern(sigmoid(0.5 x1)) with both arms forced nonempty,
// y linear in (z, x) plus noise, or Bernoulli through a sigmoid.
inline rci::ObservedDataset random_dataset(rci::Rng& rng, Eigen::Index n, Eigen::Index d,
                                           bool binary_y) {
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n), z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rci::std_normal(rng);
    z[i] = i < 2 ? static_cast<double>(i) : (rci::uniform01(rng) < oracle::sigmoid(0.5 * x(i, 0)));
    const double s = 0.3 + 1.0 * z[i] + 0.8 * x.row(i).sum() / std::sqrt(static_cast<double>(d));
    y[i] = binary_y ? (rci::uniform01(rng) < oracle::sigmoid(s)) : s + rci::std_normal(rng);
  }
  return {x, y, z};
}

inline rci::EmpiricalDistribution interior_distribution(rci::Rng& rng, Eigen::Index k) {
  Eigen::VectorXd v(k);
  for (Eigen::Index i = 0; i < k; ++i) v[i] = 0.5 + rci::uniform01(rng);
  return rci::EmpiricalDistribution(v / v.sum());
}

inline rci::WeightTable random_weights(rci::Rng& rng, const rci::ObservedDataset& data) {
  return {{interior_distribution(rng, data.arm_size(0)), interior_distribution(rng, data.arm_size(1))}};
}

// Direction with zero sum per arm, so w + h d stays a distribution for small h.
inline std::array<Eigen::VectorXd, 2> tangent(rci::Rng& rng, const rci::ObservedDataset& data) {
  std::array<Eigen::VectorXd, 2> d;
  for (int z = 0; z < 2; ++z) {
    d[z].resize(data.arm_size(z));
    for (auto& v : d[z]) v = rci::std_normal(rng);
    d[z].array() -= d[z].mean();
    d[z] /= static_cast<double>(data.arm_size(z));
  }
  return d;
}

inline rci::WeightTable shifted(const rci::WeightTable& w, const std::array<Eigen::VectorXd, 2>& d,
                                double h) {
  return {{rci::EmpiricalDistribution(w.arm(0).weights() + h * d[0]),
           rci::EmpiricalDistribution(w.arm(1).weights() + h * d[1])}};
}

inline rci::ModelParams random_theta(rci::Rng& rng, rci::Family f, Eigen::Index d, double scale = 0.5) {
  rci::ModelParams p = rci::ModelParams::zeros(f, d);
  for (auto& v : p.theta) v = scale * rci::std_normal(rng);
  return p;
}

} // namespace fixture
