#pragma once

#include <Eigen/Dense>

namespace rci::kernels {

// Per-row losses of a score s_i = phi_i . theta against a target t_i.
enum class Loss {
  squared,       // (t - s)^2
  gaussian_nll,  // 0.5 log(2 pi sigma^2) + (t - s)^2 / (2 sigma^2)
  bernoulli_nll, // -[t log p + (1 - t) log(1 - p)], p = clamp(sigmoid(s))
};

/// Probabilities inside log terms are clamped to [kProbFloor, 1 - kProbFloor].
inline constexpr double kProbFloor = 1e-9;

struct RowLoss {
  double value = 0.0;        // sum_i omega_i l_i
  Eigen::VectorXd grad;      // d value / d theta
  Eigen::VectorXd per_row;   // l_i, unweighted
};

/// Rows are processed in fixed-size chunks whose partial sums are combined
/// in chunk order, so the result is bitwise independent of the thread count.
inline constexpr Eigen::Index kChunkRows = 512;

RowLoss row_loss(Loss loss, const Eigen::MatrixXd& phi, const Eigen::VectorXd& target,
                 const Eigen::VectorXd& theta, const Eigen::VectorXd& omega, double sigma = 1.0);

/// sum_i omega_i h_i phi_i phi_i^T with h_i the second derivative of the
/// per-row loss in the score.
Eigen::MatrixXd curvature(Loss loss, const Eigen::MatrixXd& phi, const Eigen::VectorXd& theta,
                          const Eigen::VectorXd& omega, double sigma = 1.0);

// Straight single-loop versions. They define the expected values in tests
// and the baseline in the benchmark.
RowLoss row_loss_serial(Loss loss, const Eigen::MatrixXd& phi, const Eigen::VectorXd& target,
                        const Eigen::VectorXd& theta, const Eigen::VectorXd& omega,
                        double sigma = 1.0);
Eigen::MatrixXd curvature_serial(Loss loss, const Eigen::MatrixXd& phi,
                                 const Eigen::VectorXd& theta, const Eigen::VectorXd& omega,
                                 double sigma = 1.0);

double sigmoid(double s);

} // namespace rci::kernels
