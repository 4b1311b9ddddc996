#include "rci/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace rci::kernels {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

struct Pointwise {
  double l;  // loss
  double d1; // dl/ds
  double d2; // d2l/ds2
};

inline Pointwise pointwise(Loss loss, double s, double t, double sigma) {
  switch (loss) {
  case Loss::squared: {
    const double r = t - s;
    return {r * r, -2.0 * r, 2.0};
  }
  case Loss::gaussian_nll: {
    const double r = t - s;
    const double iv = 1.0 / (sigma * sigma);
    return {kHalfLog2Pi + std::log(sigma) + 0.5 * r * r * iv, -r * iv, iv};
  }
  case Loss::bernoulli_nll: {
    const double p = sigmoid(s);
    const double pc = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
    const double l = -(t * std::log(pc) + (1.0 - t) * std::log(1.0 - pc));
    if (p != pc) return {l, 0.0, 0.0};
    return {l, p - t, p * (1.0 - p)};
  }
  }
  return {0.0, 0.0, 0.0};
}

Eigen::Index chunk_count(Eigen::Index n) { return (n + kChunkRows - 1) / kChunkRows; }

} // namespace

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

RowLoss row_loss(Loss loss, const Eigen::MatrixXd& phi, const Eigen::VectorXd& target,
                 const Eigen::VectorXd& theta, const Eigen::VectorXd& omega, double sigma) {
  const Eigen::Index n = phi.rows(), p = phi.cols();
  const Eigen::Index chunks = chunk_count(n);
  RowLoss out;
  out.per_row.resize(n);
  Eigen::VectorXd value_parts = Eigen::VectorXd::Zero(chunks);
  Eigen::MatrixXd grad_parts = Eigen::MatrixXd::Zero(p, chunks);
  const Eigen::VectorXd scores = phi * theta;

#pragma omp parallel for schedule(static) if (chunks > 1 && !omp_in_parallel())
  for (Eigen::Index c = 0; c < chunks; ++c) {
    const Eigen::Index lo = c * kChunkRows, hi = std::min(n, lo + kChunkRows);
    double v = 0.0;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = lo; i < hi; ++i) {
      const Pointwise pw = pointwise(loss, scores[i], target[i], sigma);
      out.per_row[i] = pw.l;
      v += omega[i] * pw.l;
      g.noalias() += (omega[i] * pw.d1) * phi.row(i).transpose();
    }
    value_parts[c] = v;
    grad_parts.col(c) = g;
  }

  out.grad = Eigen::VectorXd::Zero(p);
  for (Eigen::Index c = 0; c < chunks; ++c) {
    out.value += value_parts[c];
    out.grad += grad_parts.col(c);
  }
  return out;
}

Eigen::MatrixXd curvature(Loss loss, const Eigen::MatrixXd& phi, const Eigen::VectorXd& theta,
                          const Eigen::VectorXd& omega, double sigma) {
  const Eigen::Index n = phi.rows(), p = phi.cols();
  const Eigen::Index chunks = chunk_count(n);
  const Eigen::VectorXd scores = phi * theta;
  std::vector<Eigen::MatrixXd> parts(chunks);

#pragma omp parallel for schedule(static) if (chunks > 1 && !omp_in_parallel())
  for (Eigen::Index c = 0; c < chunks; ++c) {
    const Eigen::Index lo = c * kChunkRows, hi = std::min(n, lo + kChunkRows);
    Eigen::VectorXd h(hi - lo);
    for (Eigen::Index i = lo; i < hi; ++i)
      h[i - lo] = omega[i] * pointwise(loss, scores[i], 0.0, sigma).d2;
    // d2 does not depend on the target for any of the losses.
    const auto block = phi.middleRows(lo, hi - lo);
    parts[c] = block.transpose() * h.asDiagonal() * block;
  }

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p, p);
  for (const auto& part : parts) out += part;
  return out;
}

RowLoss row_loss_serial(Loss loss, const Eigen::MatrixXd& phi, const Eigen::VectorXd& target,
                        const Eigen::VectorXd& theta, const Eigen::VectorXd& omega, double sigma) {
  const Eigen::Index n = phi.rows(), p = phi.cols();
  RowLoss out;
  out.per_row.resize(n);
  out.grad = Eigen::VectorXd::Zero(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) s += phi(i, j) * theta[j];
    const Pointwise pw = pointwise(loss, s, target[i], sigma);
    out.per_row[i] = pw.l;
    out.value += omega[i] * pw.l;
    for (Eigen::Index j = 0; j < p; ++j) out.grad[j] += omega[i] * pw.d1 * phi(i, j);
  }
  return out;
}

Eigen::MatrixXd curvature_serial(Loss loss, const Eigen::MatrixXd& phi,
                                 const Eigen::VectorXd& theta, const Eigen::VectorXd& omega,
                                 double sigma) {
  const Eigen::Index n = phi.rows(), p = phi.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) s += phi(i, j) * theta[j];
    const double h = omega[i] * pointwise(loss, s, 0.0, sigma).d2;
    for (Eigen::Index a = 0; a < p; ++a)
      for (Eigen::Index b = 0; b < p; ++b) out(a, b) += h * phi(i, a) * phi(i, b);
  }
  return out;
}

} // namespace rci::kernels
