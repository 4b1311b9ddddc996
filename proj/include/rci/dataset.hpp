#pragma once

#include <Eigen/Dense>

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace rci {

/// n rows of (covariates, outcome, treatment). Treatment is stored as a
/// double column holding exactly 0 or 1.
class ObservedDataset {
public:
  ObservedDataset() = default;
  ObservedDataset(Eigen::MatrixXd x, Eigen::VectorXd y, Eigen::VectorXd z);

  Eigen::Index size() const { return x_.rows(); }
  Eigen::Index dim() const { return x_.cols(); }

  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::VectorXd& z() const { return z_; }
  int treatment(Eigen::Index i) const { return z_[i] > 0.5 ? 1 : 0; }

  /// Row indices of arm `z`, in dataset order. Weight vectors for an arm are
  /// laid out in this order.
  const std::vector<Eigen::Index>& arm_rows(int z) const { return arm_rows_[z]; }
  Eigen::Index arm_size(int z) const { return static_cast<Eigen::Index>(arm_rows_[z].size()); }
  /// Empirical P(Z = z).
  double arm_frequency(int z) const;

  /// Throws PositivityError unless both arms are nonempty.
  void require_both_arms() const;

  ObservedDataset with_covariates(Eigen::MatrixXd x) const;
  ObservedDataset subset(const std::vector<Eigen::Index>& rows) const;

  bool operator==(const ObservedDataset& other) const;

private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  Eigen::VectorXd z_;
  std::array<std::vector<Eigen::Index>, 2> arm_rows_;
};

// CSV schema: header `z,y,x1,...,xd`, one row per sample, LF line endings.
// Doubles are written with 17 significant digits so that a write/read cycle
// is lossless.
void write_csv(std::ostream& os, const ObservedDataset& data);
void write_csv(const std::string& path, const ObservedDataset& data);
ObservedDataset read_csv(std::istream& is, const std::string& source = "<stream>");
ObservedDataset read_csv(const std::string& path);

std::string format_double(double v);

} // namespace rci
