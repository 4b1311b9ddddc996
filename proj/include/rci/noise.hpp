#pragma once

#include "rci/dataset.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace rci {

// x + N(mean, sd^2), independently per entry.
struct GaussianNoise {
  double mean = 0.0;
  double sd = 1.0;
};

// Each row is replaced, with probability `rate`, by a draw from the
// contaminating distribution N(mean, sd^2) per entry.
struct HuberNoise {
  double rate = 0.0;
  double contaminant_mean = 0.0;
  double contaminant_sd = 1.0;
};

// Covariates take values in `values`; a value v_a is reported as v_b with
// probability table(a, b).
struct MisclassificationNoise {
  std::vector<double> values;
  Eigen::MatrixXd table;
};

// Unit-variance Gaussian location family: natural parameter = mean, so the
// tilted covariates are shifted by theta_tilde - theta.
struct TiltingNoise {
  double theta = 0.0;
  double theta_tilde = 0.0;
};

using NoiseModel = std::variant<GaussianNoise, HuberNoise, MisclassificationNoise, TiltingNoise>;

std::string noise_kind(const NoiseModel& m);
void validate(const NoiseModel& m);

// Copy of `data` with covariates corrupted by `model`; y and z untouched.
ObservedDataset corrupt(const ObservedDataset& data, const NoiseModel& model, std::uint64_t seed);
Eigen::MatrixXd corrupt_covariates(const Eigen::MatrixXd& x, const NoiseModel& model,
                                   std::uint64_t seed);

struct GammaEstimate {
  double gamma0 = 0.0;
  double gamma1 = 0.0;
  std::string method;
  std::map<std::string, double> diagnostics;
};

GammaEstimate gamma_huber(double rate);
GammaEstimate gamma_misclassification(std::span<const double> p, std::span<const double> q);

// Log-partition value and gradient at a natural parameter.
using LogPartition = std::function<std::pair<double, Eigen::VectorXd>(const Eigen::VectorXd&)>;
GammaEstimate gamma_tilting(const Eigen::VectorXd& theta, const Eigen::VectorXd& theta_tilde,
                            const LogPartition& log_partition);

// Histogram plug-in KL(p || q) on a shared equal-width grid, then Pinsker.
GammaEstimate gamma_pinsker(std::span<const double> samples_p, std::span<const double> samples_q,
                            int bins);

enum class NoiseSchedule { kang_schafer, multi_mediator, binary_outcome };
NoiseSchedule noise_schedule_from_string(const std::string& s);
const char* to_string(NoiseSchedule s);

// Gaussian noise for level 1..L of a schedule.
std::vector<GaussianNoise> noise_levels(NoiseSchedule s);
GaussianNoise noise_level(NoiseSchedule s, int level);
std::vector<double> default_gamma_table();

} // namespace rci
