#pragma once

#include "rci/dataset.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rci {

enum class DgpKind { logistic_backdoor, kang_schafer, frontdoor_single, frontdoor_multi, ihdp_mediation };
const char* to_string(DgpKind k);
DgpKind dgp_from_string(const std::string& s);

struct DgpSpec {
  DgpKind kind = DgpKind::logistic_backdoor;
  Eigen::Index n = 2000;
  std::uint64_t seed = 0;
  // Named coefficient overrides; unknown names or wrong lengths are errors.
  std::map<std::string, std::vector<double>> coefficients;
  // Kang-Schafer: "sigmoid" or "clamped_exp" link for the treatment score.
  std::string treatment_link = "sigmoid";
  // Kang-Schafer: standardise the four observed covariates.
  bool standardize = true;
  // Draws for Monte-Carlo ground truths.
  long mc_draws = 1000000;

  void validate() const;
};

struct LabeledDataset {
  ObservedDataset data; // noiseless covariates in the x slot
  Eigen::MatrixXd noiseless_x;
  double true_ate = 0.0;
  double true_ate_se = 0.0; // Monte-Carlo standard error, 0 when exact
  bool true_ate_exact = false;
  nlohmann::json metadata;
};

LabeledDataset gen_logistic_backdoor(const DgpSpec& spec);
LabeledDataset gen_kang_schafer(const DgpSpec& spec);
LabeledDataset gen_frontdoor_single(const DgpSpec& spec);
LabeledDataset gen_frontdoor_multi(const DgpSpec& spec);
// Treatment and covariates W come from `covariates`; its outcome column is ignored.
LabeledDataset gen_ihdp_mediation(const DgpSpec& spec, const Eigen::VectorXd& z,
                                  const Eigen::MatrixXd& w);
LabeledDataset gen_ihdp_mediation(const DgpSpec& spec, const std::string& covariates_csv);

// Reads treatment and covariates from a CSV with a header naming a `z` (or
// `treatment`) column, or from the headerless 30-column layout
// (treatment, y_factual, y_cfactual, mu0, mu1, x1..x25).
std::pair<Eigen::VectorXd, Eigen::MatrixXd> read_ihdp_covariates(const std::string& path);

// Dispatches on spec.kind. ihdp_mediation needs `covariates_csv`.
LabeledDataset generate(const DgpSpec& spec, const std::string& covariates_csv = "");

} // namespace rci
