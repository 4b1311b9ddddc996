#include "fixtures.hpp"
#include "rci/errors.hpp"
#include "rci/estimators.hpp"

#include <doctest.h>

using namespace rci;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double g(const ModelParams& p, const ObservedDataset& d, Eigen::Index i, int z) {
  double s = p.theta[0] + p.theta[1] * z + d.x().row(i).dot(p.theta.tail(d.dim()));
  return p.family == Family::logistic ? oracle::sigmoid(s) : s;
}

// The four identification formulas written out row by row.
double direct_objective(const EstimatorSpec& spec, const PreparedData& prep, const ModelParams& p,
                        const WeightTable& w) {
  const ObservedDataset& d = prep.data();
  double q = 0.0;
  switch (spec.kind) {
  case EstimatorKind::backdoor:
    for (int z = 0; z < 2; ++z)
      for (Eigen::Index k = 0; k < d.arm_size(z); ++k)
        q += (z ? 1.0 : -1.0) * w.arm(z)[k] * g(p, d, d.arm_rows(z)[k], z);
    return q;
  case EstimatorKind::frontdoor:
    for (int zp = 0; zp < 2; ++zp)
      for (int z = 0; z < 2; ++z)
        for (Eigen::Index k = 0; k < d.arm_size(z); ++k)
          q += d.arm_frequency(zp) * (z ? 1.0 : -1.0) * w.arm(z)[k] * g(p, d, d.arm_rows(z)[k], zp);
    return q;
  case EstimatorKind::ipw:
    for (int z = 0; z < 2; ++z)
      for (Eigen::Index k = 0; k < d.arm_size(z); ++k) {
        const Eigen::Index i = d.arm_rows(z)[k];
        double f = oracle::sigmoid(p.theta[0] + d.x().row(i).dot(p.theta.tail(d.dim())));
        f = std::clamp(f, spec.propensity_clip, 1.0 - spec.propensity_clip);
        const double y = d.y()[i];
        q += d.arm_frequency(z) * w.arm(z)[k] * (z ? y / f : -y / (1.0 - f));
      }
    return q;
  case EstimatorKind::double_ml: {
    double num = 0.0, den = 0.0;
    for (Eigen::Index k = 0; k < d.arm_size(1); ++k) {
      const Eigen::Index i = d.arm_rows(1)[k];
      if (prep.in_fit_half(i)) continue;
      const double f = p.theta[0] + d.x().row(i).dot(p.theta.tail(d.dim()));
      num += w.arm(1)[k] * (d.y()[i] - f);
      den += w.arm(1)[k];
    }
    return num / den;
  }
  }
  return 0.0;
}

EstimatorSpec spec_of(EstimatorKind k, Family f = Family::linear) {
  EstimatorSpec s;
  s.kind = k;
  s.outcome_family = f;
  s.split_seed = 17;
  return s;
}

std::vector<EstimatorSpec> all_specs() {
  return {spec_of(EstimatorKind::backdoor), spec_of(EstimatorKind::backdoor, Family::logistic),
          spec_of(EstimatorKind::frontdoor), spec_of(EstimatorKind::frontdoor, Family::logistic),
          spec_of(EstimatorKind::ipw), spec_of(EstimatorKind::double_ml)};
}

ObservedDataset toy(std::vector<double> x, std::vector<double> y, std::vector<double> z) {
  const auto n = static_cast<Eigen::Index>(x.size());
  return {Eigen::Map<MatrixXd>(x.data(), n, 1), Eigen::Map<VectorXd>(y.data(), n),
          Eigen::Map<VectorXd>(z.data(), n)};
}

} // namespace

TEST_CASE("backdoor examples") {
  const ObservedDataset d = toy({0.0, 1.0}, {0.0, 0.0}, {0.0, 1.0});
  const WeightTable w = WeightTable::uniform(d);
  ModelParams p{Family::linear, (VectorXd(3) << 0, 1, 1).finished()};
  CHECK(backdoor_objective(p, w, d) == doctest::Approx(2.0));

  Rng rng(31);
  const ObservedDataset r = fixture::random_dataset(rng, 40, 3, false);
  ModelParams c = ModelParams::zeros(Family::linear, 3);
  c.theta[1] = 1.7;
  c.theta[0] = -3.0;
  for (int t = 0; t < 5; ++t)
    CHECK(backdoor_objective(c, fixture::random_weights(rng, r), r) == doctest::Approx(1.7));

  const ObservedDataset one_arm = toy({0.0, 1.0}, {0.0, 0.0}, {1.0, 1.0});
  CHECK_THROWS_AS(backdoor_objective(p, WeightTable::uniform(one_arm), one_arm), PositivityError);
}

TEST_CASE("ipw examples") {
  const ObservedDataset d = toy({0.2, -1.0, 0.5, 3.0}, {1.0, 0.0, 1.0, 0.0}, {1.0, 1.0, 0.0, 0.0});
  const ModelParams half = ModelParams::zeros(Family::logistic, 1);
  // 2 mean(y z) - 2 mean(y (1 - z)) = 2/4 - 2/4
  CHECK(ipw_objective(half, WeightTable::uniform(d), d) == doctest::Approx(0.0));

  Rng rng(32);
  for (int t = 0; t < 10; ++t) {
    const ObservedDataset r = fixture::random_dataset(rng, 30, 2, false);
    double yz = 0, y1z = 0;
    for (Eigen::Index i = 0; i < r.size(); ++i) (r.z()[i] > 0.5 ? yz : y1z) += r.y()[i];
    CHECK(ipw_objective(ModelParams::zeros(Family::logistic, 2), WeightTable::uniform(r), r) ==
          doctest::Approx(2.0 * yz / r.size() - 2.0 * y1z / r.size()));
    const ObservedDataset zero_y(r.x(), VectorXd::Zero(r.size()), r.z());
    CHECK(ipw_objective(fixture::random_theta(rng, Family::logistic, 2), fixture::random_weights(rng, r),
                        zero_y) == 0.0);
  }
}

TEST_CASE("frontdoor examples") {
  Rng rng(33);
  const ObservedDataset r = fixture::random_dataset(rng, 50, 1, false);
  ModelParams flat{Family::linear, (VectorXd(3) << 0.4, 2.0, 0.0).finished()};
  CHECK(frontdoor_objective(flat, fixture::random_weights(rng, r), r) == doctest::Approx(0.0));

  ModelParams ident{Family::linear, (VectorXd(3) << 0.0, 0.0, 1.0).finished()};
  const WeightTable w = fixture::random_weights(rng, r);
  double m1 = 0, m0 = 0;
  for (int z = 0; z < 2; ++z)
    for (Eigen::Index k = 0; k < r.arm_size(z); ++k)
      (z ? m1 : m0) += w.arm(z)[k] * r.x()(r.arm_rows(z)[k], 0);
  CHECK(frontdoor_objective(ident, w, r) == doctest::Approx(m1 - m0));

  // additive in z with no treatment term: both adjustments agree
  for (int t = 0; t < 10; ++t) {
    ModelParams p = fixture::random_theta(rng, Family::linear, 1);
    p.theta[1] = 0.0;
    const WeightTable wt = fixture::random_weights(rng, r);
    CHECK(frontdoor_objective(p, wt, r) == doctest::Approx(backdoor_objective(p, wt, r)));
  }
}

TEST_CASE("double ML examples") {
  Rng rng(34);
  ObservedDataset r = fixture::random_dataset(rng, 60, 2, false);
  EstimatorSpec spec = spec_of(EstimatorKind::double_ml);
  const PreparedData prep(r, spec);
  double yz = 0, zz = 0;
  for (Eigen::Index i = 0; i < r.size(); ++i)
    if (!prep.in_fit_half(i)) yz += r.y()[i] * r.z()[i], zz += r.z()[i];
  const ModelParams zero = ModelParams::zeros(Family::plm, 2);
  CHECK(doubleml_objective(zero, WeightTable::uniform(r), r, spec.split_seed) ==
        doctest::Approx(yz / zz));

  // y = f(x; theta0) + tau z exactly
  ModelParams truth{Family::plm, (VectorXd(4) << 0.5, 0.0, -1.0, 2.0).finished()};
  VectorXd y(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i)
    y[i] = 0.5 - r.x()(i, 0) + 2.0 * r.x()(i, 1) + 3.25 * r.z()[i];
  const ObservedDataset exact(r.x(), y, r.z());
  CHECK(doubleml_objective(truth, fixture::random_weights(rng, exact), exact, 9) ==
        doctest::Approx(3.25).epsilon(1e-12));
  const ObservedDataset zero_y(r.x(), VectorXd::Zero(r.size()), r.z());
  CHECK(doubleml_objective(zero, WeightTable::uniform(zero_y), zero_y) == 0.0);

  // second half without treated rows
  std::vector<double> xs(8, 0.0), ys(8, 1.0), zs{1, 0, 0, 0, 0, 0, 0, 0};
  const ObservedDataset lone = toy(xs, ys, zs);
  bool raised = false;
  for (std::uint64_t seed = 0; seed < 40 && !raised; ++seed) {
    EstimatorSpec s = spec_of(EstimatorKind::double_ml);
    s.split_seed = seed;
    const PreparedData pl(lone, s);
    if (!pl.in_fit_half(0)) continue;
    CHECK_THROWS_AS(doubleml_objective(ModelParams::zeros(Family::plm, 1), WeightTable::uniform(lone), lone, seed),
                    PositivityError);
    raised = true;
  }
  CHECK(raised);
}

TEST_CASE("objectives agree with the row-by-row formulas") {
  Rng rng(35);
  for (const auto& spec : all_specs())
    for (int t = 0; t < 20; ++t) {
      const ObservedDataset d = fixture::random_dataset(rng, 30, 2, spec.outcome_family == Family::logistic);
      const PreparedData prep(d, spec);
      const ModelParams p = fixture::random_theta(rng, spec.model_family(), 2);
      const WeightTable w = fixture::random_weights(rng, d);
      CHECK(evaluate_objective(prep, p, w).value ==
            doctest::Approx(direct_objective(spec, prep, p, w)).epsilon(1e-12));
    }
}

TEST_CASE("splitting a row in two leaves the objective unchanged") {
  Rng rng(36);
  for (const auto& spec : all_specs()) {
    if (spec.kind == EstimatorKind::double_ml) continue; // the split depends on row count
    const ObservedDataset raw = fixture::random_dataset(rng, 40, 2, spec.outcome_family == Family::logistic);
    // equal arms, so duplicating one row per arm keeps the arm frequencies
    const Eigen::Index m = std::min(raw.arm_size(0), raw.arm_size(1));
    std::vector<Eigen::Index> rows;
    for (Eigen::Index k = 0; k < m; ++k) rows.push_back(raw.arm_rows(0)[k]), rows.push_back(raw.arm_rows(1)[k]);
    const ObservedDataset d = raw.subset(rows);
    rows.push_back(raw.arm_rows(0)[0]);
    rows.push_back(raw.arm_rows(1)[0]);
    const ObservedDataset dup = raw.subset(rows);

    const ModelParams p = fixture::random_theta(rng, spec.model_family(), 2);
    const WeightTable w = fixture::random_weights(rng, d);
    WeightTable w_dup;
    for (int z = 0; z < 2; ++z) {
      VectorXd v(m + 1);
      v.head(m) = w.arm(z).weights();
      v[0] *= 0.5;
      v[m] = v[0];
      w_dup.arms[z] = EmpiricalDistribution(v);
    }
    CHECK(evaluate_objective(PreparedData(dup, spec), p, w_dup).value ==
          doctest::Approx(evaluate_objective(PreparedData(d, spec), p, w).value).epsilon(1e-12));
  }
}

TEST_CASE("likelihood constraint") {
  // residuals (1, 1) at theta = 0; the refit fits both rows exactly
  const ObservedDataset d = toy({0.0, 1.0}, {1.0, 1.0}, {0.0, 1.0});
  EstimatorSpec spec = spec_of(EstimatorKind::backdoor);
  spec.slack = 0.5;
  CHECK(likelihood_constraint(spec, ModelParams::zeros(Family::linear, 1), WeightTable::uniform(d), d) ==
        doctest::Approx(0.5));

  Rng rng(37);
  for (auto s : all_specs()) {
    const ObservedDataset r = fixture::random_dataset(rng, 60, 2, s.outcome_family == Family::logistic);
    const PreparedData prep(r, s);
    const WeightTable w = fixture::random_weights(rng, r);
    const FitResult fit = fit_model(prep, w);
    REQUIRE(fit.converged);
    CHECK(evaluate_constraint(prep, fit.params, w).v < 0.0);
    s.slack = 0.0;
    const PreparedData strict(r, s);
    ModelParams off = fit.params;
    off.theta[0] += 0.3;
    CHECK(evaluate_constraint(strict, off, w).v > 0.0);
  }
}

TEST_CASE("naive estimate is the objective at the uniform-weight fit") {
  Rng rng(38);
  for (const auto& spec : all_specs()) {
    const ObservedDataset d = fixture::random_dataset(rng, 200, 3, spec.outcome_family == Family::logistic);
    const PreparedData prep(d, spec);
    const AteEstimate a = naive_estimate(spec, d);
    const WeightTable u = WeightTable::uniform(d);
    CHECK(evaluate_objective(prep, a.theta, u).value == doctest::Approx(a.value).epsilon(1e-8));
  }

  // y = 2 z + x + noise with z independent of x: backdoor within 3 standard
  // errors of 2 (the per-arm formula is a difference in arm means here)
  const Eigen::Index n = 4000;
  MatrixXd x(n, 1);
  VectorXd y(n), z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = std_normal(rng);
    z[i] = uniform01(rng) < 0.5;
    y[i] = 2 * z[i] + x(i, 0) + std_normal(rng);
  }
  const ObservedDataset lin(x, y, z);
  double se2 = 0.0;
  for (int arm = 0; arm < 2; ++arm) {
    double s = 0, ss = 0, k = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if ((z[i] > 0.5) == arm) s += y[i], ss += y[i] * y[i], ++k;
    se2 += (ss - s * s / k) / (k - 1) / k;
  }
  CHECK(std::abs(naive_estimate(spec_of(EstimatorKind::backdoor), lin).value - 2.0) <= 3 * std::sqrt(se2));

  // randomised design: ipw equals the difference in arm means
  for (Eigen::Index i = 0; i < n; ++i) z[i] = uniform01(rng) < 0.5;
  const ObservedDataset rct(x, y, z);
  double m1 = 0, m0 = 0, n1 = 0;
  for (Eigen::Index i = 0; i < n; ++i) (z[i] > 0.5 ? m1 : m0) += y[i], n1 += z[i];
  const double diff = m1 / n1 - m0 / (n - n1);
  const double ipw = naive_estimate(spec_of(EstimatorKind::ipw), rct).value;
  CHECK(std::abs(ipw - diff) <= 3 * 2.0 * std::sqrt(4.0 / n));
}

TEST_CASE("gradients match finite differences") {
  Rng rng(39);
  for (const auto& spec : all_specs()) {
    CAPTURE(to_string(spec.kind));
    for (int t = 0; t < 100; ++t) {
      const ObservedDataset d = fixture::random_dataset(rng, 24, 1 + t % 3, spec.outcome_family == Family::logistic);
      const PreparedData prep(d, spec);
      const ModelParams p = fixture::random_theta(rng, spec.model_family(), d.dim());
      const WeightTable w = fixture::random_weights(rng, d);
      const auto dir = fixture::tangent(rng, d);

      const ObjectiveEval q = evaluate_objective(prep, p, w);
      const ConstraintEval v = evaluate_constraint(prep, p, w);
      for (Eigen::Index j = 0; j < p.theta.size(); ++j) {
        auto at = [&](double h) {
          ModelParams s = p;
          s.theta[j] += h;
          return s;
        };
        CHECK(oracle::rel_err(q.grad_theta[j], oracle::directional_fd([&](double h) {
                                return evaluate_objective(prep, at(h), w).value;
                              })) < 1e-4);
        CHECK(oracle::rel_err(v.grad_theta[j], oracle::directional_fd([&](double h) {
                                return evaluate_constraint(prep, at(h), w).v;
                              })) < 1e-4);
      }
      const double q_dir = q.grad_w[0].dot(dir[0]) + q.grad_w[1].dot(dir[1]);
      const double v_dir = v.grad_w[0].dot(dir[0]) + v.grad_w[1].dot(dir[1]);
      CHECK(oracle::rel_err(q_dir, oracle::directional_fd([&](double h) {
                              return evaluate_objective(prep, p, fixture::shifted(w, dir, h)).value;
                            })) < 1e-4);
      CHECK(oracle::rel_err(v_dir, oracle::directional_fd([&](double h) {
                              return evaluate_constraint(prep, p, fixture::shifted(w, dir, h)).v;
                            })) < 1e-4);
    }
  }
}

TEST_CASE("spec validation") {
  EstimatorSpec s = spec_of(EstimatorKind::backdoor, Family::plm);
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s = spec_of(EstimatorKind::ipw);
  s.propensity_clip = 0.6;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s.propensity_clip = 0.01;
  s.slack = -1;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  CHECK(estimator_from_string("doubleml") == EstimatorKind::double_ml);
  CHECK_THROWS(estimator_from_string("aipw"));
}
