// Chunked OpenMP kernels against their single-loop baselines.
#include "rci/kernels.hpp"
#include "rci/random.hpp"

#include <benchmark/benchmark.h>

#include <omp.h>

using namespace rci;
using kernels::Loss;

namespace {

struct Problem {
  Eigen::MatrixXd phi;
  Eigen::VectorXd target, theta, omega;
};

Problem make(Eigen::Index n, Eigen::Index d) {
  Rng rng(1);
  Problem p{Eigen::MatrixXd(n, d), Eigen::VectorXd(n), Eigen::VectorXd(d), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    p.phi(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < d; ++j) p.phi(i, j) = std_normal(rng);
    p.target[i] = uniform01(rng) < 0.5;
    p.omega[i] = 1.0 / n;
  }
  for (Eigen::Index j = 0; j < d; ++j) p.theta[j] = 0.3 * std_normal(rng);
  return p;
}

void BM_row_loss(benchmark::State& st) {
  const Problem p = make(st.range(0), 7);
  omp_set_num_threads(static_cast<int>(st.range(1)));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::row_loss(Loss::bernoulli_nll, p.phi, p.target, p.theta, p.omega));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_row_loss_serial(benchmark::State& st) {
  const Problem p = make(st.range(0), 7);
  for (auto _ : st)
    benchmark::DoNotOptimize(kernels::row_loss_serial(Loss::bernoulli_nll, p.phi, p.target, p.theta, p.omega));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_curvature(benchmark::State& st) {
  const Problem p = make(st.range(0), 7);
  omp_set_num_threads(static_cast<int>(st.range(1)));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::curvature(Loss::bernoulli_nll, p.phi, p.theta, p.omega));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_curvature_serial(benchmark::State& st) {
  const Problem p = make(st.range(0), 7);
  for (auto _ : st)
    benchmark::DoNotOptimize(kernels::curvature_serial(Loss::bernoulli_nll, p.phi, p.theta, p.omega));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void threads(benchmark::internal::Benchmark* b) {
  for (long n : {2000L, 20000L, 200000L})
    for (long t = 1; t <= omp_get_num_procs(); t *= 2) b->Args({n, t});
}

} // namespace

BENCHMARK(BM_row_loss)->Apply(threads);
BENCHMARK(BM_row_loss_serial)->Arg(2000)->Arg(20000)->Arg(200000);
BENCHMARK(BM_curvature)->Apply(threads);
BENCHMARK(BM_curvature_serial)->Arg(2000)->Arg(20000)->Arg(200000);

BENCHMARK_MAIN();
