#include <benchmark/benchmark.h>

#include <random>

#include "vecdenoise/denoise_net.hpp"
#include "vecdenoise/sparse_code.hpp"
#include "vecdenoise/svm.hpp"

namespace {

using namespace vecdenoise;

Matrix gaussian(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = normal(rng);
  return m;
}

Matrix unit_columns(Matrix m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) m.col(j).normalize();
  return m;
}

void BM_LassoEncode(benchmark::State& state) {
  const auto atoms = state.range(0);
  const sparse::Dictionary d(unit_columns(gaussian(50, atoms, 1)));
  const Vector x = gaussian(50, 1, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sparse::lasso_encode(x, d, {.lambda = 0.1}));
  }
}
BENCHMARK(BM_LassoEncode)->Arg(50)->Arg(250)->Arg(500);

void BM_EncodeAll(benchmark::State& state) {
  const sparse::Dictionary d(unit_columns(gaussian(50, 500, 1)));
  const Matrix x = gaussian(state.range(0), 50, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sparse::encode_all(x, d, {.lambda = 1e-3, .max_iters = 200, .tol = 1e-8}));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncodeAll)->Arg(100)->Unit(benchmark::kMillisecond);

net::FilterParams random_filter(Eigen::Index l, Eigen::Index m, int depth) {
  net::FilterParams p;
  p.Q = 0.1 * gaussian(l, m, 4);
  p.S = 0.05 * gaussian(m, m, 5);
  net::enforce_inhibition_structure(p.S);
  p.depth = depth;
  return p;
}

void BM_FilterForward(benchmark::State& state) {
  const auto m = state.range(0);
  const auto p = random_filter(50, m, 3);
  const Matrix x = gaussian(100, 50, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(net::filter_forward(x, p));
  }
}
BENCHMARK(BM_FilterForward)->Arg(50)->Arg(500);

void BM_FilterGradients(benchmark::State& state) {
  const auto m = state.range(0);
  const auto p = random_filter(50, m, 3);
  const Matrix x = gaussian(100, 50, 6);
  const Matrix target = gaussian(100, m, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(net::compute_gradients(x, target, p, 0.5));
  }
}
BENCHMARK(BM_FilterGradients)->Arg(50)->Arg(500);

void BM_SpectralBound(benchmark::State& state) {
  const Matrix d = unit_columns(gaussian(50, state.range(0), 8));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sparse::spectral_upper_bound(d));
  }
}
BENCHMARK(BM_SpectralBound)->Arg(50)->Arg(500);

void BM_Smo(benchmark::State& state) {
  const auto n = state.range(0);
  const Matrix x = gaussian(n, 10, 9);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = x(i, 0) + 0.3 * x(i, 1) > 0 ? 1 : -1;
  const Matrix k = svm::rbf_kernel(x, x, 0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(svm::solve_smo(k, y, 1.0));
  }
}
BENCHMARK(BM_Smo)->Arg(100)->Arg(400);

}  // namespace

BENCHMARK_MAIN();
