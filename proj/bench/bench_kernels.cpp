// OpenMP kernels against their serial references.

#include <random>

#include <benchmark/benchmark.h>

#include "mindtrace/behave.hpp"
#include "mindtrace/kernels.hpp"
#include "mindtrace/synthetic.hpp"

using namespace mindtrace;

namespace {

Eigen::MatrixXd random_rows(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = detail::standard_normal(rng);
  }
  return m;
}

template <auto Kernel>
void BM_rbf(benchmark::State& state) {
  const Eigen::MatrixXd a = random_rows(state.range(0), 512, 1);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(a, a, 1.0 / 512.0));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

template <auto Kernel>
void BM_scatter(benchmark::State& state) {
  const Eigen::MatrixXd a = random_rows(state.range(0), 512, 2);
  const Eigen::VectorXd center = Eigen::VectorXd::Zero(512);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(a, center));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_hc(benchmark::State& state) {
  const std::size_t d = 12;
  Dag chain([&] {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < d; ++i) names.push_back("v" + std::to_string(i));
    return names;
  }());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 1; i < d; ++i) {
    chain.add_edge(i - 1, i);
    w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 0.8;
  }
  const DataTable data{chain.nodes(), synthetic::linear_gaussian_sample(chain, w, 5000, 3)};
  HcOptions options;
  options.parallel = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(hc_search(data, options).score);
}

}  // namespace

BENCHMARK(BM_rbf<&kernels::rbf_gram>)->Name("rbf_gram/openmp")->Arg(256)->Arg(1024);
BENCHMARK(BM_rbf<&kernels::serial::rbf_gram>)->Name("rbf_gram/serial")->Arg(256)->Arg(1024);
BENCHMARK(BM_scatter<&kernels::scatter>)->Name("scatter/openmp")->Arg(1000)->Arg(5000);
BENCHMARK(BM_scatter<&kernels::serial::scatter>)->Name("scatter/serial")->Arg(1000)->Arg(5000);
BENCHMARK(BM_hc)->Name("hc_search/openmp")->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_hc)->Name("hc_search/serial")->Arg(0)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
