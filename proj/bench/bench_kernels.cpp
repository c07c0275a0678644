// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "pvl/numerics/kernels.hpp"
#include "pvl/numerics/rng.hpp"
#include "pvl/objectives/features.hpp"
#include "pvl/protocol/synthetic.hpp"

using namespace pvl;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto &x : v)
    x = u(rng);
  return v;
}

template <bool Parallel> void BM_Gemm(benchmark::State &state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::gemm_parallel(a, b, c, n, n, n);
    else
      kernels::gemm_serial(a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

template <bool Parallel> void BM_ExtractFeatures(benchmark::State &state) {
  protocol::GeneratorParams g{8, static_cast<std::size_t>(state.range(0)) / 8, 16, 1, 4, 0.1, 3};
  auto bundle = protocol::generate_synthetic(g);
  Model model = Model::create(backbone::ViTConfig{}, 1);
  std::vector<std::size_t> idx(bundle.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (auto _ : state)
    benchmark::DoNotOptimize(objectives::extract_features(model, bundle, idx, Parallel));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(idx.size()));
}

template <bool Parallel> void BM_Generate(benchmark::State &state) {
  protocol::GeneratorParams g{56, 50, 16, 1, 4, 0.25, 7};
  for (auto _ : state)
    benchmark::DoNotOptimize(protocol::generate_synthetic(g, Parallel));
}

} // namespace

BENCHMARK(BM_Gemm<false>)->Name("gemm/serial")->Arg(32)->Arg(128)->Arg(256);
BENCHMARK(BM_Gemm<true>)->Name("gemm/parallel")->Arg(32)->Arg(128)->Arg(256);
BENCHMARK(BM_ExtractFeatures<false>)->Name("extract_features/serial")->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExtractFeatures<true>)->Name("extract_features/parallel")->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Generate<false>)->Name("generate/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Generate<true>)->Name("generate/parallel")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
