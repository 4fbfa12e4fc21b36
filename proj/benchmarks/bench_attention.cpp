#include <benchmark/benchmark.h>

#include "energon/attention.hpp"
#include "energon/sparse_attention.hpp"
#include "energon/synthetic.hpp"

using namespace energon;

namespace {

struct Inputs {
  Matrix q, k, v;
};

Inputs make_inputs(int n, int d, uint64_t seed) {
  Rng rng(seed);
  return Inputs{gaussian_matrix(n, d, rng), gaussian_matrix(n, d, rng),
                gaussian_matrix(n, d, rng)};
}

void dense_attention(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Inputs in = make_inputs(n, 256, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dense_mha(split_heads(in.q, in.k, in.v, 4)));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(dense_attention)->Arg(128)->Arg(256);

void filtered_attention(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Inputs in = make_inputs(n, 256, 1);
  const FilterConfig cfg = FilterConfig::two_round(0.0, 0.2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(energon_attention(in.q, in.k, in.v, 4, cfg));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(filtered_attention)->Arg(128)->Arg(256);

void softmax_paths(benchmark::State& state) {
  Rng rng(2);
  std::vector<double> row(1024);
  for (double& v : row) v = -5.0 * rng.uniform();
  const bool taylor = state.range(0) != 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        taylor ? softmax_taylor(row) : softmax_exact(row));
  }
}
BENCHMARK(softmax_paths)->Arg(0)->Arg(1);

}  // namespace

BENCHMARK_MAIN();
