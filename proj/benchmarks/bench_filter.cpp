#include <benchmark/benchmark.h>

#include "energon/filter.hpp"
#include "energon/quantize.hpp"
#include "energon/synthetic.hpp"

using namespace energon;

namespace {

QuantizedMatrix random_q16(int rows, int cols, uint64_t seed) {
  Rng rng(seed);
  QuantizedMatrix qm;
  qm.rows = rows;
  qm.cols = cols;
  qm.scale = 1.0;
  qm.data.resize(static_cast<size_t>(rows) * cols);
  for (auto& v : qm.data) v = static_cast<int16_t>(rng.next() & 0xFFFF);
  return qm;
}

void select_per_query(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const QuantizedMatrix qq = random_q16(n, 64, 1);
  const QuantizedMatrix kq = random_q16(n, 64, 2);
  const FilterConfig cfg = FilterConfig::two_round(0.0, 0.0);

  int row = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(select(row, qq, kq, cfg));
    row = (row + 1) % n;
  }
  state.SetItemsProcessed(state.iterations() * n);  // candidate keys scored
}
BENCHMARK(select_per_query)->Arg(256)->Arg(512)->Arg(1024);

void reuse_vs_recompute(benchmark::State& state) {
  const bool reuse = state.range(0) != 0;
  const int n = 1024;
  const QuantizedMatrix qq = random_q16(1, 64, 3);
  const QuantizedMatrix kq = random_q16(n, 64, 4);
  FilterConfig cfg = FilterConfig::two_round(0.0, 0.0);
  cfg.reuse_round0 = reuse;

  for (auto _ : state) {
    benchmark::DoNotOptimize(select(0, qq, kq, cfg));
  }
}
BENCHMARK(reuse_vs_recompute)->Arg(0)->Arg(1);

void topk_oracle(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(5);
  std::vector<double> scores(static_cast<size_t>(n));
  for (double& s : scores) s = rng.gaussian();
  for (auto _ : state) {
    benchmark::DoNotOptimize(topk_select(scores, n / 8));
  }
}
BENCHMARK(topk_oracle)->Arg(1024)->Arg(4096);

}  // namespace

BENCHMARK_MAIN();
