#include <benchmark/benchmark.h>

#include "energon/sim.hpp"
#include "energon/synthetic.hpp"

using namespace energon;

namespace {

void simulate_head_cycles(benchmark::State& state) {
  Workload w;
  w.n = static_cast<int>(state.range(0));
  w.l = w.n;
  w.d = 64;
  w.beta = 0.25;
  w.gamma = 0.5;
  HardwareConfig hw = HardwareConfig::energon_server();
  hw.fu_kbuf_bytes = 1ull << 22;
  hw.au_kvbuf_bytes = 1ull << 24;

  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_head(w, hw));
  }
  state.SetItemsProcessed(state.iterations() * w.l);
}
BENCHMARK(simulate_head_cycles)->Arg(512)->Arg(1024)->Arg(4096);

void simulate_model_sweep(benchmark::State& state) {
  Workload w;
  w.n = 512;
  w.l = 512;
  w.d = 64;
  w.beta = 0.25;
  w.gamma = 0.5;
  const std::vector<Workload> heads(12, w);
  HardwareConfig hw = HardwareConfig::energon_server();
  hw.double_buffer = DoubleBufferMode::on;

  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_model(heads, hw));
  }
}
BENCHMARK(simulate_model_sweep);

void simulate_odf_tracking(benchmark::State& state) {
  Rng rng(9);
  Workload w;
  w.n = 1024;
  w.l = 256;
  w.d = 64;
  w.beta = 0.25;
  w.gamma = 0.5;
  for (int i = 0; i < w.l; ++i) {
    KeyIndexSet sel;
    for (int j = 0; j < 64; ++j) {
      const int key = rng.uniform_int(0, w.n - 1);
      if (sel.indices.empty() || key > sel.indices.back()) {
        sel.indices.push_back(key);
      }
    }
    if (sel.indices.empty()) sel.indices.push_back(0);
    w.selections.push_back(std::move(sel));
  }
  HardwareConfig hw = HardwareConfig::energon_server();
  hw.au_kvbuf_bytes = 1ull << 24;

  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_odf(w, hw));
  }
}
BENCHMARK(simulate_odf_tracking);

}  // namespace

BENCHMARK_MAIN();
