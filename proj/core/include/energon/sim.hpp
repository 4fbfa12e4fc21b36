#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "energon/filter.hpp"

namespace energon {

// Cycle-level model of the co-processor. Granularity is transaction/stage
// level: each query flows through the stages
//
//   IPU -> Selector -> [fetch] -> MAC -> Softmax -> ProbV -> [writeback]
//
// where IPU and Selector form the filtering unit (selector work overlaps the
// next query's scoring), fetch only exists in on-demand mode, and fetch plus
// writeback share one flat-bandwidth DRAM channel arbitrated FIFO. Per-query
// stage costs:
//
//   IPU       sum over rounds of 2 * ceil(candidates / p_eff); each PE is a
//             two-stage pipeline retiring one d-wide dot product per 2
//             cycles, and p_eff caps p at what the banked K-buffer can feed
//   Selector  per round, a fixed 4-cycle drain (divider + threshold
//             calculator) plus ceil(candidates / selector_parallelism)
//             parallel compares
//   MAC       2 * ceil(keys / m); the array retires m results per 2 cycles
//   Softmax   ceil(keys / exp_units) + 4, on softmax_units parallel modules
//   ProbV     ceil(keys * d / probv_multipliers)
//   writeback ceil(2 * d / B) for the 16-bit result row
//
// A head starts computing once its K/V data is staged (prefetch mode) or
// immediately with per-key fetching (on-demand mode). Every DRAM access
// sequence pays a fixed first-access latency per head.
struct PowerConfig {
  double core_w = 0.0;
  double interface_w = 0.0;
  double dram_w = 0.0;
  double dram_pj_per_byte = 0.0;  // optional per-byte DRAM energy term
};

enum class DoubleBufferMode { automatic, on, off };

struct HardwareConfig {
  std::string name;
  double dram_bandwidth = 25.6;  // bytes per cycle
  double clock_hz = 1e9;
  int ipu_pes = 8;
  int mac_units = 1;
  int softmax_units = 1;
  int exp_units_per_softmax = 8;
  int probv_multipliers = 64;
  int selector_parallelism = 64;
  uint64_t fu_kbuf_bytes = 32 * 1024;    // 4-bit keys, one buffer of the pair
  uint64_t au_kvbuf_bytes = 128 * 1024;  // 16-bit K+V, one buffer of the pair
  DoubleBufferMode double_buffer = DoubleBufferMode::automatic;
  PowerConfig power;

  void validate() const;  // throws std::invalid_argument

  static HardwareConfig energon_edge();
  static HardwareConfig energon_server();
};

// One attention head's worth of work. Either explicit per-query selections
// (size l) or the synthetic keep fractions beta/gamma drive the key counts;
// gamma always supplies the round-0 candidate count of the two-round filter.
struct Workload {
  int n = 0;  // sequence length (keys)
  int l = 0;  // query count; 1 for cached generation
  int d = 0;  // per-head feature dimension
  double beta = 0.25;   // final keep fraction
  double gamma = 0.5;   // round-0 keep fraction
  std::vector<KeyIndexSet> selections;  // optional, one per query

  void validate() const;
};

struct CycleReport {
  uint64_t total_cycles = 0;
  uint64_t fu_cycles = 0;    // IPU busy cycles
  uint64_t au_cycles = 0;    // MAC-array busy cycles
  uint64_t load_cycles = 0;  // DRAM transfer cycles for K/V data
  uint64_t dram_bytes_read = 0;
  uint64_t dram_bytes_written = 0;
  uint64_t pipeline_stalls = 0;  // cycles the MAC array waited on upstream
  double energy_joules = 0.0;
  double keys_fetched_fraction = 1.0;  // fetched keys / n, head-averaged
  bool double_buffered = false;        // resolved buffering decision
};

inline constexpr uint64_t kDramFirstAccessCycles = 100;
inline constexpr int kSelectorDrainCycles = 4;
inline constexpr int kSoftmaxDrainCycles = 4;
inline constexpr int kFuBanks = 8;
inline constexpr int kFuBankRowBits = 512;

// 4 bytes of 16-bit K+V plus half a byte of 4-bit filter K per feature.
uint64_t kv_bytes_per_key(int d);

struct BufferOverflowError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Simulates one head with the full K/V prefetched. Throws
// BufferOverflowError when the staged K/V data exceeds a buffer.
CycleReport simulate_head(const Workload& w, const HardwareConfig& hw);

// Simulates one head with on-demand fetching: a key is transferred from
// DRAM the first time any query selects it and never again within the head.
// Requires explicit per-query selections.
CycleReport simulate_odf(const Workload& w, const HardwareConfig& hw);

// Shared gating rule with perf_model::advise: double buffering stays on when
// the loading-to-computation ratio is at least kDoubleBufferRatioThreshold.
bool decide_double_buffering(const Workload& w, const HardwareConfig& hw);

// Multi-head schedule. With double buffering on, head h+1's load overlaps
// head h's compute; off, loads and computes serialize. Energy is integrated
// from the power config over the total cycle count plus the per-byte DRAM
// term.
CycleReport simulate_model(const std::vector<Workload>& heads,
                           const HardwareConfig& hw, bool odf = false);

}  // namespace energon
