#include "energon/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "energon/perf_model.hpp"

namespace energon {

void HardwareConfig::validate() const {
  if (dram_bandwidth <= 0.0 || clock_hz <= 0.0) {
    throw std::invalid_argument("hardware config: bandwidth and clock must be positive");
  }
  if (ipu_pes < 1 || mac_units < 1 || softmax_units < 1 ||
      exp_units_per_softmax < 1 || probv_multipliers < 1 ||
      selector_parallelism < 1) {
    throw std::invalid_argument("hardware config: unit counts must be at least 1");
  }
  if (fu_kbuf_bytes == 0 || au_kvbuf_bytes == 0) {
    throw std::invalid_argument("hardware config: buffer sizes must be positive");
  }
}

HardwareConfig HardwareConfig::energon_edge() {
  HardwareConfig hw;
  hw.name = "energon-edge";
  hw.dram_bandwidth = 25.6;  // 2-channel LP-DDR3-1600 at a 1 GHz core clock
  hw.clock_hz = 1e9;
  hw.ipu_pes = 8;
  hw.mac_units = 1;
  hw.softmax_units = 1;
  hw.exp_units_per_softmax = 8;
  hw.probv_multipliers = 64;
  hw.selector_parallelism = 64;
  hw.fu_kbuf_bytes = 32 * 1024;
  hw.au_kvbuf_bytes = 128 * 1024;
  hw.power = PowerConfig{0.32, 0.9, 1.5, 0.0};
  return hw;
}

HardwareConfig HardwareConfig::energon_server() {
  HardwareConfig hw;
  hw.name = "energon-server";
  hw.dram_bandwidth = 256.0;  // HBM-1.0 at a 1 GHz core clock
  hw.clock_hz = 1e9;
  hw.ipu_pes = 64;
  hw.mac_units = 8;
  hw.softmax_units = 8;
  hw.exp_units_per_softmax = 8;
  hw.probv_multipliers = 512;
  hw.selector_parallelism = 64;
  hw.fu_kbuf_bytes = 32 * 1024;
  hw.au_kvbuf_bytes = 128 * 1024;
  hw.power = PowerConfig{0.89, 2.4, 7.3, 0.0};
  return hw;
}

void Workload::validate() const {
  if (n < 1 || l < 1 || d < 1) {
    throw std::invalid_argument("workload: n, l, d must be positive");
  }
  if (l > n) {
    throw std::invalid_argument("workload: query count exceeds sequence length");
  }
  if (!(beta > 0.0 && beta <= 1.0) || !(gamma > 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("workload: keep fractions must lie in (0, 1]");
  }
  if (!selections.empty()) {
    if (static_cast<int>(selections.size()) != l) {
      throw std::invalid_argument("workload: one selection per query required");
    }
    for (const KeyIndexSet& s : selections) s.validate(n);
  }
}

uint64_t kv_bytes_per_key(int d) {
  // 2 B keys + 2 B values for the attention unit, 4-bit keys for the filter.
  return 4ull * d + (static_cast<uint64_t>(d) + 1) / 2;
}

namespace {

uint64_t ceil_div_u(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

uint64_t transfer_cycles(uint64_t bytes, double bandwidth) {
  if (bytes == 0) return 0;
  return static_cast<uint64_t>(std::ceil(static_cast<double>(bytes) / bandwidth));
}

// Flat-bandwidth DRAM channel shared by fetches and result writebacks,
// served strictly in request order. The first access of a head pays the
// fixed access latency.
class Channel {
 public:
  Channel(double bandwidth, uint64_t busy_until, bool latency_pending)
      : bandwidth_(bandwidth), free_(busy_until),
        latency_pending_(latency_pending) {}

  void push_writeback(uint64_t request, uint64_t bytes) {
    writebacks_.emplace_back(request, bytes);
  }

  // Runs a fetch requested at `request`, after any writebacks requested
  // earlier. Returns its completion time.
  uint64_t fetch(uint64_t request, uint64_t bytes) {
    drain_until(request);
    return run(request, bytes);
  }

  uint64_t drain_all() {
    drain_until(std::numeric_limits<uint64_t>::max());
    return free_;
  }

 private:
  void drain_until(uint64_t request) {
    while (!writebacks_.empty() && writebacks_.front().first <= request) {
      auto [req, bytes] = writebacks_.front();
      writebacks_.pop_front();
      run(req, bytes);
    }
  }

  uint64_t run(uint64_t request, uint64_t bytes) {
    uint64_t start = std::max(free_, request);
    if (latency_pending_) {
      start += kDramFirstAccessCycles;
      latency_pending_ = false;
    }
    free_ = start + transfer_cycles(bytes, bandwidth_);
    return free_;
  }

  double bandwidth_;
  uint64_t free_;
  bool latency_pending_;
  std::deque<std::pair<uint64_t, uint64_t>> writebacks_;
};

struct HeadSim {
  uint64_t load = 0;  // scheduled load leg (first-access latency + staging)
  uint64_t comp = 0;  // makespan of the compute phase after the load leg
  uint64_t fu = 0;
  uint64_t au = 0;
  uint64_t load_transfer = 0;
  uint64_t stalls = 0;
  uint64_t bytes_read = 0;
  uint64_t bytes_written = 0;
  int fetched_keys = 0;

  uint64_t total() const { return load + comp; }
};

int effective_ipu_parallelism(const HardwareConfig& hw, int d) {
  // The banked K-buffer transfers one row per bank per cycle; rows hold
  // 2-bit slices, so supply is banks*row_bits/(2d) key tokens per cycle
  // against a demand of one token per PE per 2 cycles.
  const int supply = kFuBanks * kFuBankRowBits / (2 * d);
  return std::clamp(2 * supply, 1, hw.ipu_pes);
}

HeadSim simulate_one_head(const Workload& w, const HardwareConfig& hw,
                          bool odf) {
  w.validate();
  hw.validate();
  if (odf && w.selections.empty()) {
    throw std::invalid_argument("on-demand fetching requires explicit selections");
  }

  const uint64_t fu_resident = (static_cast<uint64_t>(w.d) * w.n + 1) / 2;
  if (fu_resident > hw.fu_kbuf_bytes) {
    throw BufferOverflowError("4-bit key data (" + std::to_string(fu_resident) +
                              " B) exceeds the filter K-buffer (" +
                              std::to_string(hw.fu_kbuf_bytes) + " B)");
  }

  const uint64_t au_bytes_per_key = 4ull * w.d;
  if (!odf && au_bytes_per_key * w.n > hw.au_kvbuf_bytes) {
    throw BufferOverflowError(
        "prefetched K/V data (" + std::to_string(au_bytes_per_key * w.n) +
        " B) exceeds the K/V buffer (" + std::to_string(hw.au_kvbuf_bytes) +
        " B); enable on-demand fetching or shorten the sequence");
  }

  const int p_eff = effective_ipu_parallelism(hw, w.d);
  const uint64_t n = static_cast<uint64_t>(w.n);
  const uint64_t c1_base = std::max<uint64_t>(
      1, static_cast<uint64_t>(std::llround(w.gamma * w.n)));
  const uint64_t k_synth = std::max<uint64_t>(
      1, static_cast<uint64_t>(std::llround(w.beta * w.n)));

  HeadSim sim;

  uint64_t base = 0;
  bool channel_latency_pending = true;
  if (!odf) {
    const uint64_t bulk = kv_bytes_per_key(w.d) * n;
    sim.load_transfer = transfer_cycles(bulk, hw.dram_bandwidth);
    sim.load = kDramFirstAccessCycles + sim.load_transfer;
    sim.bytes_read += bulk;
    sim.fetched_keys = w.n;
    base = sim.load;
    channel_latency_pending = false;
  }

  Channel channel(hw.dram_bandwidth, base, channel_latency_pending);
  std::vector<bool> fetched(static_cast<size_t>(w.n), false);

  uint64_t ipu_free = base;
  uint64_t sel_free = base;
  uint64_t mac_free = base;
  std::vector<uint64_t> sm_free(static_cast<size_t>(hw.softmax_units), base);
  uint64_t pv_free = base;
  uint64_t last_done = base;
  const uint64_t wb_bytes = 2ull * w.d;

  for (int i = 0; i < w.l; ++i) {
    const uint64_t k_i = w.selections.empty()
                             ? k_synth
                             : static_cast<uint64_t>(w.selections[i].size());
    const uint64_t c1 = std::min(n, std::max(c1_base, k_i));

    // Filtering: round 0 scores all n keys, round 1 the gamma survivors.
    uint64_t t_ipu = 0;
    uint64_t t_sel = 0;
    for (uint64_t c : {n, c1}) {
      t_ipu += 2 * ceil_div_u(c, static_cast<uint64_t>(p_eff));
      t_sel += kSelectorDrainCycles +
               ceil_div_u(c, static_cast<uint64_t>(hw.selector_parallelism));
    }
    const uint64_t ipu_done = ipu_free + t_ipu;
    ipu_free = ipu_done;
    sim.fu += t_ipu;

    const uint64_t sel_done = std::max(sel_free, ipu_done) + t_sel;
    sel_free = sel_done;

    uint64_t data_ready = sel_done;
    if (odf) {
      uint64_t missing = 0;
      for (int key : w.selections[i].indices) {
        if (!fetched[static_cast<size_t>(key)]) {
          fetched[static_cast<size_t>(key)] = true;
          ++missing;
        }
      }
      if (missing > 0) {
        sim.fetched_keys += static_cast<int>(missing);
        if (au_bytes_per_key * sim.fetched_keys > hw.au_kvbuf_bytes) {
          throw BufferOverflowError(
              "on-demand K/V resident set (" +
              std::to_string(au_bytes_per_key * sim.fetched_keys) +
              " B) exceeds the K/V buffer (" +
              std::to_string(hw.au_kvbuf_bytes) + " B)");
        }
        const uint64_t bytes = missing * kv_bytes_per_key(w.d);
        sim.bytes_read += bytes;
        sim.load_transfer += transfer_cycles(bytes, hw.dram_bandwidth);
        data_ready = channel.fetch(sel_done, bytes);
      }
    }

    const uint64_t t_mac = 2 * ceil_div_u(k_i, static_cast<uint64_t>(hw.mac_units));
    const uint64_t mac_ready = std::max(mac_free, data_ready);
    sim.stalls += mac_ready - mac_free;  // MAC idle waiting on upstream
    const uint64_t mac_done = mac_ready + t_mac;
    mac_free = mac_done;
    sim.au += t_mac;

    const size_t slot = static_cast<size_t>(i) %
                        static_cast<size_t>(hw.softmax_units);
    const uint64_t t_sm =
        ceil_div_u(k_i, static_cast<uint64_t>(hw.exp_units_per_softmax)) +
        kSoftmaxDrainCycles;
    const uint64_t sm_done = std::max(sm_free[slot], mac_done) + t_sm;
    sm_free[slot] = sm_done;

    const uint64_t t_pv = ceil_div_u(
        k_i * static_cast<uint64_t>(w.d),
        static_cast<uint64_t>(hw.probv_multipliers));
    const uint64_t pv_done = std::max(pv_free, sm_done) + t_pv;
    pv_free = pv_done;

    channel.push_writeback(pv_done, wb_bytes);
    sim.bytes_written += wb_bytes;
    last_done = pv_done;
  }

  const uint64_t end = std::max(last_done, channel.drain_all());
  sim.comp = end - base;
  return sim;
}

CycleReport finalize_report(const HeadSim& sim, const HardwareConfig& hw,
                            double fetched_fraction, bool double_buffered) {
  CycleReport rep;
  rep.total_cycles = sim.total();
  rep.fu_cycles = sim.fu;
  rep.au_cycles = sim.au;
  rep.load_cycles = sim.load_transfer;
  rep.dram_bytes_read = sim.bytes_read;
  rep.dram_bytes_written = sim.bytes_written;
  rep.pipeline_stalls = sim.stalls;
  rep.keys_fetched_fraction = fetched_fraction;
  rep.double_buffered = double_buffered;
  const double seconds = rep.total_cycles / hw.clock_hz;
  const double static_w =
      hw.power.core_w + hw.power.interface_w + hw.power.dram_w;
  rep.energy_joules =
      static_w * seconds +
      hw.power.dram_pj_per_byte * 1e-12 *
          static_cast<double>(rep.dram_bytes_read + rep.dram_bytes_written);
  return rep;
}

}  // namespace

CycleReport simulate_head(const Workload& w, const HardwareConfig& hw) {
  const HeadSim sim = simulate_one_head(w, hw, false);
  return finalize_report(sim, hw, 1.0, false);
}

CycleReport simulate_odf(const Workload& w, const HardwareConfig& hw) {
  const HeadSim sim = simulate_one_head(w, hw, true);
  return finalize_report(sim, hw,
                         static_cast<double>(sim.fetched_keys) / w.n, false);
}

bool decide_double_buffering(const Workload& w, const HardwareConfig& hw) {
  const PipelineEstimate est =
      estimate(w.n, w.l, w.d, hw.dram_bandwidth, w.beta, w.gamma,
               hw.mac_units, hw.ipu_pes);
  return advise(est).double_buffer;
}

CycleReport simulate_model(const std::vector<Workload>& heads,
                           const HardwareConfig& hw, bool odf) {
  if (heads.empty()) {
    throw std::invalid_argument("simulate_model requires at least one head");
  }

  bool buffered = false;
  switch (hw.double_buffer) {
    case DoubleBufferMode::on: buffered = true; break;
    case DoubleBufferMode::off: buffered = false; break;
    case DoubleBufferMode::automatic:
      buffered = decide_double_buffering(heads.front(), hw);
      break;
  }

  std::vector<HeadSim> sims;
  sims.reserve(heads.size());
  for (const Workload& w : heads) {
    sims.push_back(simulate_one_head(w, hw, odf));
  }

  HeadSim agg;
  double fraction_sum = 0.0;
  uint64_t total = 0;
  uint64_t head_stalls = 0;
  if (buffered) {
    // Head h+1's load leg overlaps head h's compute phase.
    total = sims.front().load;
    for (size_t h = 1; h < sims.size(); ++h) {
      total += std::max(sims[h].load, sims[h - 1].comp);
      head_stalls += sims[h].load > sims[h - 1].comp
                         ? sims[h].load - sims[h - 1].comp
                         : 0;
    }
    total += sims.back().comp;
  } else {
    for (const HeadSim& s : sims) total += s.total();
  }

  for (size_t h = 0; h < sims.size(); ++h) {
    agg.fu += sims[h].fu;
    agg.au += sims[h].au;
    agg.load_transfer += sims[h].load_transfer;
    agg.stalls += sims[h].stalls;
    agg.bytes_read += sims[h].bytes_read;
    agg.bytes_written += sims[h].bytes_written;
    fraction_sum += static_cast<double>(sims[h].fetched_keys) / heads[h].n;
  }
  agg.load = 0;
  agg.comp = total;
  agg.stalls += head_stalls;

  return finalize_report(agg, hw, fraction_sum / static_cast<double>(sims.size()),
                         buffered);
}

}  // namespace energon
