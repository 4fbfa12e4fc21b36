#pragma once

namespace energon {

// Closed-form per-head pipeline estimates.
//
//   t_load    = 4.5 * d * n / B          DRAM cycles to stage one head's K/V
//                                        (4 B of 16-bit K+V per feature for
//                                        the attention unit, 0.5 B of 4-bit K
//                                        for the filtering unit)
//   t_comp    = 2 * beta * n * l / m     attention cycles per head; the MAC
//                                        array retires m results per 2 cycles
//   t_comp_fu = 2 * (1 + gamma) * n / p  filtering cycles per query across
//                                        both rounds on p inner-product PEs
//
// beta is the final keep fraction, gamma the round-0 keep fraction, l the
// query count (1 for cached generation, n otherwise).
struct PipelineEstimate {
  double t_load = 0.0;
  double t_comp = 0.0;
  double t_comp_fu = 0.0;          // per query
  double ratio = 0.0;              // t_load / t_comp
  double balanced_m_over_p = 0.0;  // beta / (1 + gamma)
};

PipelineEstimate estimate(int n, int l, int d, double bandwidth_bytes_per_cycle,
                          double beta, double gamma, int mac_units,
                          int ipu_pes);

// Loading-to-computation ratio below this: the pipeline is computation-bound
// and half of the double K/V buffers can be clock-gated off. At or above:
// keep double buffering for throughput (ties favor throughput).
inline constexpr double kDoubleBufferRatioThreshold = 0.5;

struct PipelineAdvice {
  bool double_buffer = true;
  // FU/AU balance hint m : p = 1 : m_to_p_denominator, rounded to the
  // nearest power of two in log space.
  int m_to_p_denominator = 1;
};

PipelineAdvice advise(const PipelineEstimate& est);

}  // namespace energon
