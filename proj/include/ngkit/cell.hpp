#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "ngkit/dci.hpp"

namespace ngkit {

inline constexpr unsigned kCceBits = 72;
inline constexpr uint16_t kRntiMin = 0x003D;  // usable C-RNTI range;
inline constexpr uint16_t kRntiMax = 0xFFF3;  // reserved values excluded

enum class CellRole : uint8_t { kPrimaryCapable, kSecondaryOnly };

struct CellConfig {
  uint32_t cell_id = 0;
  unsigned bandwidth_mhz = 20;
  unsigned n_prb = 100;
  unsigned n_cce = 84;         // usable CCEs, placement happens here
  unsigned n_cce_padded = 88;  // padded to a multiple of 8; the tail CCEs
                               // are never allocated and carry only noise
  unsigned antennas = 2;
  CellRole role = CellRole::kPrimaryCapable;

  static CellConfig for_bandwidth(uint32_t cell_id, unsigned mhz,
                                  CellRole role = CellRole::kPrimaryCapable) {
    CellConfig c;
    c.cell_id = cell_id;
    c.bandwidth_mhz = mhz;
    c.role = role;
    switch (mhz) {
      case 5: c.n_prb = 25; c.n_cce = 12; break;
      case 10: c.n_prb = 50; c.n_cce = 28; break;
      case 20: c.n_prb = 100; c.n_cce = 84; break;
      default: throw std::invalid_argument("bandwidth must be 5, 10 or 20 MHz");
    }
    c.n_cce_padded = (c.n_cce + 7) / 8 * 8;
    if (c.n_cce_padded == c.n_cce) c.n_cce_padded += 8;
    return c;
  }

  unsigned pad_cces() const { return n_cce_padded - n_cce; }
};

struct TrafficModel {
  enum class Kind : uint8_t { kConstantRate, kBursty, kWebLike };
  Kind kind = Kind::kConstantRate;
  double rate_bps = 10e6;        // constant-rate / bursty on-phase rate
  unsigned on_ms = 200;          // bursty
  unsigned off_ms = 800;         // bursty
  double flow_bytes = 250e3;     // web-like mean flow size
  double flow_gap_ms = 2000;     // web-like mean inter-arrival
};

struct McsWalk {
  unsigned initial = 12;
  unsigned lo = 0;
  unsigned hi = 28;
  double step_prob = 0.1;  // per period, each direction equally likely
  unsigned period_ms = 50;
};

struct UeProfile {
  uint16_t rnti = kRntiMin;
  TrafficModel traffic;
  McsWalk mcs_walk;
  unsigned streams = 1;
  std::vector<uint32_t> ca_cells;  // first entry is the primary cell

  void validate() const {
    if (rnti < kRntiMin || rnti > kRntiMax)
      throw std::invalid_argument("rnti outside usable C-RNTI range");
    if (streams != 1 && streams != 2)
      throw std::invalid_argument("streams must be 1 or 2");
    if (ca_cells.empty())
      throw std::invalid_argument("ue needs at least a primary cell");
  }
};

// Ground truth for one subframe of one cell.
struct SubframeTruth {
  uint64_t sfn = 0;
  uint32_t cell_id = 0;
  std::vector<DciMessage> messages;
  unsigned idle_prb = 0;
  std::vector<std::pair<uint16_t, uint8_t>> retransmissions;  // (rnti, harq)
};

// Soft channel output for one subframe: n_cce blocks of 72 LLRs.
// Convention: llr > 0 means coded bit 1; occupied bits have mean
// magnitude 2*snr (the BPSK LLR 2y/sigma^2 with unit symbol energy).
struct LlrSubframe {
  uint64_t sfn = 0;
  uint32_t cell_id = 0;
  unsigned n_cce = 0;  // padded count; matches llrs.size() / 72
  std::vector<float> llrs;

  std::span<const float> cce(unsigned i) const {
    return {llrs.data() + static_cast<size_t>(i) * kCceBits, kCceBits};
  }
  std::span<float> cce(unsigned i) {
    return {llrs.data() + static_cast<size_t>(i) * kCceBits, kCceBits};
  }
};

}  // namespace ngkit
