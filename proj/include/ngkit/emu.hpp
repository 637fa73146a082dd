#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ngkit/dci.hpp"
#include "ngkit/rng.hpp"

namespace ngkit {

inline constexpr unsigned kMtuBytes = 1500;

// ---------------------------------------------------------------------------
// Delivery-opportunity trace: one timestamp per MTU-sized send slot.

struct LinkTrace {
  std::vector<uint64_t> opportunities_ms;  // nondecreasing, repeats allowed

  uint64_t duration_ms() const {
    return opportunities_ms.empty() ? 0 : opportunities_ms.back() + 1;
  }
  double mean_capacity_bps() const {
    if (opportunities_ms.empty()) return 0.0;
    return static_cast<double>(opportunities_ms.size()) * kMtuBytes * 8 *
           1000.0 / static_cast<double>(duration_ms());
  }
};

// Bits-per-millisecond series to opportunities, conserving bytes via a
// fractional carry.
inline LinkTrace trace_from_capacity(std::span<const double> bits_per_ms,
                                     unsigned mtu_bytes = kMtuBytes) {
  LinkTrace trace;
  double carry = 0.0;
  const double bits_per_pkt = 8.0 * mtu_bytes;
  for (size_t t = 0; t < bits_per_ms.size(); ++t) {
    carry += bits_per_ms[t];
    while (carry >= bits_per_pkt) {
      trace.opportunities_ms.push_back(t);
      carry -= bits_per_pkt;
    }
  }
  return trace;
}

// ---------------------------------------------------------------------------
// CUBIC window (beta = 0.7, C = 0.4), windows measured in packets.

struct CubicState {
  double cwnd = 10.0;
  double w_max = 0.0;
  double epoch_start_s = -1.0;
  double k_s = 0.0;
  static constexpr double kBeta = 0.7;
  static constexpr double kC = 0.4;
};

// The cubic trajectory after a loss: w(t) = C (t - K)^3 + w_max.
inline double cubic_window(const CubicState& s, double t_since_epoch_s) {
  double d = t_since_epoch_s - s.k_s;
  return CubicState::kC * d * d * d + s.w_max;
}

inline void cubic_on_loss(CubicState& s) {
  s.w_max = s.cwnd;
  s.cwnd = std::max(2.0, s.cwnd * CubicState::kBeta);
  s.epoch_start_s = -1.0;
}

// Ack-clocked growth toward the cubic trajectory; never shrinks the
// window outside loss events.
inline double cubic_on_ack(CubicState& s, double now_s, double rtt_s) {
  if (s.epoch_start_s < 0) {
    s.epoch_start_s = now_s;
    s.k_s = std::cbrt(s.w_max * (1.0 - CubicState::kBeta) / CubicState::kC);
    if (s.w_max <= 0) s.k_s = 0.0;
  }
  double target = cubic_window(s, now_s - s.epoch_start_s + rtt_s);
  if (target > s.cwnd) s.cwnd = std::min(target, s.cwnd * 1.5 + 1.0);
  return s.cwnd;
}

// ---------------------------------------------------------------------------
// Capacity-driven controller with CUBIC fallback. The pacing rate follows
// the telemetry capacity while the bottleneck is the cellular link; when
// the round-trip inflates although the cell is not saturated, the
// bottleneck has moved into the wired path and the controller falls back
// to CUBIC, returning as soon as the CUBIC rate catches up with the
// reported capacity.

struct TelemetrySample {
  double capacity_bps = 0.0;
  double cell_util = 0.0;
};

struct NgccConfig {
  double staleness_ms = 100.0;
  double rtt_inflation_ms = 20.0;
  double util_ceiling = 0.9;
  double min_rate_bps = 1e5;
};

struct NgccState {
  enum class Mode : uint8_t { kCapacityDriven, kCubicFallback };
  Mode mode = Mode::kCapacityDriven;
  CubicState cubic;
  double last_capacity_bps = 0.0;
  double last_telemetry_ms = -1.0;
  double min_rtt_ms = 1e18;
  bool stale = false;
};

inline double ngcc_step(NgccState& st, const NgccConfig& cfg,
                        const TelemetrySample* telemetry, double now_ms,
                        double rtt_sample_ms) {
  if (telemetry) {
    st.last_capacity_bps = telemetry->capacity_bps;
    st.last_telemetry_ms = now_ms;
    st.stale = false;
  } else if (st.last_telemetry_ms < 0 ||
             now_ms - st.last_telemetry_ms > cfg.staleness_ms) {
    st.stale = true;  // hold the last rate and flag it
  }
  if (rtt_sample_ms > 0) st.min_rtt_ms = std::min(st.min_rtt_ms, rtt_sample_ms);

  double capacity = std::max(cfg.min_rate_bps, st.last_capacity_bps);
  double rtt_s = st.min_rtt_ms < 1e17 ? st.min_rtt_ms / 1000.0 : 0.1;

  if (st.mode == NgccState::Mode::kCapacityDriven) {
    bool inflated = rtt_sample_ms > 0 && st.min_rtt_ms < 1e17 &&
                    rtt_sample_ms > st.min_rtt_ms + cfg.rtt_inflation_ms;
    bool cell_unsaturated =
        telemetry && telemetry->cell_util < cfg.util_ceiling;
    if (inflated && cell_unsaturated) {
      st.mode = NgccState::Mode::kCubicFallback;
      st.cubic.cwnd = std::max(
          2.0, capacity * rtt_s / (8.0 * kMtuBytes));
      cubic_on_loss(st.cubic);
    } else {
      return capacity;
    }
  }
  // fallback: CUBIC paces; leave as soon as it reaches the cell capacity
  double cwnd = cubic_on_ack(st.cubic, now_ms / 1000.0, rtt_s);
  double rate = cwnd * 8.0 * kMtuBytes / rtt_s;
  if (rate >= capacity) {
    st.mode = NgccState::Mode::kCapacityDriven;
    return capacity;
  }
  return std::max(cfg.min_rate_bps, rate);
}

// ---------------------------------------------------------------------------
// Trace-driven single-bottleneck emulator, 1 ms resolution. Packets wait
// in a FIFO queue and depart one per opportunity; delay is propagation
// plus queueing. The sender paces at the policy's rate.

struct EmuLink {
  LinkTrace trace;
  double prop_delay_ms = 10.0;
  unsigned buffer_packets = 0;  // 0 = unbounded (cellular buffering)
};

struct SenderFeedback {
  double last_rtt_ms = 0.0;  // most recent acked packet
  double min_rtt_ms = 0.0;
  uint64_t delivered = 0;
  uint64_t losses = 0;
  unsigned queue_packets = 0;  // oracle view, used by tests
};

using PacingPolicy =
    std::function<double(uint64_t now_ms, const SenderFeedback&)>;

struct DeliveredPacket {
  uint64_t sent_ms = 0;
  uint64_t departed_ms = 0;
  double arrived_ms = 0.0;
};

struct EmulationResult {
  std::vector<DeliveredPacket> delivered;
  uint64_t offered_packets = 0;
  uint64_t dropped_packets = 0;
  uint64_t wasted_opportunities = 0;  // idle slots with an empty queue
  unsigned max_queue = 0;
  unsigned final_queue = 0;
};

inline EmulationResult emulate(const EmuLink& link, const PacingPolicy& policy,
                               uint64_t duration_ms,
                               unsigned pkt_bytes = kMtuBytes) {
  EmulationResult res;
  std::deque<uint64_t> queue;  // sent timestamps
  double credit_bytes = 0.0;
  size_t opp_idx = 0;
  size_t ack_idx = 0;
  SenderFeedback fb;
  fb.min_rtt_ms = 2.0 * link.prop_delay_ms;

  for (uint64_t now = 0; now < duration_ms; ++now) {
    // acks whose return path completed by now
    while (ack_idx < res.delivered.size() &&
           res.delivered[ack_idx].arrived_ms + link.prop_delay_ms <=
               static_cast<double>(now)) {
      const auto& p = res.delivered[ack_idx];
      fb.last_rtt_ms = (p.arrived_ms - static_cast<double>(p.sent_ms)) +
                       link.prop_delay_ms;
      fb.min_rtt_ms = std::min(fb.min_rtt_ms, fb.last_rtt_ms);
      fb.delivered = ack_idx + 1;
      ++ack_idx;
    }
    fb.queue_packets = static_cast<unsigned>(queue.size());

    double rate_bps = policy(now, fb);
    credit_bytes += std::max(0.0, rate_bps) / 8000.0;
    while (credit_bytes >= pkt_bytes) {
      credit_bytes -= pkt_bytes;
      ++res.offered_packets;
      if (link.buffer_packets && queue.size() >= link.buffer_packets) {
        ++res.dropped_packets;
        ++fb.losses;
      } else {
        queue.push_back(now);
      }
    }

    while (opp_idx < link.trace.opportunities_ms.size() &&
           link.trace.opportunities_ms[opp_idx] == now) {
      if (queue.empty()) {
        ++res.wasted_opportunities;
      } else {
        DeliveredPacket p;
        p.sent_ms = queue.front();
        queue.pop_front();
        p.departed_ms = now;
        p.arrived_ms = static_cast<double>(now) + link.prop_delay_ms;
        res.delivered.push_back(p);
      }
      ++opp_idx;
    }
    res.max_queue = std::max(res.max_queue,
                             static_cast<unsigned>(queue.size()));
  }
  res.final_queue = static_cast<unsigned>(queue.size());
  return res;
}

// ---------------------------------------------------------------------------
// Message-drop degradation and flow metrics.

inline std::vector<DciMessage> drop_messages(std::span<const DciMessage> log,
                                             double p, uint64_t seed) {
  if (p < 0.0 || p > 0.5)
    throw std::invalid_argument("drop_messages: p must lie in [0, 0.5]");
  SplitMix64 rng(substream_seed(seed, "msgdrop"));
  std::vector<DciMessage> kept;
  kept.reserve(log.size());
  for (const DciMessage& m : log)
    if (!rng.bernoulli(p)) kept.push_back(m);
  return kept;
}

struct FlowMetrics {
  double throughput_bps = 0.0;
  double p95_delay_ms = 0.0;
  double mean_delay_ms = 0.0;
  uint64_t delivered_packets = 0;
  bool empty = true;
};

// Nearest-rank percentile over one-way delays.
inline FlowMetrics metrics(const EmulationResult& res, uint64_t duration_ms,
                           unsigned pkt_bytes = kMtuBytes) {
  FlowMetrics m;
  m.delivered_packets = res.delivered.size();
  if (res.delivered.empty() || duration_ms == 0) return m;
  m.empty = false;
  std::vector<double> delays;
  delays.reserve(res.delivered.size());
  double sum = 0.0;
  for (const auto& p : res.delivered) {
    double d = p.arrived_ms - static_cast<double>(p.sent_ms);
    delays.push_back(d);
    sum += d;
  }
  std::sort(delays.begin(), delays.end());
  size_t rank = static_cast<size_t>(
      std::ceil(0.95 * static_cast<double>(delays.size())));
  m.p95_delay_ms = delays[rank - 1];
  m.mean_delay_ms = sum / static_cast<double>(delays.size());
  m.throughput_bps = static_cast<double>(res.delivered.size()) * pkt_bytes *
                     8.0 * 1000.0 / static_cast<double>(duration_ms);
  return m;
}

}  // namespace ngkit
