#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "ngkit/cell.hpp"

namespace ngkit {

struct PacketRecord {
  int64_t recv_time_us = 0;  // receiver clock
  uint32_t size_bytes = 0;
  int64_t one_way_delay_us = 0;
  uint64_t seq = 0;
};

struct RetxEvent {
  enum class Source : uint8_t { kPacketLog, kMessages };
  Source source = Source::kMessages;
  int64_t time_ms = 0;     // burst arrival (log) or retx subframe (messages)
  int64_t start_ms = 0;    // original transmission, 8 ms earlier
  unsigned burst_packets = 0;  // log side
  uint16_t rnti = 0;           // message side
  uint8_t harq = 0;
};

struct FusionConfig {
  double gap_tolerance_ms = 0.5;   // slack around the 8 ms signature
  unsigned min_burst_packets = 2;  // packets within 1 ms after the gap
  int search_range_ms = 500;
};

// ---------------------------------------------------------------------------
// Packet-log synthesis from ground truth. The link layer delivers blocks
// in order: every packet behind a failed block waits in the reorder
// buffer until the retransmission lands, then the whole backlog flushes
// as one burst.

struct PacketLogParams {
  uint16_t rnti = 0;
  unsigned payload_bytes = 1400;
  int64_t base_owd_us = 20000;
  int64_t clock_offset_ms = 0;  // receiver clock minus subframe clock
};

inline std::vector<PacketRecord> synth_packet_log(
    std::span<const SubframeTruth> truths, const PacketLogParams& p) {
  struct Block {
    uint64_t sfn;       // transmission subframe
    uint64_t ready_at;  // when it decodes successfully
    unsigned packets;
  };
  std::vector<Block> blocks;
  double carry_bytes = 0.0;

  // a block indexed by (rnti, harq) is pending until its ndi=false
  // successor stops appearing; track latest delivery time per chain
  std::vector<std::pair<uint64_t, uint64_t>> chain;  // (key, ready sfn)

  for (const auto& t : truths) {
    for (const auto& m : t.messages) {
      if (m.rnti != p.rnti) continue;
      uint64_t key = (static_cast<uint64_t>(m.rnti) << 8) | m.harq;
      if (m.ndi) {
        carry_bytes += m.tbs / 8.0;
        unsigned pkts = static_cast<unsigned>(carry_bytes / p.payload_bytes);
        carry_bytes -= static_cast<double>(pkts) * p.payload_bytes;
        blocks.push_back({t.sfn, t.sfn, pkts});
        chain.push_back({key, blocks.size() - 1});
      } else {
        // the retransmission recovers the most recent block of this chain
        for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
          if (it->first == key) {
            blocks[it->second].ready_at = t.sfn;
            break;
          }
        }
      }
    }
  }

  // in-order release: a block departs once every earlier block is ready
  std::vector<PacketRecord> log;
  uint64_t release_floor = 0;
  uint64_t seq = 0;
  for (const auto& b : blocks) {
    release_floor = std::max(release_floor, b.ready_at);
    for (unsigned k = 0; k < b.packets; ++k) {
      PacketRecord rec;
      rec.recv_time_us =
          (static_cast<int64_t>(release_floor) + p.clock_offset_ms) * 1000 +
          p.base_owd_us;
      rec.size_bytes = p.payload_bytes;
      rec.one_way_delay_us =
          p.base_owd_us +
          static_cast<int64_t>(release_floor - b.sfn) * 1000;
      rec.seq = seq++;
      log.push_back(rec);
    }
  }
  std::stable_sort(log.begin(), log.end(),
                   [](const PacketRecord& a, const PacketRecord& b) {
                     return a.recv_time_us < b.recv_time_us;
                   });
  return log;
}

// ---------------------------------------------------------------------------
// Retransmission signatures.

// Packet-log side: an inter-arrival gap of at least 8 ms (within
// tolerance) immediately followed by a burst.
inline std::vector<RetxEvent> detect_retx_from_log(
    std::span<const PacketRecord> log, const FusionConfig& cfg = {}) {
  std::vector<RetxEvent> events;
  const int64_t min_gap_us =
      static_cast<int64_t>((8.0 - cfg.gap_tolerance_ms) * 1000);
  for (size_t i = 1; i < log.size(); ++i) {
    int64_t gap = log[i].recv_time_us - log[i - 1].recv_time_us;
    if (gap < min_gap_us) continue;
    unsigned burst = 1;
    while (i + burst < log.size() &&
           log[i + burst].recv_time_us - log[i].recv_time_us <= 1000)
      ++burst;
    if (burst < cfg.min_burst_packets) continue;
    RetxEvent e;
    e.source = RetxEvent::Source::kPacketLog;
    e.time_ms = log[i].recv_time_us / 1000;
    e.start_ms = e.time_ms - 8;
    e.burst_packets = burst;
    events.push_back(e);
  }
  return events;
}

// Message side: every new-data=false message marks a retransmission
// ending at its subframe, with the original eight subframes earlier.
inline std::vector<RetxEvent> detect_retx_from_msgs(
    std::span<const DciMessage> msgs) {
  std::vector<RetxEvent> events;
  for (const DciMessage& m : msgs) {
    if (m.ndi) continue;
    RetxEvent e;
    e.source = RetxEvent::Source::kMessages;
    e.time_ms = static_cast<int64_t>(m.sfn);
    e.start_ms = e.time_ms - 8;
    e.rnti = m.rnti;
    e.harq = m.harq;
    events.push_back(e);
  }
  return events;
}

// ---------------------------------------------------------------------------
// Clock alignment: the integer shift that matches the most events,
// ties broken toward the smallest magnitude.

struct AlignResult {
  int offset_ms = 0;
  unsigned matched = 0;
};

// Scans offsets outward from zero and keeps the first maximum, so ties
// resolve toward the smallest magnitude (positive before negative).
inline std::optional<AlignResult> align(std::span<const RetxEvent> log_events,
                                        std::span<const RetxEvent> msg_events,
                                        int search_range_ms = 500,
                                        double tolerance_ms = 0.5) {
  if (log_events.empty() || msg_events.empty()) return std::nullopt;
  // at integer-millisecond resolution a +-0.5 ms tolerance means exact
  const int64_t tol = static_cast<int64_t>(tolerance_ms);
  auto matches_at = [&](int off) {
    unsigned matched = 0;
    for (const auto& le : log_events) {
      int64_t shifted = le.time_ms - off;
      for (const auto& me : msg_events) {
        if (std::llabs(shifted - me.time_ms) <= tol) {
          ++matched;
          break;
        }
      }
    }
    return matched;
  };
  AlignResult best{0, matches_at(0)};
  for (int k = 1; k <= search_range_ms; ++k) {
    for (int off : {k, -k}) {
      unsigned m = matches_at(off);
      if (m > best.matched) best = {off, m};
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Receiver association: the ID whose retransmission pattern matches the
// packet log best. Confidence is the margin over the runner-up.

struct AssociationResult {
  uint16_t rnti = 0;
  int offset_ms = 0;
  unsigned matched = 0;
  unsigned margin = 0;
  bool ambiguous = false;
};

struct RntiMessageStream {
  uint16_t rnti;
  std::vector<DciMessage> messages;
};

inline std::optional<AssociationResult> associate_rnti(
    std::span<const PacketRecord> log,
    std::span<const RntiMessageStream> streams,
    const FusionConfig& cfg = {}) {
  auto log_events = detect_retx_from_log(log, cfg);
  std::optional<AssociationResult> best;
  unsigned second = 0;
  for (const auto& stream : streams) {
    auto msg_events = detect_retx_from_msgs(stream.messages);
    auto a = align(log_events, msg_events, cfg.search_range_ms,
                   cfg.gap_tolerance_ms);
    unsigned matched = a ? a->matched : 0;
    if (!best || matched > best->matched) {
      if (best) second = std::max(second, best->matched);
      best = AssociationResult{stream.rnti, a ? a->offset_ms : 0, matched, 0,
                               false};
    } else {
      second = std::max(second, matched);
    }
  }
  if (!best) return std::nullopt;
  best->margin = best->matched - second;
  best->ambiguous = best->margin == 0;
  return best;
}

// ---------------------------------------------------------------------------
// Fused view: the associated user's per-subframe delivery, with message
// subframes as the time base after the recovered shift.

struct FusedRow {
  uint64_t sfn = 0;
  uint16_t rnti = 0;
  uint64_t bytes_delivered = 0;
  bool retx = false;
};

inline std::vector<FusedRow> fuse_streams(std::span<const DciMessage> msgs,
                                          uint16_t rnti) {
  std::map<uint64_t, FusedRow> by_sfn;
  for (const DciMessage& m : msgs) {
    if (m.rnti != rnti) continue;
    FusedRow& row = by_sfn[m.sfn];
    row.sfn = m.sfn;
    row.rnti = rnti;
    row.bytes_delivered += m.tbs / 8;
    row.retx = row.retx || !m.ndi;
  }
  std::vector<FusedRow> out;
  out.reserve(by_sfn.size());
  for (auto& [sfn, row] : by_sfn) out.push_back(row);
  return out;
}

}  // namespace ngkit
