#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "ngkit/decoder.hpp"

namespace ngkit {

struct TrackerConfig {
  unsigned window_subframes = 16;    // ring buffer span for candidates
  unsigned promote_appearances = 3;  // "count larger than two"
  uint64_t expire_ms = 10000;
  unsigned activity_window_ms = 1000;
  double ca_min_rate_bps = 3e6;
};

struct DetectedUe {
  uint64_t first_seen_sfn = 0;
  uint64_t last_active_sfn = 0;
  FormatId last_format = FormatId::kA;
  std::deque<uint64_t> recent_sfns;           // validated messages, 1 s window
  std::deque<std::pair<uint64_t, uint32_t>> recent_tbs;  // for the rate estimate

  unsigned recent_count() const {
    return static_cast<unsigned>(recent_sfns.size());
  }
  double rate_bps(const TrackerConfig& cfg) const {
    double bits = 0;
    for (auto& [sfn, tbs] : recent_tbs) bits += tbs;
    return bits * 1000.0 / cfg.activity_window_ms;
  }
};

struct TrackerEvent {
  enum class Kind : uint8_t { kPromoted, kExpired, kCaDetected };
  Kind kind;
  uint64_t sfn;
  uint32_t cell_id;
  uint16_t rnti;
  uint32_t primary_cell = 0;  // CA events only
};

// Immutable copy published for cross-cell intersection and decode hints.
struct TrackerSnapshot {
  uint32_t cell_id = 0;
  uint64_t sfn = 0;  // watermark
  struct Entry {
    uint16_t rnti;
    uint64_t first_seen_sfn;
    uint64_t last_active_sfn;
    unsigned recent_count;
    double rate_bps;
    FormatId last_format;
  };
  std::vector<Entry> detected;  // sorted by rnti

  std::vector<ActiveUeHint> hints() const {
    std::vector<ActiveUeHint> out;
    for (const auto& e : detected)
      if (e.recent_count > 0)
        out.push_back({e.rnti, e.recent_count, e.last_format});
    return out;
  }
};

// Temporal validation of derived IDs: candidates are buffered over the
// most recent 16 subframes; an ID seen promote_appearances times within
// the window becomes a detected UE and its buffered messages are
// released. IDs carried by ancestor-validated messages are real by
// construction and enter the detected list directly.
class UeTracker {
public:
  explicit UeTracker(uint32_t cell_id, TrackerConfig cfg = {})
      : cell_id_(cell_id), cfg_(cfg) {}

  uint32_t cell_id() const { return cell_id_; }
  const TrackerConfig& config() const { return cfg_; }

  struct ObserveResult {
    std::vector<DciMessage> validated;  // via promotion or detected-ID match
    std::vector<TrackerEvent> events;
  };

  // Feed one subframe's decode output: messages the decoder already
  // validated plus the leftover candidates. Returns the messages the
  // tracker newly validates (including releases from earlier subframes).
  ObserveResult observe(const DecodeReport& report, uint64_t sfn) {
    ObserveResult out;
    evict_before(sfn);

    for (const auto& v : report.validated) note_validated(v.msg, sfn);

    for (const auto& c : report.candidates) {
      if (auto it = detected_.find(c.derived_rnti); it != detected_.end()) {
        // known UE: the message validates immediately
        out.validated.push_back(c.msg);
        note_validated(c.msg, sfn);
        continue;
      }
      ring_.push_back({sfn, c.msg});
      ++window_count_[c.derived_rnti];
      if (window_count_[c.derived_rnti] >= cfg_.promote_appearances) {
        promote(c.derived_rnti, sfn, out);
      }
    }
    return out;
  }

  // Drop detected UEs inactive for expire_ms. Returns the removed IDs.
  std::vector<uint16_t> expire(uint64_t now_sfn,
                               std::vector<TrackerEvent>* events = nullptr) {
    std::vector<uint16_t> removed;
    for (auto it = detected_.begin(); it != detected_.end();) {
      if (now_sfn >= it->second.last_active_sfn &&
          now_sfn - it->second.last_active_sfn >= cfg_.expire_ms) {
        removed.push_back(it->first);
        if (events)
          events->push_back({TrackerEvent::Kind::kExpired, now_sfn, cell_id_,
                             it->first, 0});
        it = detected_.erase(it);
      } else {
        ++it;
      }
    }
    return removed;
  }

  bool is_detected(uint16_t rnti) const { return detected_.count(rnti) > 0; }
  size_t detected_count() const { return detected_.size(); }

  TrackerSnapshot snapshot(uint64_t sfn) const {
    TrackerSnapshot s;
    s.cell_id = cell_id_;
    s.sfn = sfn;
    for (const auto& [rnti, ue] : detected_)
      s.detected.push_back({rnti, ue.first_seen_sfn, ue.last_active_sfn,
                            ue.recent_count(), ue.rate_bps(cfg_),
                            ue.last_format});
    return s;
  }

private:
  void evict_before(uint64_t sfn) {
    const uint64_t horizon =
        sfn >= cfg_.window_subframes ? sfn - cfg_.window_subframes + 1 : 0;
    while (!ring_.empty() && ring_.front().first < horizon) {
      uint16_t rnti = ring_.front().second.rnti;
      auto it = window_count_.find(rnti);
      if (it != window_count_.end() && --it->second == 0)
        window_count_.erase(it);
      ring_.pop_front();
    }
    for (auto& [rnti, ue] : detected_) {
      const uint64_t act_horizon =
          sfn >= cfg_.activity_window_ms ? sfn - cfg_.activity_window_ms + 1
                                         : 0;
      while (!ue.recent_sfns.empty() && ue.recent_sfns.front() < act_horizon)
        ue.recent_sfns.pop_front();
      while (!ue.recent_tbs.empty() && ue.recent_tbs.front().first < act_horizon)
        ue.recent_tbs.pop_front();
    }
  }

  void note_validated(const DciMessage& m, uint64_t sfn) {
    auto [it, fresh] = detected_.try_emplace(m.rnti);
    DetectedUe& ue = it->second;
    if (fresh) ue.first_seen_sfn = m.sfn;
    ue.last_active_sfn = std::max(ue.last_active_sfn, sfn);
    ue.last_format = m.format;
    ue.recent_sfns.push_back(sfn);
    ue.recent_tbs.push_back({sfn, m.tbs});
  }

  void promote(uint16_t rnti, uint64_t sfn, ObserveResult& out) {
    out.events.push_back(
        {TrackerEvent::Kind::kPromoted, sfn, cell_id_, rnti, 0});
    // release everything buffered for this ID, oldest first; the first
    // release fixes first_seen_sfn at the oldest buffered subframe
    for (auto& [buf_sfn, msg] : ring_) {
      if (msg.rnti != rnti) continue;
      out.validated.push_back(msg);
      note_validated(msg, sfn);
    }
    std::erase_if(ring_,
                  [rnti](const auto& e) { return e.second.rnti == rnti; });
    window_count_.erase(rnti);
  }

  uint32_t cell_id_;
  TrackerConfig cfg_;
  std::deque<std::pair<uint64_t, DciMessage>> ring_;
  std::map<uint16_t, unsigned> window_count_;
  std::map<uint16_t, DetectedUe> detected_;
};

// ---------------------------------------------------------------------------
// Carrier aggregation: IDs detected in two or more cells, ordered by the
// time of first appearance (earliest cell = primary; ties break toward
// the lower cell id). Low-rate UEs are filtered out.

struct CaEntry {
  uint16_t rnti = 0;
  std::vector<std::pair<uint32_t, uint64_t>> cells;  // (cell_id, first_seen)
  double rate_bps = 0.0;  // highest per-cell recent rate

  uint32_t primary_cell() const { return cells.front().first; }
};

struct CaMap {
  std::map<uint16_t, CaEntry> entries;

  bool aggregated(uint16_t rnti) const { return entries.count(rnti) > 0; }
  std::vector<uint32_t> cells_of(uint16_t rnti) const {
    std::vector<uint32_t> out;
    if (auto it = entries.find(rnti); it != entries.end())
      for (auto& [cell, seen] : it->second.cells) out.push_back(cell);
    return out;
  }
};

inline CaMap ca_intersect(const std::vector<TrackerSnapshot>& snapshots,
                          double min_rate_bps = 3e6) {
  std::map<uint16_t, CaEntry> acc;
  for (const auto& snap : snapshots) {
    for (const auto& e : snap.detected) {
      CaEntry& entry = acc[e.rnti];
      entry.rnti = e.rnti;
      entry.cells.push_back({snap.cell_id, e.first_seen_sfn});
      entry.rate_bps += e.rate_bps;  // total load across aggregated cells
    }
  }
  CaMap map;
  for (auto& [rnti, entry] : acc) {
    if (entry.cells.size() < 2) continue;
    if (entry.rate_bps < min_rate_bps) continue;
    std::sort(entry.cells.begin(), entry.cells.end(),
              [](const auto& a, const auto& b) {
                return a.second != b.second ? a.second < b.second
                                            : a.first < b.first;
              });
    map.entries[rnti] = std::move(entry);
  }
  return map;
}

}  // namespace ngkit
