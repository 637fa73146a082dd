#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ngkit/cell.hpp"
#include "ngkit/convcode.hpp"
#include "ngkit/crc16.hpp"
#include "ngkit/dci.hpp"
#include "ngkit/rng.hpp"
#include "ngkit/searchspace.hpp"

namespace ngkit {

// ---------------------------------------------------------------------------
// Message encoding: payload -> CRC -> receiver-scrambled checksum ->
// tail-biting convolutional code -> rate matching to 72*L bits.

inline BitVec encode_dci(const DciMessage& m) {
  BitVec word = build_dci_payload(m);
  uint16_t appended = scramble_crc(crc16(word), m.rnti);
  append_uint(word, appended, 16);
  return conv_encode(word);
}

inline std::vector<uint8_t> encode_dci_rate_matched(const DciMessage& m) {
  return rate_match(encode_dci(m), m.aggregation_level);
}

// ---------------------------------------------------------------------------
// CCE placement inside the UE-specific search spaces.

struct CceOccupancy {
  unsigned n_cce_padded = 0;
  std::vector<int> owner;  // per CCE, index into messages; -1 = empty
  std::vector<std::vector<uint8_t>> coded;  // rate-matched bits per message
};

// First-fit placement over each message's hashed candidates. Messages that
// cannot be placed are reported back; the caller drops them and re-balances
// the subframe. Updates cce_start in place.
inline std::vector<size_t> place_messages(std::vector<DciMessage>& messages,
                                          const CellConfig& cfg) {
  std::vector<size_t> failed;
  std::vector<int> owner(cfg.n_cce_padded, -1);
  for (size_t idx = 0; idx < messages.size(); ++idx) {
    DciMessage& m = messages[idx];
    bool placed = false;
    for (unsigned start : search_space_candidates(m.rnti, m.sfn,
                                                  m.aggregation_level,
                                                  cfg.n_cce)) {
      if (start + m.aggregation_level > cfg.n_cce) continue;
      bool free = true;
      for (unsigned c = start; c < start + m.aggregation_level; ++c)
        free = free && owner[c] < 0;
      if (!free) continue;
      for (unsigned c = start; c < start + m.aggregation_level; ++c)
        owner[c] = static_cast<int>(idx);
      m.cce_start = start;
      placed = true;
      break;
    }
    if (!placed) failed.push_back(idx);
  }
  return failed;
}

inline CceOccupancy build_occupancy(const std::vector<DciMessage>& messages,
                                    const CellConfig& cfg) {
  CceOccupancy occ;
  occ.n_cce_padded = cfg.n_cce_padded;
  occ.owner.assign(cfg.n_cce_padded, -1);
  occ.coded.resize(messages.size());
  for (size_t i = 0; i < messages.size(); ++i) {
    const DciMessage& m = messages[i];
    occ.coded[i] = encode_dci_rate_matched(m);
    for (unsigned c = m.cce_start; c < m.cce_start + m.aggregation_level; ++c) {
      if (c >= cfg.n_cce_padded || occ.owner[c] >= 0)
        throw std::logic_error("build_occupancy: overlapping placement");
      occ.owner[c] = static_cast<int>(i);
    }
  }
  return occ;
}

// ---------------------------------------------------------------------------
// Channel: per-coded-bit BPSK LLRs. Occupied bit b maps to symbol
// s = 2b - 1; the receiver sees y = s + n with n ~ N(0, sigma^2) and
// reports llr = 2y/sigma^2. Empty CCEs carry noise only.

inline LlrSubframe channel_apply(const CceOccupancy& occ,
                                 const std::vector<DciMessage>& messages,
                                 uint64_t sfn, uint32_t cell_id,
                                 double snr_db, SplitMix64& rng) {
  const double snr = std::pow(10.0, snr_db / 10.0);
  const double sigma = 1.0 / std::sqrt(snr);
  const double scale = 2.0 / (sigma * sigma);

  LlrSubframe sub;
  sub.sfn = sfn;
  sub.cell_id = cell_id;
  sub.n_cce = occ.n_cce_padded;
  sub.llrs.resize(static_cast<size_t>(occ.n_cce_padded) * kCceBits);

  for (unsigned c = 0; c < occ.n_cce_padded; ++c) {
    int who = occ.owner[c];
    for (unsigned j = 0; j < kCceBits; ++j) {
      double y = sigma * rng.gaussian();
      if (who >= 0) {
        const DciMessage& m = messages[static_cast<size_t>(who)];
        unsigned pos = (c - m.cce_start) * kCceBits + j;
        y += occ.coded[static_cast<size_t>(who)][pos] ? 1.0 : -1.0;
      }
      sub.llrs[static_cast<size_t>(c) * kCceBits + j] =
          static_cast<float>(scale * y);
    }
  }
  return sub;
}

// ---------------------------------------------------------------------------
// Scheduler: round-robin PRB sharing with stop-and-wait HARQ.

struct SimScenario {
  std::vector<CellConfig> cells;
  std::vector<UeProfile> ues;
  double snr_db = 10.0;
  double ber = 0.0;  // per data bit inside a transport block
  uint64_t seed = 1;
  uint64_t duration_ms = 1000;
  unsigned max_harq_retx = 4;
  double ca_spill_threshold_bits = 16000.0;

  const CellConfig& cell_by_id(uint32_t id) const {
    for (const auto& c : cells)
      if (c.cell_id == id) return c;
    throw std::invalid_argument("unknown cell_id");
  }
};

struct SimStats {
  uint64_t placement_drops = 0;
  uint64_t retx_placement_drops = 0;
  uint64_t tb_sent = 0;
  uint64_t tb_failed = 0;
};

class CellSimulator {
public:
  CellSimulator(const SimScenario& sc, size_t cell_index)
      : sc_(sc), cfg_(sc.cells[cell_index]) {
    for (size_t u = 0; u < sc.ues.size(); ++u) {
      const auto& cells = sc.ues[u].ca_cells;
      auto it = std::find(cells.begin(), cells.end(), cfg_.cell_id);
      if (it != cells.end())
        ue_slot_.emplace_back(u, static_cast<unsigned>(it - cells.begin()));
    }
  }

  const CellConfig& config() const { return cfg_; }

  // Schedules one subframe given each UE's pending demand (bits). Demand
  // is decremented by the scheduled transport block sizes.
  SubframeTruth schedule_subframe(uint64_t sfn, std::vector<double>& demand,
                                  std::vector<bool>& appeared,
                                  std::vector<unsigned>& ue_mcs,
                                  SimStats& stats, SplitMix64& fail_rng) {
    SubframeTruth truth;
    truth.sfn = sfn;
    truth.cell_id = cfg_.cell_id;

    unsigned free_prb = cfg_.n_prb;
    unsigned prb_cursor = 0;

    // Retransmissions first: they repeat the failed block eight
    // subframes after the original and are never displaced.
    auto due = pending_retx_.equal_range(sfn);
    std::vector<DciMessage> msgs;
    for (auto it = due.first; it != due.second; ++it) {
      DciMessage m = it->second;
      m.sfn = sfn;
      if (m.nof_prb > free_prb) {
        ++stats.retx_placement_drops;
        harq_busy_[{m.rnti, m.harq}] = false;
        continue;
      }
      m.alloc_start = static_cast<uint8_t>(prb_cursor);
      prb_cursor += m.nof_prb;
      free_prb -= m.nof_prb;
      truth.retransmissions.emplace_back(m.rnti, m.harq);
      msgs.push_back(m);
    }
    pending_retx_.erase(due.first, due.second);

    // Round-robin over backlogged users; the grant cap splits the
    // remaining PRBs evenly among the users not yet served.
    std::vector<size_t> eligible;
    for (size_t slot = 0; slot < ue_slot_.size(); ++slot) {
      auto [u, rank] = ue_slot_[slot];
      const UeProfile& ue = sc_.ues[u];
      if (demand[u] < 1.0) continue;
      if (rank > 0 && !appeared[u]) continue;  // secondaries never lead
      if (rank > 0 && demand[u] < sc_.ca_spill_threshold_bits) continue;
      if (!has_free_harq(ue.rnti)) continue;
      eligible.push_back(slot);
    }
    if (!eligible.empty()) {
      std::rotate(eligible.begin(),
                  eligible.begin() + static_cast<long>(rr_next_ % eligible.size()),
                  eligible.end());
      ++rr_next_;
    }
    for (size_t i = 0; i < eligible.size() && free_prb > 0; ++i) {
      auto [u, rank] = ue_slot_[eligible[i]];
      const UeProfile& ue = sc_.ues[u];
      unsigned cap = (free_prb + static_cast<unsigned>(eligible.size() - i) - 1) /
                     static_cast<unsigned>(eligible.size() - i);
      DciMessage m = make_grant(ue, sfn, ue_mcs[u], demand[u],
                                std::min(cap, free_prb), prb_cursor);
      if (m.nof_prb == 0) continue;
      prb_cursor += m.nof_prb;
      free_prb -= m.nof_prb;
      demand[u] = std::max(0.0, demand[u] - static_cast<double>(m.tbs));
      msgs.push_back(m);
    }

    // Search-space placement; drop whatever cannot be packed.
    auto failed = place_messages(msgs, cfg_);
    for (auto it = failed.rbegin(); it != failed.rend(); ++it) {
      const DciMessage& m = msgs[*it];
      if (!m.ndi) {
        ++stats.retx_placement_drops;
        harq_busy_[{m.rnti, m.harq}] = false;
      } else {
        ++stats.placement_drops;
        size_t u = ue_index(m.rnti);
        demand[u] += static_cast<double>(m.tbs);
        harq_busy_[{m.rnti, m.harq}] = false;
      }
      msgs.erase(msgs.begin() + static_cast<long>(*it));
    }

    // Failure draws and HARQ bookkeeping.
    for (const DciMessage& m : msgs) {
      ++stats.tb_sent;
      double p_fail =
          1.0 - std::pow(1.0 - sc_.ber, static_cast<double>(m.tbs));
      unsigned chain = m.ndi ? 0 : retx_chain_[{m.rnti, m.harq}];
      if (sc_.ber > 0.0 && chain < sc_.max_harq_retx &&
          fail_rng.bernoulli(p_fail)) {
        ++stats.tb_failed;
        DciMessage retx = m;
        retx.ndi = false;
        retx.sfn = sfn + 8;
        if (retx.format == FormatId::kC) retx.format = FormatId::kA;
        pending_retx_.emplace(sfn + 8, retx);
        retx_chain_[{m.rnti, m.harq}] = chain + 1;
        harq_busy_[{m.rnti, m.harq}] = true;
      } else {
        harq_busy_[{m.rnti, m.harq}] = false;
        retx_chain_[{m.rnti, m.harq}] = 0;
      }
    }

    unsigned used = 0;
    for (const DciMessage& m : msgs) used += m.nof_prb;
    truth.idle_prb = cfg_.n_prb - used;
    truth.messages = std::move(msgs);
    std::sort(truth.messages.begin(), truth.messages.end(),
              [](const DciMessage& a, const DciMessage& b) {
                return a.cce_start < b.cce_start;
              });
    return truth;
  }

private:
  struct Key {
    uint16_t rnti;
    uint8_t harq;
    bool operator<(const Key& o) const {
      return rnti != o.rnti ? rnti < o.rnti : harq < o.harq;
    }
  };

  bool has_free_harq(uint16_t rnti) {
    for (uint8_t h = 0; h < 8; ++h)
      if (!harq_busy_[{rnti, h}]) return true;
    return false;
  }

  uint8_t next_free_harq(uint16_t rnti) {
    uint8_t& ptr = harq_ptr_[rnti];
    for (uint8_t step = 0; step < 8; ++step) {
      uint8_t h = static_cast<uint8_t>((ptr + step) % 8);
      if (!harq_busy_[{rnti, h}]) {
        ptr = static_cast<uint8_t>((h + 1) % 8);
        return h;
      }
    }
    throw std::logic_error("next_free_harq called with no free process");
  }

  size_t ue_index(uint16_t rnti) const {
    for (size_t u = 0; u < sc_.ues.size(); ++u)
      if (sc_.ues[u].rnti == rnti) return u;
    throw std::logic_error("unknown rnti");
  }

  DciMessage make_grant(const UeProfile& ue, uint64_t sfn, unsigned mcs,
                        double want_bits, unsigned prb_cap,
                        unsigned prb_cursor) {
    DciMessage m;
    m.rnti = ue.rnti;
    m.sfn = sfn;
    m.ndi = true;
    m.mcs1 = static_cast<uint8_t>(mcs);
    if (ue.streams == 2) m.mcs2 = static_cast<uint8_t>(mcs);

    // smallest PRB count whose transport block covers the demand
    std::optional<unsigned> m2 = m.mcs2 ? std::optional<unsigned>(*m.mcs2)
                                        : std::nullopt;
    double per_prb = static_cast<double>(
        tbs_lookup(m.mcs1, m2, 1, ue.streams));
    unsigned need = per_prb > 0
                        ? static_cast<unsigned>(
                              std::ceil(want_bits / per_prb))
                        : 1;
    need = std::clamp(need, 1u, prb_cap);

    // compact format for small single-stream grants when process 0 is free
    bool proc0_free = !harq_busy_[{ue.rnti, 0}];
    if (ue.streams == 1 && need <= 6 && proc0_free) {
      m.format = FormatId::kC;
      m.nof_prb = static_cast<uint8_t>(compact_prb_floor(need));
      m.mcs1 = static_cast<uint8_t>(mcs - mcs % 4);
      m.alloc_start = 0;
      m.harq = 0;
      harq_busy_[{ue.rnti, 0}] = true;
      harq_ptr_[ue.rnti] = 1;
    } else {
      m.format = ue.streams == 2 ? FormatId::kB : FormatId::kA;
      m.nof_prb = static_cast<uint8_t>(need);
      m.alloc_start = static_cast<uint8_t>(prb_cursor);
      m.harq = next_free_harq(ue.rnti);
      harq_busy_[{ue.rnti, m.harq}] = true;
    }
    m.aggregation_level = pick_level(m.format, ue.rnti, sfn);
    refresh_tbs(m);
    return m;
  }

  // Aggregation level mix: compact grants often ride a single CCE, bigger
  // formats spread over 2..8 with decreasing frequency.
  unsigned pick_level(FormatId f, uint16_t rnti, uint64_t sfn) {
    uint64_t h = substream_seed(sc_.seed, "aggr", cfg_.cell_id,
                                (static_cast<uint64_t>(rnti) << 20) ^ sfn);
    unsigned roll = static_cast<unsigned>(h % 100);
    if (f == FormatId::kC) {
      if (roll < 55) return 1;
      if (roll < 85) return 2;
      if (roll < 97) return 4;
      return 8;
    }
    if (roll < 55) return 2;
    if (roll < 87) return 4;
    return 8;
  }

  const SimScenario& sc_;
  CellConfig cfg_;
  std::vector<std::pair<size_t, unsigned>> ue_slot_;  // (ue index, ca rank)
  std::map<Key, bool> harq_busy_;
  std::map<Key, unsigned> retx_chain_;
  std::map<uint16_t, uint8_t> harq_ptr_;
  std::multimap<uint64_t, DciMessage> pending_retx_;
  uint64_t rr_next_ = 0;
};

// ---------------------------------------------------------------------------
// Whole-scenario driver: traffic models, MCS random walks, per-cell
// scheduling, encoding and the noise channel. Deterministic under seed.

class Simulator {
public:
  explicit Simulator(SimScenario sc) : sc_(std::move(sc)) {
    for (const auto& ue : sc_.ues) ue.validate();
    for (size_t c = 0; c < sc_.cells.size(); ++c) cells_.emplace_back(sc_, c);
    demand_.assign(sc_.ues.size(), 0.0);
    appeared_.assign(sc_.ues.size(), false);
    mcs_.resize(sc_.ues.size());
    for (size_t u = 0; u < sc_.ues.size(); ++u)
      mcs_[u] = sc_.ues[u].mcs_walk.initial;
    traffic_rng_ = SplitMix64(substream_seed(sc_.seed, "traffic"));
    mcs_rng_ = SplitMix64(substream_seed(sc_.seed, "mcswalk"));
    web_next_.assign(sc_.ues.size(), 0.0);
  }

  const SimScenario& scenario() const { return sc_; }
  const SimStats& stats() const { return stats_; }

  struct SubframeOutput {
    std::vector<SubframeTruth> truths;     // one per cell
    std::vector<LlrSubframe> subframes;    // one per cell
  };

  SubframeOutput step(uint64_t sfn) {
    arrive_traffic(sfn);
    walk_mcs(sfn);
    SubframeOutput out;
    for (size_t c = 0; c < cells_.size(); ++c) {
      SplitMix64 fail_rng(substream_seed(sc_.seed, "tbfail",
                                         cells_[c].config().cell_id, sfn));
      SubframeTruth truth = cells_[c].schedule_subframe(
          sfn, demand_, appeared_, mcs_, stats_, fail_rng);
      for (const DciMessage& m : truth.messages) mark_appeared(m.rnti);
      CceOccupancy occ = build_occupancy(truth.messages, cells_[c].config());
      SplitMix64 chan_rng(substream_seed(sc_.seed, "chan",
                                         cells_[c].config().cell_id, sfn));
      out.subframes.push_back(channel_apply(occ, truth.messages, sfn,
                                            cells_[c].config().cell_id,
                                            sc_.snr_db, chan_rng));
      out.truths.push_back(std::move(truth));
    }
    return out;
  }

  void run(const std::function<void(const SubframeOutput&)>& sink) {
    for (uint64_t sfn = 0; sfn < sc_.duration_ms; ++sfn) sink(step(sfn));
  }

private:
  void mark_appeared(uint16_t rnti) {
    for (size_t u = 0; u < sc_.ues.size(); ++u)
      if (sc_.ues[u].rnti == rnti) appeared_[u] = true;
  }

  void arrive_traffic(uint64_t sfn) {
    for (size_t u = 0; u < sc_.ues.size(); ++u) {
      const TrafficModel& t = sc_.ues[u].traffic;
      switch (t.kind) {
        case TrafficModel::Kind::kConstantRate:
          demand_[u] += t.rate_bps / 1000.0;
          break;
        case TrafficModel::Kind::kBursty: {
          uint64_t period = t.on_ms + t.off_ms;
          if (period == 0 || (sfn % period) < t.on_ms)
            demand_[u] += t.rate_bps / 1000.0;
          break;
        }
        case TrafficModel::Kind::kWebLike:
          if (static_cast<double>(sfn) >= web_next_[u]) {
            demand_[u] += t.flow_bytes * 8.0;
            double gap = -t.flow_gap_ms * std::log(1.0 - traffic_rng_.uniform());
            web_next_[u] = static_cast<double>(sfn) + std::max(1.0, gap);
          }
          break;
      }
    }
  }

  void walk_mcs(uint64_t sfn) {
    for (size_t u = 0; u < sc_.ues.size(); ++u) {
      const McsWalk& w = sc_.ues[u].mcs_walk;
      if (w.period_ms == 0 || sfn % w.period_ms != 0 || sfn == 0) continue;
      double roll = mcs_rng_.uniform();
      if (roll < w.step_prob / 2 && mcs_[u] < w.hi) ++mcs_[u];
      else if (roll < w.step_prob && mcs_[u] > w.lo) --mcs_[u];
    }
  }

  SimScenario sc_;
  std::vector<CellSimulator> cells_;
  std::vector<double> demand_;
  std::vector<bool> appeared_;
  std::vector<unsigned> mcs_;
  std::vector<double> web_next_;
  SplitMix64 traffic_rng_;
  SplitMix64 mcs_rng_;
  SimStats stats_;
};

}  // namespace ngkit
