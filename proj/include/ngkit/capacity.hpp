#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "ngkit/cell.hpp"

namespace ngkit {

struct CapacitySample {
  uint64_t sfn = 0;
  uint32_t cell_id = 0;
  unsigned target_prb = 0;  // new-data PRBs granted to the target
  unsigned other_prb = 0;   // other users' PRBs plus all retransmissions
  unsigned idle_prb = 0;
  double bits_per_prb = 0.0;
  double capacity_bits = 0.0;  // per millisecond
  bool provisional = false;    // bits_per_prb never observed yet

  unsigned available_prb() const { return target_prb + idle_prb; }
};

struct CapacityConfig {
  double default_bits_per_prb = 200.0;  // used until the target is seen
  uint64_t bpp_hold_ms = 1000;   // hold the last value this long...
  double bpp_decay_tau_ms = 1000.0;  // ...then decay toward the cell median
  unsigned median_window_ms = 1000;
};

// Converts one subframe's validated messages into the target user's
// available capacity: (own new-data PRBs + idle PRBs) times the bits one
// PRB currently carries for this user. Retransmitted blocks occupy the
// cell but deliver no new data, so they count as other traffic.
class CapacityEstimator {
public:
  CapacityEstimator(const CellConfig& cell, uint16_t target_rnti,
                    CapacityConfig cfg = {})
      : cell_(cell), target_(target_rnti), cfg_(cfg) {}

  const CellConfig& cell() const { return cell_; }

  CapacitySample step(uint64_t sfn, std::span<const DciMessage> msgs) {
    CapacitySample s;
    s.sfn = sfn;
    s.cell_id = cell_.cell_id;

    uint64_t target_bits = 0;
    for (const DciMessage& m : msgs) {
      if (m.rnti == target_ && m.ndi) {
        s.target_prb += m.nof_prb;
        target_bits += m.tbs;
      } else {
        s.other_prb += m.nof_prb;
      }
      if (m.ndi && m.nof_prb > 0) {
        cell_bpps_.push_back(
            {sfn, static_cast<double>(m.tbs) / m.nof_prb});
      }
    }
    while (!cell_bpps_.empty() &&
           cell_bpps_.front().first + cfg_.median_window_ms <= sfn)
      cell_bpps_.pop_front();

    unsigned used = s.target_prb + s.other_prb;
    s.idle_prb = used <= cell_.n_prb ? cell_.n_prb - used : 0;

    if (s.target_prb > 0) {
      last_bpp_ = static_cast<double>(target_bits) / s.target_prb;
      last_bpp_sfn_ = sfn;
    }
    s.bits_per_prb = current_bpp(sfn, s.provisional);
    s.capacity_bits = s.available_prb() * s.bits_per_prb;
    return s;
  }

private:
  double cell_median_bpp() const {
    if (cell_bpps_.empty()) return 0.0;
    std::vector<double> v;
    v.reserve(cell_bpps_.size());
    for (auto& [sfn, bpp] : cell_bpps_) v.push_back(bpp);
    auto mid = v.begin() + static_cast<long>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
  }

  double current_bpp(uint64_t sfn, bool& provisional) {
    if (!last_bpp_) {
      provisional = true;
      return cfg_.default_bits_per_prb;
    }
    uint64_t age = sfn - last_bpp_sfn_;
    if (age <= cfg_.bpp_hold_ms) return *last_bpp_;
    double median = cell_median_bpp();
    if (median <= 0.0) return *last_bpp_;
    double w = std::exp(-static_cast<double>(age - cfg_.bpp_hold_ms) /
                        cfg_.bpp_decay_tau_ms);
    return median + (*last_bpp_ - median) * w;
  }

  CellConfig cell_;
  uint16_t target_;
  CapacityConfig cfg_;
  std::optional<double> last_bpp_;
  uint64_t last_bpp_sfn_ = 0;
  std::deque<std::pair<uint64_t, double>> cell_bpps_;
};

// ---------------------------------------------------------------------------
// Smoothing: sliding-window means of available PRBs and bits-per-PRB,
// multiplied. One output per input subframe.

struct SmoothedCapacity {
  uint64_t sfn = 0;
  uint32_t cell_id = 0;
  double avail_prb_mean = 0.0;
  double bits_per_prb_mean = 0.0;
  double capacity_bits = 0.0;  // per millisecond
};

class CapacitySmoother {
public:
  explicit CapacitySmoother(unsigned window = 100) : window_(window) {
    if (window_ == 0) window_ = 1;
  }

  SmoothedCapacity push(const CapacitySample& s) {
    entries_.push_back({static_cast<double>(s.available_prb()),
                        s.bits_per_prb});
    avail_sum_ += entries_.back().first;
    bpp_sum_ += entries_.back().second;
    if (entries_.size() > window_) {
      avail_sum_ -= entries_.front().first;
      bpp_sum_ -= entries_.front().second;
      entries_.pop_front();
    }
    SmoothedCapacity out;
    out.sfn = s.sfn;
    out.cell_id = s.cell_id;
    out.avail_prb_mean = avail_sum_ / static_cast<double>(entries_.size());
    out.bits_per_prb_mean = bpp_sum_ / static_cast<double>(entries_.size());
    out.capacity_bits = out.avail_prb_mean * out.bits_per_prb_mean;
    return out;
  }

private:
  unsigned window_;
  std::deque<std::pair<double, double>> entries_;
  double avail_sum_ = 0.0;
  double bpp_sum_ = 0.0;
};

// ---------------------------------------------------------------------------
// Carrier aggregation: per-millisecond sum over the target's aggregated
// cells. A cell missing its sample at some subframe contributes its last
// smoothed value; the staleness count is reported.

struct AggregatedCapacity {
  uint64_t sfn = 0;
  double capacity_bits = 0.0;
  unsigned stale_cells = 0;
};

class CaAggregator {
public:
  explicit CaAggregator(std::vector<uint32_t> cells)
      : cells_(std::move(cells)),
        last_(cells_.size(), 0.0),
        seen_(cells_.size(), false),
        fresh_(cells_.size(), false) {}

  void push(uint32_t cell_id, const SmoothedCapacity& s) {
    for (size_t i = 0; i < cells_.size(); ++i) {
      if (cells_[i] == cell_id) {
        last_[i] = s.capacity_bits;
        seen_[i] = true;
        fresh_[i] = true;
      }
    }
  }

  // Call once per subframe after pushing that subframe's samples.
  AggregatedCapacity emit(uint64_t sfn) {
    AggregatedCapacity out;
    out.sfn = sfn;
    for (size_t i = 0; i < cells_.size(); ++i) {
      out.capacity_bits += last_[i];
      if (!fresh_[i] && seen_[i]) ++out.stale_cells;
      fresh_[i] = false;
    }
    return out;
  }

private:
  std::vector<uint32_t> cells_;
  std::vector<double> last_;
  std::vector<bool> seen_;
  std::vector<bool> fresh_;
};

inline double cell_utilization(const CapacitySample& s, const CellConfig& c) {
  return static_cast<double>(c.n_prb - s.idle_prb) / c.n_prb;
}

}  // namespace ngkit
