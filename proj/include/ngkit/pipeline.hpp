#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "ngkit/decoder.hpp"
#include "ngkit/tracker.hpp"

namespace ngkit {

struct WorkerConfig {
  unsigned pool_size = 0;  // 0 = available execution units, capped at 8
  unsigned queue_depth = 64;
  unsigned snapshot_period_ms = 10;
  unsigned history_subframes = 320;
  DecoderConfig decoder;
  TrackerConfig tracker;
  // test hook: invoked inside the decode task before decoding
  std::function<void(uint64_t)> pre_decode_hook;
};

struct FinalReport {
  uint64_t sfn = 0;
  uint32_t cell_id = 0;
  // decoder- and tracker-validated messages; releases from the candidate
  // ring keep their original msg.sfn and may surface a few reports late
  std::vector<ValidatedMessage> messages;
  unsigned attempts = 0;
  unsigned pruned_cces = 0;
};

// Per-cell worker: an inbound subframe queue, a decoder pool, in-order
// result assembly through the UE tracker, a bounded history ring and
// periodic snapshot publication.
//
// Subframes are decoded in windows of one snapshot period. Within a
// window every decode uses the same published snapshot, so the output is
// identical for any pool size and any completion interleaving; the
// tracker itself is single-writer, fed strictly in subframe order.
class CellWorker {
public:
  CellWorker(const CellConfig& cell, WorkerConfig cfg = {})
      : cell_(cell), cfg_(cfg), tracker_(cell.cell_id, cfg.tracker) {
    if (cfg_.pool_size == 0) {
      unsigned hw = std::thread::hardware_concurrency();
      cfg_.pool_size = std::min(hw ? hw : 1u, 8u);
    }
    if (cfg_.snapshot_period_ms == 0) cfg_.snapshot_period_ms = 1;
    snapshot_ = tracker_.snapshot(0);
  }

  enum class Submit : uint8_t { kAccepted, kBackpressure };

  // Subframes must arrive in strictly increasing sfn order.
  Submit submit(LlrSubframe sub) {
    if (has_last_ && sub.sfn <= last_sfn_)
      throw std::invalid_argument("submit: sfn must increase strictly");
    if (inbound_.size() >= cfg_.queue_depth) return Submit::kBackpressure;
    last_sfn_ = sub.sfn;
    has_last_ = true;
    inbound_.push_back(std::move(sub));
    process_full_windows();
    return Submit::kAccepted;
  }

  // Process everything still queued, including a trailing partial window.
  void flush() {
    process_full_windows();
    if (!inbound_.empty()) process_window(inbound_.size());
  }

  // Contiguous completed reports up to and including up_to_sfn.
  std::vector<FinalReport> drain_ordered(uint64_t up_to_sfn) {
    std::vector<FinalReport> out;
    while (!assembled_.empty() && assembled_.front().sfn <= up_to_sfn) {
      out.push_back(std::move(assembled_.front()));
      assembled_.pop_front();
    }
    return out;
  }

  const std::deque<FinalReport>& history() const { return history_; }
  const TrackerSnapshot& snapshot() const { return snapshot_; }
  const UeTracker& tracker() const { return tracker_; }
  std::vector<TrackerEvent> take_events() { return std::move(events_); }
  uint64_t decoded_subframes() const { return decoded_; }

private:
  void process_full_windows() {
    while (!inbound_.empty()) {
      // a window ends at the next multiple of the snapshot period
      uint64_t first = inbound_.front().sfn;
      uint64_t window_end =
          (first / cfg_.snapshot_period_ms + 1) * cfg_.snapshot_period_ms;
      size_t count = 0;
      while (count < inbound_.size() && inbound_[count].sfn < window_end)
        ++count;
      // only run a complete window; the tail waits for more subframes
      if (count == inbound_.size() &&
          (inbound_.back().sfn + 1) % cfg_.snapshot_period_ms != 0)
        break;
      process_window(count);
    }
  }

  void process_window(size_t count) {
    if (count == 0) return;
    std::vector<LlrSubframe> batch(
        std::make_move_iterator(inbound_.begin()),
        std::make_move_iterator(inbound_.begin() + static_cast<long>(count)));
    inbound_.erase(inbound_.begin(), inbound_.begin() + static_cast<long>(count));

    std::vector<ActiveUeHint> hints = snapshot_.hints();
    std::vector<DecodeReport> reports(batch.size());

    auto task = [&](size_t i) {
      if (cfg_.pre_decode_hook) cfg_.pre_decode_hook(batch[i].sfn);
      reports[i] = decode_subframe(batch[i], cell_,
                                   std::span<const ActiveUeHint>(hints),
                                   cfg_.decoder);
    };
    if (cfg_.pool_size <= 1 || batch.size() <= 1) {
      for (size_t i = 0; i < batch.size(); ++i) task(i);
    } else {
      std::atomic<size_t> next{0};
      auto body = [&] {
        for (size_t i = next.fetch_add(1); i < batch.size();
             i = next.fetch_add(1))
          task(i);
      };
      std::vector<std::thread> pool;
      unsigned n = std::min<unsigned>(cfg_.pool_size,
                                      static_cast<unsigned>(batch.size()));
      pool.reserve(n);
      for (unsigned t = 0; t < n; ++t) pool.emplace_back(body);
      for (auto& th : pool) th.join();
    }

    // assemble strictly in subframe order
    for (size_t i = 0; i < batch.size(); ++i) {
      const uint64_t sfn = batch[i].sfn;
      FinalReport fr;
      fr.sfn = sfn;
      fr.cell_id = cell_.cell_id;
      fr.attempts = reports[i].attempts;
      fr.pruned_cces = reports[i].pruned_cces;
      fr.messages = reports[i].validated;
      auto res = tracker_.observe(reports[i], sfn);
      for (auto& m : res.validated)
        fr.messages.push_back({m, 0.0, ValidatedBy::kTracker});
      for (auto& e : res.events) events_.push_back(e);
      tracker_.expire(sfn, &events_);
      assembled_.push_back(std::move(fr));
      history_.push_back(assembled_.back());
      while (history_.size() > cfg_.history_subframes) history_.pop_front();
      ++decoded_;
    }
    snapshot_ = tracker_.snapshot(batch.back().sfn + 1);
  }

  CellConfig cell_;
  WorkerConfig cfg_;
  UeTracker tracker_;
  TrackerSnapshot snapshot_;
  std::deque<LlrSubframe> inbound_;
  std::deque<FinalReport> assembled_;
  std::deque<FinalReport> history_;
  std::vector<TrackerEvent> events_;
  uint64_t last_sfn_ = 0;
  bool has_last_ = false;
  uint64_t decoded_ = 0;
};

// Lockstep driver for several cells with snapshot exchange for carrier
// aggregation detection.
class MultiCellPipeline {
public:
  MultiCellPipeline(std::vector<CellConfig> cells, WorkerConfig cfg = {}) {
    for (const auto& c : cells) workers_.emplace_back(c, cfg);
    min_rate_ = cfg.tracker.ca_min_rate_bps;
  }

  std::vector<CellWorker>& workers() { return workers_; }

  // feed one subframe per cell (same sfn), then refresh the CA view
  void submit_all(std::vector<LlrSubframe> subs) {
    for (size_t i = 0; i < workers_.size(); ++i)
      workers_[i].submit(std::move(subs[i]));
    refresh_ca();
  }

  void flush() {
    for (auto& w : workers_) w.flush();
    refresh_ca();
  }

  const CaMap& ca_map() const { return ca_map_; }

private:
  void refresh_ca() {
    std::vector<TrackerSnapshot> snaps;
    snaps.reserve(workers_.size());
    for (auto& w : workers_) snaps.push_back(w.snapshot());
    ca_map_ = ca_intersect(snaps, min_rate_);
  }

  std::vector<CellWorker> workers_;
  CaMap ca_map_;
  double min_rate_ = 3e6;
};

}  // namespace ngkit
