#include <doctest.h>

#include <cmath>
#include <map>

#include "ngkit/capacity.hpp"
#include "ngkit/decoder.hpp"
#include "ngkit/rng.hpp"
#include "ngkit/sim.hpp"
#include "ngkit/tracker.hpp"

using namespace ngkit;

namespace {

DciMessage msg_of(uint16_t rnti, unsigned prb, uint32_t tbs, bool ndi = true) {
  DciMessage m;
  m.rnti = rnti;
  m.nof_prb = static_cast<uint8_t>(prb);
  m.tbs = tbs;
  m.ndi = ndi;
  return m;
}

}  // namespace

TEST_SUITE("capacity") {
  TEST_CASE("direct formula: available PRBs times bits per PRB") {
    CellConfig cell = CellConfig::for_bandwidth(1, 20);
    CapacityEstimator est(cell, 0x1000);
    std::vector<DciMessage> msgs = {msg_of(0x1000, 20, 10000),
                                    msg_of(0x2000, 30, 12000)};
    auto s = est.step(0, msgs);
    CHECK(s.target_prb == 20);
    CHECK(s.other_prb == 30);
    CHECK(s.idle_prb == 50);
    CHECK(s.bits_per_prb == doctest::Approx(500.0));
    CHECK(s.capacity_bits == doctest::Approx(70 * 500.0));  // 35 Mbit/s
    CHECK(!s.provisional);
    CHECK(s.target_prb + s.other_prb + s.idle_prb == cell.n_prb);
  }

  TEST_CASE("idle cell holds the last known bits-per-PRB") {
    CellConfig cell = CellConfig::for_bandwidth(1, 20);
    CapacityEstimator est(cell, 0x1000);
    est.step(0, std::vector<DciMessage>{msg_of(0x1000, 20, 10000)});
    auto s = est.step(1, std::vector<DciMessage>{});
    CHECK(s.idle_prb == 100);
    CHECK(s.bits_per_prb == doctest::Approx(500.0));
    CHECK(s.capacity_bits == doctest::Approx(100 * 500.0));
  }

  TEST_CASE("unseen target yields a provisional default") {
    CellConfig cell = CellConfig::for_bandwidth(1, 20);
    CapacityConfig cc;
    cc.default_bits_per_prb = 321.0;
    CapacityEstimator est(cell, 0x1000, cc);
    auto s = est.step(0, std::vector<DciMessage>{msg_of(0x2000, 10, 4000)});
    CHECK(s.provisional);
    CHECK(s.bits_per_prb == doctest::Approx(321.0));
  }

  TEST_CASE("retransmissions count as cell usage, not target capacity") {
    CellConfig cell = CellConfig::for_bandwidth(1, 20);
    CapacityEstimator est(cell, 0x1000);
    est.step(0, std::vector<DciMessage>{msg_of(0x1000, 20, 10000)});
    // the target's own retransmission occupies PRBs but is not goodput
    std::vector<DciMessage> msgs = {msg_of(0x1000, 20, 10000, false)};
    auto s = est.step(1, msgs);
    CHECK(s.target_prb == 0);
    CHECK(s.other_prb == 20);
    CHECK(s.idle_prb == 80);
    CHECK(s.capacity_bits == doctest::Approx(80 * 500.0));
  }

  TEST_CASE("stale bits-per-PRB decays toward the cell median") {
    CellConfig cell = CellConfig::for_bandwidth(1, 20);
    CapacityEstimator est(cell, 0x1000);
    est.step(0, std::vector<DciMessage>{msg_of(0x1000, 10, 8000)});  // 800
    // other users keep the cell median around 300 while the target idles
    CapacitySample last{};
    for (uint64_t sfn = 1; sfn <= 4000; ++sfn)
      last = est.step(sfn, std::vector<DciMessage>{msg_of(0x2000, 10, 3000)});
    CHECK(last.bits_per_prb > 299.0);
    CHECK(last.bits_per_prb < 360.0);  // mostly decayed from 800 toward 300
  }

  TEST_CASE("utilization is the allocated fraction") {
    CellConfig cell = CellConfig::for_bandwidth(1, 20);
    CapacityEstimator est(cell, 0x1000);
    auto empty = est.step(0, std::vector<DciMessage>{});
    CHECK(cell_utilization(empty, cell) == doctest::Approx(0.0));
    auto s = est.step(1, std::vector<DciMessage>{msg_of(0x2000, 60, 9000)});
    CHECK(cell_utilization(s, cell) == doctest::Approx(0.6));
    auto full = est.step(2, std::vector<DciMessage>{msg_of(0x2000, 100, 9000)});
    CHECK(cell_utilization(full, cell) == doctest::Approx(1.0));
  }
}

TEST_SUITE("smoothing") {
  TEST_CASE("window of one is the identity") {
    CapacitySmoother sm(1);
    CapacitySample s;
    s.target_prb = 20;
    s.idle_prb = 30;
    s.bits_per_prb = 400;
    auto out = sm.push(s);
    CHECK(out.capacity_bits == doctest::Approx(50 * 400.0));
  }

  TEST_CASE("constant input passes through unchanged") {
    CapacitySmoother sm(100);
    CapacitySample s;
    s.target_prb = 10;
    s.idle_prb = 40;
    s.bits_per_prb = 200;
    SmoothedCapacity out{};
    for (int i = 0; i < 300; ++i) out = sm.push(s);
    CHECK(out.capacity_bits == doctest::Approx(50 * 200.0));
  }

  TEST_CASE("a step settles within one window, following the sliding mean") {
    const unsigned W = 50;
    CapacitySmoother sm(W);
    CapacitySample lo;
    lo.idle_prb = 20;
    lo.bits_per_prb = 100;
    CapacitySample hi;
    hi.idle_prb = 80;
    hi.bits_per_prb = 100;
    for (unsigned i = 0; i < W; ++i) sm.push(lo);
    SmoothedCapacity out{};
    for (unsigned k = 1; k <= W; ++k) {
      out = sm.push(hi);
      // closed form: mean avail = (20*(W-k) + 80*k)/W
      double want_avail = (20.0 * (W - k) + 80.0 * k) / W;
      CHECK(out.avail_prb_mean == doctest::Approx(want_avail));
    }
    CHECK(out.capacity_bits == doctest::Approx(80 * 100.0));
  }
}

TEST_SUITE("aggregation") {
  TEST_CASE("single cell is the identity") {
    CaAggregator agg({1});
    SmoothedCapacity s;
    s.cell_id = 1;
    s.capacity_bits = 35000;
    agg.push(1, s);
    auto a = agg.emit(0);
    CHECK(a.capacity_bits == doctest::Approx(35000));
    CHECK(a.stale_cells == 0);
  }

  TEST_CASE("two cells sum; 35 + 20 Mbit/s gives 55") {
    CaAggregator agg({1, 2});
    SmoothedCapacity a;
    a.cell_id = 1;
    a.capacity_bits = 35000;
    SmoothedCapacity b;
    b.cell_id = 2;
    b.capacity_bits = 20000;
    agg.push(1, a);
    agg.push(2, b);
    auto out = agg.emit(0);
    CHECK(out.capacity_bits == doctest::Approx(55000));
  }

  TEST_CASE("a missing cell holds its last value and is flagged stale") {
    CaAggregator agg({1, 2});
    SmoothedCapacity a;
    a.cell_id = 1;
    a.capacity_bits = 30000;
    SmoothedCapacity b;
    b.cell_id = 2;
    b.capacity_bits = 10000;
    agg.push(1, a);
    agg.push(2, b);
    agg.emit(0);
    agg.push(1, a);  // cell 2 silent this subframe
    auto out = agg.emit(1);
    CHECK(out.capacity_bits == doctest::Approx(40000));
    CHECK(out.stale_cells == 1);
  }
}

TEST_SUITE("capacity_oracle") {
  TEST_CASE("decoded-log capacity equals ground-truth capacity bit-exactly") {
    SimScenario sc;
    sc.cells.push_back(CellConfig::for_bandwidth(1, 20));
    for (unsigned u = 0; u < 3; ++u) {
      UeProfile ue;
      ue.rnti = static_cast<uint16_t>(0x4600 + 211 * u);
      ue.ca_cells = {1};
      ue.traffic.rate_bps = 7e6;
      sc.ues.push_back(ue);
    }
    sc.snr_db = 30.0;
    sc.seed = 99;
    Simulator sim(sc);
    UeTracker tracker(1);
    CapacityEstimator est_truth(sc.cells[0], sc.ues[0].rnti);
    CapacityEstimator est_decoded(sc.cells[0], sc.ues[0].rnti);
    unsigned compared = 0;
    // per-sfn decoded sets, patched by late tracker releases
    std::map<uint64_t, std::vector<DciMessage>> decoded_by_sfn;
    std::vector<SubframeTruth> truths;
    const uint64_t n = 400;
    for (uint64_t sfn = 0; sfn < n; ++sfn) {
      auto out = sim.step(sfn);
      truths.push_back(out.truths[0]);
      auto snap = tracker.snapshot(sfn);
      auto hints = snap.hints();
      auto report = decode_subframe(out.subframes[0], sc.cells[0],
                                    std::span<const ActiveUeHint>(hints));
      auto res = tracker.observe(report, sfn);
      for (const auto& v : report.validated)
        decoded_by_sfn[sfn].push_back(v.msg);
      for (const auto& m : res.validated) decoded_by_sfn[m.sfn].push_back(m);
    }
    // verify zero decode loss past the tracker warm-up window, in which a
    // first appearance can fall out of the 16-subframe ring before the
    // promotion count is reached
    const uint64_t warmup = 32;
    unsigned missing = 0;
    for (const auto& t : truths) {
      if (t.sfn < warmup) continue;
      for (const auto& tm : t.messages) {
        bool hit = false;
        for (const auto& dm : decoded_by_sfn[t.sfn])
          hit = hit || dm.same_content(tm);
        missing += !hit;
      }
    }
    REQUIRE(missing == 0);
    for (const auto& t : truths) {
      if (t.sfn < warmup) continue;
      auto& dec = decoded_by_sfn[t.sfn];
      std::sort(dec.begin(), dec.end(),
                [](const DciMessage& a, const DciMessage& b) {
                  return a.cce_start < b.cce_start;
                });
      auto st = est_truth.step(t.sfn, t.messages);
      auto sd = est_decoded.step(t.sfn, dec);
      CHECK(st.capacity_bits == sd.capacity_bits);  // bit-exact
      CHECK(st.target_prb == sd.target_prb);
      CHECK(st.idle_prb == sd.idle_prb);
      ++compared;
    }
    CHECK(compared == n - warmup);
  }

  TEST_CASE("dropping foreign messages never lowers estimated capacity") {
    // lost allocations count as idle; with the target's own reports intact
    // the estimate is pointwise monotone in message loss
    SimScenario sc;
    sc.cells.push_back(CellConfig::for_bandwidth(1, 20));
    for (unsigned u = 0; u < 4; ++u) {
      UeProfile ue;
      ue.rnti = static_cast<uint16_t>(0x5200 + 173 * u);
      ue.ca_cells = {1};
      ue.traffic.rate_bps = 8e6;
      ue.mcs_walk = {14, 14, 14, 0.0, 0};
      sc.ues.push_back(ue);
    }
    sc.seed = 7;
    Simulator sim(sc);
    CapacityEstimator full(sc.cells[0], sc.ues[0].rnti);
    CapacityEstimator degraded(sc.cells[0], sc.ues[0].rnti);
    SplitMix64 drop_rng(31337);
    for (uint64_t sfn = 0; sfn < 500; ++sfn) {
      auto out = sim.step(sfn);
      std::vector<DciMessage> kept;
      for (const auto& m : out.truths[0].messages)
        if (m.rnti == sc.ues[0].rnti || !drop_rng.bernoulli(0.5))
          kept.push_back(m);
      auto sf = full.step(sfn, out.truths[0].messages);
      auto sd = degraded.step(sfn, kept);
      CHECK(sd.capacity_bits >= sf.capacity_bits - 1e-9);
    }
  }
}
