#include <doctest.h>

#include "ngkit/fusion.hpp"
#include "ngkit/sim.hpp"

using namespace ngkit;

namespace {

// scenario with injected TB failures for one target user
std::vector<SubframeTruth> failing_run(double ber, uint64_t seed,
                                       uint64_t duration,
                                       uint16_t* rnti_out = nullptr) {
  SimScenario sc;
  sc.cells.push_back(CellConfig::for_bandwidth(1, 20));
  UeProfile ue;
  ue.rnti = 0x3101;
  ue.ca_cells = {1};
  ue.traffic.rate_bps = 12e6;
  ue.mcs_walk = {12, 12, 12, 0.0, 0};
  sc.ues.push_back(ue);
  sc.ber = ber;
  sc.seed = seed;
  Simulator sim(sc);
  std::vector<SubframeTruth> truths;
  for (uint64_t sfn = 0; sfn < duration; ++sfn)
    truths.push_back(sim.step(sfn).truths[0]);
  if (rnti_out) *rnti_out = ue.rnti;
  return truths;
}

std::vector<DciMessage> messages_of(std::span<const SubframeTruth> truths,
                                    uint16_t rnti) {
  std::vector<DciMessage> out;
  for (const auto& t : truths)
    for (const auto& m : t.messages)
      if (m.rnti == rnti) out.push_back(m);
  return out;
}

}  // namespace

TEST_SUITE("packet_synth") {
  TEST_CASE("error-free run delivers uniformly, no retx signatures") {
    auto truths = failing_run(0.0, 11, 1500);
    PacketLogParams p;
    p.rnti = 0x3101;
    auto log = synth_packet_log(truths, p);
    REQUIRE(log.size() > 100);
    CHECK(detect_retx_from_log(log).empty());
    for (size_t i = 1; i < log.size(); ++i)
      CHECK(log[i].recv_time_us >= log[i - 1].recv_time_us);
  }

  TEST_CASE("a failed block holds later packets and flushes as a burst") {
    auto truths = failing_run(4e-6, 23, 4000);
    auto msgs = messages_of(truths, 0x3101);
    auto retx = detect_retx_from_msgs(msgs);
    REQUIRE(retx.size() >= 3);  // the config must exercise HARQ

    PacketLogParams p;
    p.rnti = 0x3101;
    auto log = synth_packet_log(truths, p);
    auto log_events = detect_retx_from_log(log);
    REQUIRE(!log_events.empty());
    // every log-side burst lands on some message-side retx subframe,
    // shifted by the propagation delay baked into the receive clock
    const int64_t owd_ms = p.base_owd_us / 1000;
    for (const auto& le : log_events) {
      bool matched = false;
      for (const auto& me : retx)
        matched = matched || std::llabs(le.time_ms - owd_ms - me.time_ms) <= 1;
      CHECK(matched);
    }
  }
}

TEST_SUITE("retx_detection") {
  TEST_CASE("uniform arrivals produce no events") {
    std::vector<PacketRecord> log;
    for (int i = 0; i < 100; ++i)
      log.push_back({i * 1000, 1400, 20000, static_cast<uint64_t>(i)});
    CHECK(detect_retx_from_log(log).empty());
  }

  TEST_CASE("an 8 ms gap followed by a single packet is not an event") {
    std::vector<PacketRecord> log;
    int64_t t = 0;
    for (int i = 0; i < 10; ++i) log.push_back({t += 1000, 1400, 0, 0});
    t += 9000;  // gap, then one lonely packet, then uniform spacing resumes
    log.push_back({t, 1400, 0, 0});
    for (int i = 0; i < 10; ++i) log.push_back({t += 2000, 1400, 0, 0});
    CHECK(detect_retx_from_log(log).empty());
  }

  TEST_CASE("gap plus burst is an event") {
    std::vector<PacketRecord> log;
    int64_t t = 0;
    for (int i = 0; i < 10; ++i) log.push_back({t += 1000, 1400, 0, 0});
    t += 9000;
    log.push_back({t, 1400, 0, 0});
    log.push_back({t + 300, 1400, 0, 0});
    log.push_back({t + 600, 1400, 0, 0});
    auto ev = detect_retx_from_log(log);
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].burst_packets == 3);
    CHECK(ev[0].time_ms == t / 1000);
  }

  TEST_CASE("message-side events mirror ndi=false rows") {
    std::vector<DciMessage> msgs;
    DciMessage m;
    m.rnti = 0x42;
    m.sfn = 100;
    m.ndi = true;
    msgs.push_back(m);
    CHECK(detect_retx_from_msgs(msgs).empty());
    m.sfn = 108;
    m.ndi = false;
    m.harq = 3;
    msgs.push_back(m);
    auto ev = detect_retx_from_msgs(msgs);
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].time_ms == 108);
    CHECK(ev[0].start_ms == 100);
    CHECK(ev[0].harq == 3);
  }
}

TEST_SUITE("alignment") {
  TEST_CASE("recovers injected offsets exactly across the range") {
    uint16_t rnti;
    auto truths = failing_run(4e-6, 31, 4000, &rnti);
    auto msgs = messages_of(truths, rnti);
    auto msg_events = detect_retx_from_msgs(msgs);
    REQUIRE(msg_events.size() >= 3);
    for (int inject : {-50, -17, 0, 7, 50}) {
      PacketLogParams p;
      p.rnti = rnti;
      p.base_owd_us = 0;  // isolate the clock offset
      p.clock_offset_ms = inject;
      auto log = synth_packet_log(truths, p);
      auto log_events = detect_retx_from_log(log);
      REQUIRE(!log_events.empty());
      auto res = align(log_events, msg_events);
      REQUIRE(res.has_value());
      CHECK(res->offset_ms == inject);
    }
  }

  TEST_CASE("shifting the log shifts the answer (symmetry)") {
    uint16_t rnti;
    auto truths = failing_run(4e-6, 37, 4000, &rnti);
    auto msg_events = detect_retx_from_msgs(messages_of(truths, rnti));
    PacketLogParams p;
    p.rnti = rnti;
    auto base_log = synth_packet_log(truths, p);
    auto base = align(detect_retx_from_log(base_log), msg_events);
    REQUIRE(base.has_value());
    p.clock_offset_ms = 13;
    auto shifted = align(detect_retx_from_log(synth_packet_log(truths, p)),
                         msg_events);
    REQUIRE(shifted.has_value());
    CHECK(shifted->offset_ms == base->offset_ms + 13);
  }

  TEST_CASE("no events on either side reports alignment unavailable") {
    std::vector<RetxEvent> none;
    RetxEvent one;
    one.time_ms = 5;
    CHECK(!align(none, std::span(&one, 1)).has_value());
    CHECK(!align(std::span(&one, 1), none).has_value());
  }

  TEST_CASE("a single matching event pair returns that offset") {
    RetxEvent le;
    le.time_ms = 112;
    RetxEvent me;
    me.time_ms = 100;
    auto res = align(std::span(&le, 1), std::span(&me, 1), 500);
    REQUIRE(res.has_value());
    CHECK(res->offset_ms == 12);
    CHECK(res->matched == 1);
  }
}

TEST_SUITE("association") {
  TEST_CASE("the user with matching retransmissions wins with margin") {
    SimScenario sc;
    sc.cells.push_back(CellConfig::for_bandwidth(1, 20));
    for (uint16_t r : {0x3201, 0x3202}) {
      UeProfile ue;
      ue.rnti = r;
      ue.ca_cells = {1};
      ue.traffic.rate_bps = 10e6;
      ue.mcs_walk = {12, 12, 12, 0.0, 0};
      sc.ues.push_back(ue);
    }
    sc.ber = 4e-6;
    sc.seed = 53;
    Simulator sim(sc);
    std::vector<SubframeTruth> truths;
    for (uint64_t sfn = 0; sfn < 5000; ++sfn)
      truths.push_back(sim.step(sfn).truths[0]);

    PacketLogParams p;
    p.rnti = 0x3201;
    p.base_owd_us = 0;
    p.clock_offset_ms = 4;
    auto log = synth_packet_log(truths, p);

    std::vector<RntiMessageStream> streams;
    streams.push_back({0x3201, messages_of(truths, 0x3201)});
    streams.push_back({0x3202, messages_of(truths, 0x3202)});
    auto res = associate_rnti(log, streams);
    REQUIRE(res.has_value());
    CHECK(res->rnti == 0x3201);
    CHECK(res->margin >= 1);
    CHECK(!res->ambiguous);
    CHECK(res->offset_ms == 4);
  }

  TEST_CASE("a single candidate is returned trivially") {
    uint16_t rnti;
    auto truths = failing_run(4e-6, 59, 3000, &rnti);
    PacketLogParams p;
    p.rnti = rnti;
    auto log = synth_packet_log(truths, p);
    std::vector<RntiMessageStream> streams;
    streams.push_back({rnti, messages_of(truths, rnti)});
    auto res = associate_rnti(log, streams);
    REQUIRE(res.has_value());
    CHECK(res->rnti == rnti);
  }

  TEST_CASE("identical patterns raise the ambiguity flag") {
    uint16_t rnti;
    auto truths = failing_run(4e-6, 61, 3000, &rnti);
    PacketLogParams p;
    p.rnti = rnti;
    auto log = synth_packet_log(truths, p);
    auto msgs = messages_of(truths, rnti);
    std::vector<RntiMessageStream> streams;
    streams.push_back({rnti, msgs});
    for (auto& m : msgs) m.rnti = 0x0999;  // clone with a different ID
    streams.push_back({0x0999, msgs});
    auto res = associate_rnti(log, streams);
    REQUIRE(res.has_value());
    CHECK(res->ambiguous);
    CHECK(res->margin == 0);
  }
}
