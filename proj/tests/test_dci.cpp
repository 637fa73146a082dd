#include <doctest.h>

#include "ngkit/dci.hpp"
#include "ngkit/rng.hpp"

using namespace ngkit;

namespace {

DciMessage random_message(SplitMix64& rng, FormatId f) {
  DciMessage m;
  m.format = f;
  m.rnti = static_cast<uint16_t>(0x003D + rng.below(60000));
  if (f == FormatId::kC) {
    m.nof_prb = kCompactPrbTable[rng.below(16)];
    m.mcs1 = static_cast<uint8_t>(4 * rng.below(8));
    m.harq = 0;
    m.alloc_start = 0;
  } else {
    m.nof_prb = static_cast<uint8_t>(1 + rng.below(100));
    m.alloc_start = static_cast<uint8_t>(rng.below(100));
    m.mcs1 = static_cast<uint8_t>(rng.below(29));
    m.harq = static_cast<uint8_t>(rng.below(8));
    if (f == FormatId::kB) {
      m.mcs2 = static_cast<uint8_t>(rng.below(29));
      m.swap_streams = rng.bernoulli(0.5);
    }
  }
  m.ndi = rng.bernoulli(0.5);
  refresh_tbs(m);
  return m;
}

}  // namespace

TEST_SUITE("dci") {
  TEST_CASE("format lengths are distinct and as documented") {
    CHECK(format_spec(FormatId::kA).payload_bits == 24);
    CHECK(format_spec(FormatId::kB).payload_bits == 32);
    CHECK(format_spec(FormatId::kC).payload_bits == 8);
    // compact format fits exactly one CCE after coding
    CHECK(3 * (format_spec(FormatId::kC).payload_bits + 16) == 72);
  }

  TEST_CASE("all-zero message packs to all-zero bits") {
    DciMessage m;
    m.format = FormatId::kA;
    m.nof_prb = 0;
    m.mcs1 = 0;
    m.harq = 0;
    m.ndi = false;
    auto bits = build_dci_payload(m);
    REQUIRE(bits.size() == 24);
    for (uint8_t b : bits) CHECK(b == 0);
  }

  TEST_CASE("packing round-trips every carried field") {
    SplitMix64 rng(90);
    for (auto f : {FormatId::kA, FormatId::kB, FormatId::kC}) {
      for (int t = 0; t < 200; ++t) {
        DciMessage m = random_message(rng, f);
        DciMessage back = parse_dci_payload(build_dci_payload(m), f);
        CHECK(back.nof_prb == m.nof_prb);
        CHECK(back.mcs1 == m.mcs1);
        CHECK(back.mcs2 == m.mcs2);
        CHECK(back.ndi == m.ndi);
        CHECK(back.harq == m.harq);
        CHECK(back.alloc_start == m.alloc_start);
        CHECK(back.tbs == m.tbs);
      }
    }
  }

  TEST_CASE("flipping ndi changes exactly the ndi bit") {
    SplitMix64 rng(91);
    for (auto f : {FormatId::kA, FormatId::kB, FormatId::kC}) {
      DciMessage m = random_message(rng, f);
      DciMessage n = m;
      n.ndi = !m.ndi;
      auto a = build_dci_payload(m);
      auto b = build_dci_payload(n);
      unsigned diff = 0;
      for (size_t i = 0; i < a.size(); ++i) diff += a[i] != b[i];
      CHECK(diff == 1);
    }
  }

  TEST_CASE("field overflow is rejected") {
    DciMessage m;
    m.format = FormatId::kA;
    m.mcs1 = 29;
    CHECK_THROWS(build_dci_payload(m));
    m.mcs1 = 5;
    m.nof_prb = 111;
    CHECK_THROWS(build_dci_payload(m));
    DciMessage c;
    c.format = FormatId::kC;
    c.nof_prb = 7;  // not in the compact table
    c.mcs1 = 8;
    CHECK_THROWS(build_dci_payload(c));
    c.nof_prb = 8;
    c.mcs1 = 9;  // not a multiple of 4
    CHECK_THROWS(build_dci_payload(c));
    DciMessage b;
    b.format = FormatId::kB;  // missing second MCS
    CHECK_THROWS(build_dci_payload(b));
  }
}
