#include <doctest.h>

#include <set>

#include "ngkit/searchspace.hpp"

using namespace ngkit;

TEST_SUITE("searchspace") {
  TEST_CASE("seed recurrence is reproducible and rnti-dependent") {
    // Y_0 = (39827 * rnti) mod 65537, iterated per subframe position
    uint32_t y = (39827u * 0x1234u) % 65537u;
    CHECK(search_space_seed(0x1234, 0) == y);
    y = static_cast<uint32_t>((39827ull * y) % 65537u);
    CHECK(search_space_seed(0x1234, 1) == y);
    CHECK(search_space_seed(0x1234, 5) != search_space_seed(0x4321, 5));
    // the recurrence depends on the position within the 10 ms frame
    CHECK(search_space_seed(0x1234, 3) == search_space_seed(0x1234, 13));
  }

  TEST_CASE("candidates start at multiples of the level and fit") {
    for (uint16_t rnti : {0x003Du, 0x4601u, 0xFFF3u}) {
      for (uint64_t sfn : {0ull, 7ull, 123ull}) {
        for (unsigned level : {1u, 2u, 4u, 8u}) {
          auto cands = search_space_candidates(
              static_cast<uint16_t>(rnti), sfn, level, 84);
          CHECK(!cands.empty());
          std::set<unsigned> seen;
          for (unsigned start : cands) {
            CHECK(start % level == 0);
            CHECK(start < 84);
            CHECK(seen.insert(start).second);  // de-duplicated
          }
        }
      }
    }
  }

  TEST_CASE("candidate counts follow the per-level monitoring budget") {
    auto l1 = search_space_candidates(0x5001, 2, 1, 84);
    auto l8 = search_space_candidates(0x5001, 2, 8, 84);
    CHECK(l1.size() <= 6);
    CHECK(l1.size() >= 5);  // collisions may deduplicate at most a few
    CHECK(l8.size() <= 2);
  }

  TEST_CASE("membership check matches the candidate list") {
    auto cands = search_space_candidates(0x6001, 9, 2, 84);
    for (unsigned start : cands) CHECK(in_search_space(0x6001, 9, 2, start, 84));
    unsigned miss = 0;
    for (unsigned start = 0; start < 84; start += 2)
      miss += !in_search_space(0x6001, 9, 2, start, 84);
    CHECK(miss == 42 - cands.size());
  }

  TEST_CASE("tiny channels collapse to a single candidate") {
    auto cands = search_space_candidates(0x7001, 0, 8, 8);
    REQUIRE(cands.size() == 1);
    CHECK(cands[0] == 0);
  }
}
