#pragma once

#include <cstdint>
#include <vector>

namespace ngkit {

// UE-specific search space. The per-subframe seed follows the
// Y_k = (39827 * Y_{k-1}) mod 65537 recurrence with Y_{-1} = rnti,
// iterated once per subframe position within the radio frame. A message
// at aggregation level L may start only at L * ((Y + m) mod (n_cce / L))
// for candidate indices m. Encoder placement and decoder validation share
// this one implementation.

inline constexpr uint32_t kHashMultiplier = 39827;
inline constexpr uint32_t kHashModulus = 65537;

inline uint32_t search_space_seed(uint16_t rnti, uint64_t sfn) {
  uint32_t y = rnti;
  const unsigned k = static_cast<unsigned>(sfn % 10);
  for (unsigned i = 0; i <= k; ++i)
    y = static_cast<uint32_t>((static_cast<uint64_t>(kHashMultiplier) * y) %
                              kHashModulus);
  return y;
}

// Candidates monitored per aggregation level, as a standard UE would.
inline unsigned candidates_per_level(unsigned level) {
  switch (level) {
    case 1: return 6;
    case 2: return 6;
    case 4: return 2;
    case 8: return 2;
  }
  return 0;
}

// Ordered, de-duplicated start indices for (rnti, sfn, level) within a
// channel of n_cce usable CCEs. Every index is a multiple of level.
inline std::vector<unsigned> search_space_candidates(uint16_t rnti,
                                                     uint64_t sfn,
                                                     unsigned level,
                                                     unsigned n_cce) {
  std::vector<unsigned> out;
  const unsigned npos = n_cce / level;
  if (npos == 0) return out;
  const uint32_t y = search_space_seed(rnti, sfn);
  const unsigned m_max = candidates_per_level(level);
  for (unsigned m = 0; m < m_max; ++m) {
    unsigned start = level * ((y + m) % npos);
    bool seen = false;
    for (unsigned s : out) seen = seen || (s == start);
    if (!seen) out.push_back(start);
  }
  return out;
}

inline bool in_search_space(uint16_t rnti, uint64_t sfn, unsigned level,
                            unsigned start, unsigned n_cce) {
  for (unsigned s : search_space_candidates(rnti, sfn, level, n_cce))
    if (s == start) return true;
  return false;
}

}  // namespace ngkit
