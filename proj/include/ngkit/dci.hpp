#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "ngkit/bits.hpp"
#include "ngkit/tbs.hpp"

namespace ngkit {

// Three control message formats with fixed field layouts. Formats are
// distinguished by payload length during blind decoding, so the lengths
// must be pairwise distinct.
//
//   A (SISO)    24 bits: alloc_start:7 nof_prb:7 mcs1:5 harq:3 ndi:1 res:1
//   B (MIMO)    32 bits: alloc_start:7 nof_prb:7 mcs1:5 mcs2:5 harq:3
//                        ndi:1 swap:1 res:3
//   C (compact)  8 bits: prb_code:4 mcs_code:3 ndi:1
//
// Format C trades granularity for size: nof_prb comes from a 16-entry
// table, MCS is restricted to multiples of 4, HARQ process is implicitly
// 0 and the allocation start is implicitly 0. With the 16-bit checksum
// appended, C fits exactly one CCE after rate-1/3 coding (72 coded bits),
// so it is the only format usable at aggregation level 1.
enum class FormatId : uint8_t { kA = 0, kB = 1, kC = 2 };

inline const char* format_name(FormatId f) {
  switch (f) {
    case FormatId::kA: return "A";
    case FormatId::kB: return "B";
    case FormatId::kC: return "C";
  }
  return "?";
}

inline std::optional<FormatId> format_from_name(const std::string& s) {
  if (s == "A") return FormatId::kA;
  if (s == "B") return FormatId::kB;
  if (s == "C") return FormatId::kC;
  return std::nullopt;
}

struct FormatSpec {
  FormatId id;
  unsigned payload_bits;  // excluding the 16-bit scrambled checksum
  bool has_mcs2;
  std::array<unsigned, 4> allowed_levels;  // zero-terminated list
};

inline constexpr std::array<FormatSpec, 3> kFormats = {{
    {FormatId::kA, 24, false, {2, 4, 8, 0}},
    {FormatId::kB, 32, true, {2, 4, 8, 0}},
    {FormatId::kC, 8, false, {1, 2, 4, 8}},
}};

inline const FormatSpec& format_spec(FormatId f) {
  return kFormats[static_cast<size_t>(f)];
}

inline bool format_allows_level(FormatId f, unsigned level) {
  for (unsigned l : format_spec(f).allowed_levels)
    if (l == level) return true;
  return false;
}

// PRB counts representable by format C.
inline constexpr std::array<uint8_t, 16> kCompactPrbTable = {
    1, 2, 3, 4, 5, 6, 8, 10, 12, 16, 20, 25, 32, 40, 50, 64};

inline std::optional<unsigned> compact_prb_code(unsigned nof_prb) {
  for (unsigned i = 0; i < kCompactPrbTable.size(); ++i)
    if (kCompactPrbTable[i] == nof_prb) return i;
  return std::nullopt;
}

// Largest table entry <= wanted (entry 0 as floor).
inline unsigned compact_prb_floor(unsigned wanted) {
  unsigned best = kCompactPrbTable[0];
  for (unsigned v : kCompactPrbTable)
    if (v <= wanted && v > best) best = v;
  return best;
}

struct DciMessage {
  uint16_t rnti = 0;
  uint64_t sfn = 0;
  FormatId format = FormatId::kA;
  uint8_t mcs1 = 0;
  std::optional<uint8_t> mcs2;
  uint8_t nof_prb = 0;
  uint8_t alloc_start = 0;  // carried by formats A/B only
  uint32_t tbs = 0;
  bool ndi = true;
  uint8_t harq = 0;
  bool swap_streams = false;
  unsigned aggregation_level = 2;
  unsigned cce_start = 0;

  unsigned streams() const { return mcs2 ? 2u : 1u; }

  // equality of the information content (placement metadata excluded)
  bool same_content(const DciMessage& o) const {
    return rnti == o.rnti && sfn == o.sfn && format == o.format &&
           mcs1 == o.mcs1 && mcs2 == o.mcs2 && nof_prb == o.nof_prb &&
           alloc_start == o.alloc_start && tbs == o.tbs && ndi == o.ndi &&
           harq == o.harq;
  }
};

inline void refresh_tbs(DciMessage& m) {
  std::optional<unsigned> m2;
  if (m.mcs2) m2 = *m.mcs2;
  m.tbs = tbs_lookup(m.mcs1, m2, m.nof_prb, m.streams());
}

// Pack the message fields into the format's payload bit layout.
// Deterministic and invertible: parse_dci_payload(build_dci_payload(m))
// restores every carried field.
inline BitVec build_dci_payload(const DciMessage& m) {
  const FormatSpec& spec = format_spec(m.format);
  auto check = [&](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("build_dci_payload: ") + what);
  };
  check(m.mcs1 <= 28, "mcs1 exceeds 28");
  check(m.harq <= 7, "harq exceeds 7");
  check(m.nof_prb <= 110, "nof_prb exceeds field range");
  check(m.alloc_start <= 110, "alloc_start exceeds field range");
  check(spec.has_mcs2 == m.mcs2.has_value(), "mcs2 presence mismatch");
  if (m.mcs2) check(*m.mcs2 <= 28, "mcs2 exceeds 28");

  BitVec bits;
  bits.reserve(spec.payload_bits);
  switch (m.format) {
    case FormatId::kA:
      append_uint(bits, m.alloc_start, 7);
      append_uint(bits, m.nof_prb, 7);
      append_uint(bits, m.mcs1, 5);
      append_uint(bits, m.harq, 3);
      append_uint(bits, m.ndi ? 1 : 0, 1);
      append_uint(bits, 0, 1);
      break;
    case FormatId::kB:
      append_uint(bits, m.alloc_start, 7);
      append_uint(bits, m.nof_prb, 7);
      append_uint(bits, m.mcs1, 5);
      append_uint(bits, *m.mcs2, 5);
      append_uint(bits, m.harq, 3);
      append_uint(bits, m.ndi ? 1 : 0, 1);
      append_uint(bits, m.swap_streams ? 1 : 0, 1);
      append_uint(bits, 0, 3);
      break;
    case FormatId::kC: {
      auto code = compact_prb_code(m.nof_prb);
      check(code.has_value(), "nof_prb not representable in compact format");
      check(m.mcs1 % 4 == 0, "compact format needs MCS multiple of 4");
      check(m.harq == 0, "compact format implies harq 0");
      check(m.alloc_start == 0, "compact format implies alloc_start 0");
      append_uint(bits, *code, 4);
      append_uint(bits, m.mcs1 / 4, 3);
      append_uint(bits, m.ndi ? 1 : 0, 1);
      break;
    }
  }
  return bits;
}

// Inverse of build_dci_payload. rnti/sfn/placement are filled by the
// caller; tbs is recomputed from the carried fields.
inline DciMessage parse_dci_payload(const BitVec& bits, FormatId format) {
  const FormatSpec& spec = format_spec(format);
  if (bits.size() != spec.payload_bits)
    throw std::invalid_argument("parse_dci_payload: wrong payload length");
  DciMessage m;
  m.format = format;
  size_t p = 0;
  auto take = [&](unsigned w) {
    uint64_t v = uint_from_bits(bits, p, w);
    p += w;
    return v;
  };
  switch (format) {
    case FormatId::kA:
      m.alloc_start = static_cast<uint8_t>(take(7));
      m.nof_prb = static_cast<uint8_t>(take(7));
      m.mcs1 = static_cast<uint8_t>(take(5));
      m.harq = static_cast<uint8_t>(take(3));
      m.ndi = take(1) != 0;
      take(1);
      break;
    case FormatId::kB:
      m.alloc_start = static_cast<uint8_t>(take(7));
      m.nof_prb = static_cast<uint8_t>(take(7));
      m.mcs1 = static_cast<uint8_t>(take(5));
      m.mcs2 = static_cast<uint8_t>(take(5));
      m.harq = static_cast<uint8_t>(take(3));
      m.ndi = take(1) != 0;
      m.swap_streams = take(1) != 0;
      take(3);
      break;
    case FormatId::kC:
      m.nof_prb = kCompactPrbTable[take(4)];
      m.mcs1 = static_cast<uint8_t>(4 * take(3));
      m.ndi = take(1) != 0;
      m.harq = 0;
      m.alloc_start = 0;
      break;
  }
  // A decoded payload can carry any bit pattern; out-of-domain MCS values
  // are clamped into the table range so tbs stays defined. Such messages
  // never survive validation.
  if (m.mcs1 > 28) m.mcs1 = 28;
  if (m.mcs2 && *m.mcs2 > 28) m.mcs2 = 28;
  refresh_tbs(m);
  return m;
}

}  // namespace ngkit
