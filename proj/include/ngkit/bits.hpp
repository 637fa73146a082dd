#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ngkit {

// One bit per element, value 0 or 1. Indexed MSB-first within a message:
// bit 0 is the first bit on the wire.
using BitVec = std::vector<uint8_t>;

inline BitVec bits_from_uint(uint64_t value, unsigned width) {
  BitVec out(width);
  for (unsigned i = 0; i < width; ++i)
    out[i] = static_cast<uint8_t>((value >> (width - 1 - i)) & 1u);
  return out;
}

inline uint64_t uint_from_bits(const BitVec& bits, size_t pos, unsigned width) {
  uint64_t v = 0;
  for (unsigned i = 0; i < width; ++i) v = (v << 1) | bits[pos + i];
  return v;
}

inline void append_uint(BitVec& bits, uint64_t value, unsigned width) {
  for (unsigned i = 0; i < width; ++i)
    bits.push_back(static_cast<uint8_t>((value >> (width - 1 - i)) & 1u));
}

inline BitVec xor_bits(const BitVec& a, const BitVec& b) {
  BitVec out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] ^ b[i];
  return out;
}

inline std::string bits_to_string(const BitVec& bits) {
  std::string s;
  s.reserve(bits.size());
  for (uint8_t b : bits) s.push_back(b ? '1' : '0');
  return s;
}

}  // namespace ngkit
