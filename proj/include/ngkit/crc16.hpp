#pragma once

#include <cstdint>

#include "ngkit/bits.hpp"

namespace ngkit {

// CRC-16/CCITT: polynomial 0x1021, initial register 0x0000, no reflection.
// Operates on a bit sequence of arbitrary length, MSB-first.
inline uint16_t crc16(const BitVec& bits) {
  uint16_t reg = 0x0000;
  for (uint8_t b : bits) {
    uint16_t fb = static_cast<uint16_t>(((reg >> 15) & 1u) ^ b);
    reg = static_cast<uint16_t>(reg << 1);
    if (fb) reg ^= 0x1021;
  }
  return reg;
}

// The receiver ID is folded into the checksum, not the payload.
inline uint16_t scramble_crc(uint16_t crc, uint16_t rnti) {
  return crc ^ rnti;
}

}  // namespace ngkit
