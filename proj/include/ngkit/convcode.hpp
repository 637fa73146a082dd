#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "ngkit/bits.hpp"

namespace ngkit {

// Rate-1/3 tail-biting convolutional code, constraint length 7, generator
// polynomials 133/171/165 (octal). The shift register starts loaded with
// the last six input bits, so the trellis start and end states coincide.
//
// Coded bits are emitted interleaved: input bit k produces output bits
// 3k, 3k+1, 3k+2. LLR sign convention throughout: llr > 0 means coded bit 1.

inline constexpr unsigned kConvConstraint = 7;
inline constexpr unsigned kConvStates = 64;
inline constexpr std::array<uint8_t, 3> kConvGenerators = {
    0b1011011,  // 133
    0b1111001,  // 171
    0b1110101,  // 165
};

namespace detail {

inline uint8_t parity7(uint8_t v) {
  return static_cast<uint8_t>(std::popcount(static_cast<unsigned>(v)) & 1);
}

// window bit 6 = current input, bit 0 = input six steps back
inline std::array<uint8_t, 3> conv_output(uint8_t window) {
  return {parity7(window & kConvGenerators[0]),
          parity7(window & kConvGenerators[1]),
          parity7(window & kConvGenerators[2])};
}

}  // namespace detail

inline BitVec conv_encode(const BitVec& input) {
  const size_t n = input.size();
  BitVec out(3 * n);
  // tail-biting: register holds the last six message bits
  uint8_t reg = 0;
  for (unsigned j = 1; j <= 6 && j <= n; ++j)
    reg |= static_cast<uint8_t>(input[n - j] << (6 - j));
  for (size_t k = 0; k < n; ++k) {
    uint8_t window = static_cast<uint8_t>((input[k] << 6) | reg);
    auto o = detail::conv_output(window);
    out[3 * k + 0] = o[0];
    out[3 * k + 1] = o[1];
    out[3 * k + 2] = o[2];
    reg = static_cast<uint8_t>(window >> 1);
  }
  return out;
}

// Fit a coded block into 72*L bits: cyclic repetition when the block is
// shorter, plain prefix truncation when longer. out[i] = coded[i mod C],
// which makes the first 72*(L/2) bits at level L identical to the full
// output at level L/2.
inline std::vector<uint8_t> rate_match(const BitVec& coded, unsigned level) {
  const size_t target = 72u * level;
  std::vector<uint8_t> out(target);
  for (size_t i = 0; i < target; ++i) out[i] = coded[i % coded.size()];
  return out;
}

// Collapse repeated copies by LLR addition (ML-optimal for repetition).
// Positions never transmitted (truncated tail) stay at zero.
inline std::vector<double> derate_match(std::span<const float> llrs,
                                        size_t coded_len) {
  std::vector<double> combined(coded_len, 0.0);
  for (size_t i = 0; i < llrs.size(); ++i) combined[i % coded_len] += llrs[i];
  return combined;
}

struct ViterbiResult {
  BitVec bits;               // decoded payload, length = payload_len
  double path_metric = 0.0;  // correlation of the winning path, middle pass
};

// Tail-biting decode via the wrap-around approximation: the trellis runs
// over three circular copies of the block with free boundary metrics, the
// best closing state is picked, and the middle copy is read out so the
// decoded span is warmed up on both sides. The exhaustive 64-start-state
// decoder lives in the test suite as an oracle.
inline ViterbiResult viterbi_decode(std::span<const double> llrs,
                                    size_t payload_len) {
  const size_t n = payload_len;
  const size_t total = 3 * n;
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  // Branch outputs per (state, input). State bit 5 = most recent input bit.
  std::array<std::array<std::array<uint8_t, 3>, 2>, kConvStates> outs{};
  for (unsigned s = 0; s < kConvStates; ++s)
    for (unsigned b = 0; b < 2; ++b)
      outs[s][b] = detail::conv_output(static_cast<uint8_t>((b << 6) | s));

  std::vector<double> metric(kConvStates, 0.0), next(kConvStates, kNegInf);
  // decision[step][ns] = low bit of the winning predecessor state;
  // the input bit that entered at this step is ns >> 5.
  std::vector<uint8_t> decision(total * kConvStates);

  for (size_t step = 0; step < total; ++step) {
    const size_t k = step % n;
    const double l0 = llrs[3 * k + 0];
    const double l1 = llrs[3 * k + 1];
    const double l2 = llrs[3 * k + 2];
    std::fill(next.begin(), next.end(), kNegInf);
    for (unsigned s = 0; s < kConvStates; ++s) {
      if (metric[s] == kNegInf) continue;
      for (unsigned b = 0; b < 2; ++b) {
        const auto& o = outs[s][b];
        double m = metric[s] + (o[0] ? l0 : -l0) + (o[1] ? l1 : -l1) +
                   (o[2] ? l2 : -l2);
        unsigned ns = ((b << 5) | (s >> 1)) & 0x3f;
        if (m > next[ns]) {
          next[ns] = m;
          decision[step * kConvStates + ns] = static_cast<uint8_t>(s & 1u);
        }
      }
    }
    metric.swap(next);
  }

  unsigned best = 0;
  for (unsigned s = 1; s < kConvStates; ++s)
    if (metric[s] > metric[best]) best = s;

  BitVec path(total);
  unsigned s = best;
  for (size_t step = total; step-- > 0;) {
    path[step] = static_cast<uint8_t>(s >> 5);  // input bit of this step
    unsigned prev_lsb = decision[step * kConvStates + s];
    s = (((s & 0x1f) << 1) | prev_lsb) & 0x3f;
  }

  ViterbiResult r;
  r.bits.assign(path.begin() + static_cast<long>(n),
                path.begin() + static_cast<long>(2 * n));
  r.path_metric = metric[best];
  return r;
}

inline BitVec hard_decisions(std::span<const float> llrs) {
  BitVec out(llrs.size());
  for (size_t i = 0; i < llrs.size(); ++i) out[i] = llrs[i] > 0.0f ? 1 : 0;
  return out;
}

}  // namespace ngkit
