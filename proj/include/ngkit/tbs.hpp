#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>

namespace ngkit {

// Spectral efficiency per MCS index (modulation bits x code rate), one
// entry per index 0..28. QPSK up to 9, 16QAM up to 16, 64QAM above, with
// the modulation-switch dips flattened so the table is nondecreasing.
inline constexpr std::array<double, 29> kMcsEfficiency = {
    0.2344, 0.3066, 0.3770, 0.4902, 0.6016, 0.7402, 0.8770, 1.0273,
    1.1758, 1.3262, 1.3281, 1.4766, 1.6953, 1.9141, 2.1602, 2.4063,
    2.5703, 2.5938, 2.7305, 3.0293, 3.3223, 3.6123, 3.9023, 4.2129,
    4.5234, 4.8164, 5.1152, 5.3320, 5.5547,
};

// Data resource elements per PRB per subframe after control/reference
// overhead.
inline constexpr double kDataRePerPrb = 132.0;

// Transport block size in bits. Streams are independent: each contributes
// round(nof_prb * 132 * eff(mcs)).
inline uint32_t tbs_lookup(unsigned mcs1, std::optional<unsigned> mcs2,
                           unsigned nof_prb, unsigned streams) {
  if (mcs1 > 28 || (mcs2 && *mcs2 > 28))
    throw std::invalid_argument("tbs_lookup: MCS index out of range");
  if (streams != 1 && streams != 2)
    throw std::invalid_argument("tbs_lookup: streams must be 1 or 2");
  if (streams == 2 && !mcs2)
    throw std::invalid_argument("tbs_lookup: two streams need a second MCS");
  auto per_stream = [&](unsigned mcs) {
    return static_cast<uint32_t>(
        std::llround(nof_prb * kDataRePerPrb * kMcsEfficiency[mcs]));
  };
  uint32_t tbs = per_stream(mcs1);
  if (streams == 2) tbs += per_stream(*mcs2);
  return tbs;
}

}  // namespace ngkit
