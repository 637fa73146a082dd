#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ngkit/cell.hpp"
#include "ngkit/convcode.hpp"
#include "ngkit/crc16.hpp"
#include "ngkit/dci.hpp"
#include "ngkit/searchspace.hpp"

namespace ngkit {

struct DecoderConfig {
  // A CCE is empty when its mean normalized |LLR| falls below this.
  double empty_threshold = 0.85;
  // Candidates with more than this fraction of coded bits flipped are
  // dropped before any validation.
  double flip_drop_ratio = 0.25;
  // Per-CCE flip ceiling. A genuine message agrees with its re-encoding
  // inside every CCE it claims; a span that swallows a neighboring
  // message or noise disagrees on the foreign CCEs at around one half.
  double cce_flip_drop_ratio = 0.35;
  // On a child-ancestor match, validate at the largest level whose flip
  // ratio stays within this margin of the chain's best. Stops a real
  // message from being absorbed into a half-noise parent location.
  double chain_flip_margin = 0.10;
  // Require candidate locations to lie in the derived ID's hashed search
  // space before handing them to temporal validation.
  bool enforce_search_space = true;
  // 0 = unlimited. Viterbi runs per subframe, priority pass included.
  unsigned max_attempts = 0;
  // Explicit LLR normalization scale; 0 selects automatic estimation
  // from the always-empty pad CCEs.
  double llr_scale = 0.0;
};

// ---------------------------------------------------------------------------
// LLR normalization. The stream carries llr = 2y/sigma^2 with unit symbol
// energy, so the mean |llr| of occupied bits equals sigma_L^2/2 where
// sigma_L is the noise-only LLR deviation. The pad CCEs at the channel
// tail are never allocated, which makes them a clean per-subframe noise
// probe. Normalized units put the occupied mean at 1.0, making the 0.85
// empty threshold independent of SNR.

inline double estimate_llr_scale(const LlrSubframe& sub,
                                 const CellConfig& cfg) {
  constexpr double kHalfNormalMean = 0.7978845608028654;  // sqrt(2/pi)
  auto cce_mean_abs = [&](unsigned c) {
    double acc = 0.0;
    for (float v : sub.cce(c)) acc += std::fabs(v);
    return acc / kCceBits;
  };

  // Bootstrap from the pad CCEs, which are never allocated.
  double pad_acc = 0.0;
  unsigned pad_n = 0;
  for (unsigned c = cfg.n_cce; c < cfg.n_cce_padded && c < sub.n_cce; ++c) {
    pad_acc += cce_mean_abs(c);
    ++pad_n;
  }
  double s0;
  double noise_level;  // mean |llr| of an empty CCE under s0 units
  if (pad_n > 0) {
    noise_level = pad_acc / pad_n;
    double sigma = noise_level / kHalfNormalMean;
    s0 = sigma * sigma / 2.0;
  } else {
    // No pad CCEs: median-absolute-deviation fallback, robust while less
    // than half of the channel is occupied.
    std::vector<float> mag(sub.llrs.size());
    for (size_t i = 0; i < mag.size(); ++i) mag[i] = std::fabs(sub.llrs[i]);
    auto mid = mag.begin() + static_cast<long>(mag.size() / 2);
    std::nth_element(mag.begin(), mid, mag.end());
    double sigma = *mid / 0.6745;
    s0 = sigma * sigma / 2.0;
    noise_level = sigma * kHalfNormalMean;
  }
  if (s0 <= 0.0) return 1.0;

  // Refine over every CCE that clearly sits in the noise cluster. The
  // pads alone (a few hundred samples) leave several percent of scale
  // noise; pooling the whole empty region tightens the estimate an order
  // of magnitude in a lightly loaded channel. The cutoff halfway between
  // the noise level and the occupied level keeps occupied CCEs out.
  double cutoff = (noise_level / s0 + 1.0) / 2.0;
  double acc = 0.0;
  unsigned n = 0;
  for (unsigned c = 0; c < sub.n_cce; ++c) {
    double m = cce_mean_abs(c);
    if (c >= cfg.n_cce || m / s0 < cutoff) {
      acc += m;
      ++n;
    }
  }
  if (n == 0) return s0;
  double sigma = acc / n / kHalfNormalMean;
  return sigma * sigma / 2.0;
}

inline std::vector<float> normalized_llrs(const LlrSubframe& sub,
                                          double scale) {
  std::vector<float> out(sub.llrs.size());
  float inv = scale > 0.0 ? static_cast<float>(1.0 / scale) : 1.0f;
  for (size_t i = 0; i < out.size(); ++i) out[i] = sub.llrs[i] * inv;
  return out;
}

// Per-CCE emptiness against the normalized threshold.
inline std::vector<bool> mark_empty_cces(std::span<const float> norm_llrs,
                                         unsigned n_cce, double threshold) {
  std::vector<bool> empty(n_cce, false);
  for (unsigned c = 0; c < n_cce; ++c) {
    double acc = 0.0;
    for (unsigned j = 0; j < kCceBits; ++j)
      acc += std::fabs(norm_llrs[static_cast<size_t>(c) * kCceBits + j]);
    empty[c] = (acc / kCceBits) < threshold;
  }
  return empty;
}

// ---------------------------------------------------------------------------
// Search tree over one 8-CCE segment: 8 leaves, 4 L2 nodes, 2 L4 nodes,
// 1 root. A parent is empty iff all of its children are empty.

struct SearchTree {
  std::array<bool, 8> l1;
  std::array<bool, 4> l2;
  std::array<bool, 2> l4;
  bool l8;

  bool empty_at(unsigned level, unsigned idx) const {
    switch (level) {
      case 1: return l1[idx];
      case 2: return l2[idx];
      case 4: return l4[idx];
      case 8: return l8;
    }
    return true;
  }

  unsigned candidate_count() const {
    unsigned n = 0;
    for (bool e : l1) n += !e;
    for (bool e : l2) n += !e;
    for (bool e : l4) n += !e;
    n += !l8;
    return n;
  }
};

inline SearchTree build_search_tree(std::span<const bool> flags) {
  if (flags.size() != 8)
    throw std::invalid_argument("build_search_tree needs exactly 8 flags");
  SearchTree t{};
  for (unsigned i = 0; i < 8; ++i) t.l1[i] = flags[i];
  for (unsigned i = 0; i < 4; ++i) t.l2[i] = t.l1[2 * i] && t.l1[2 * i + 1];
  for (unsigned i = 0; i < 2; ++i) t.l4[i] = t.l2[2 * i] && t.l2[2 * i + 1];
  t.l8 = t.l4[0] && t.l4[1];
  return t;
}

// In-order visit sequence of the 15 nodes: (level, offset within segment).
inline constexpr std::array<std::pair<unsigned, unsigned>, 15> kInOrderNodes =
    {{{1, 0}, {2, 0}, {1, 1}, {4, 0}, {1, 2}, {2, 2}, {1, 3}, {8, 0},
      {1, 4}, {2, 4}, {1, 5}, {4, 4}, {1, 6}, {2, 6}, {1, 7}}};

// ---------------------------------------------------------------------------
// Single blind decoding attempt at (cce_start, level, format).

struct CandidateMessage {
  DciMessage msg;        // parsed fields, rnti = derived ID
  BitVec payload;        // decoded payload bits, checksum excluded
  uint16_t derived_rnti = 0;
  double flip_ratio = 1.0;
  double worst_cce_flip = 1.0;  // highest per-CCE disagreement
  double path_metric = 0.0;
  unsigned cce_start = 0;
  unsigned level = 1;
  FormatId format = FormatId::kC;
};

inline CandidateMessage attempt_decode(std::span<const float> norm_llrs,
                                       uint64_t sfn, unsigned cce_start,
                                       unsigned level, FormatId format) {
  const FormatSpec& spec = format_spec(format);
  const size_t word_len = spec.payload_bits + 16;
  std::span<const float> span(norm_llrs.data() +
                                  static_cast<size_t>(cce_start) * kCceBits,
                              static_cast<size_t>(level) * kCceBits);
  auto combined = derate_match(span, 3 * word_len);
  auto vit = viterbi_decode(combined, word_len);

  CandidateMessage cand;
  cand.cce_start = cce_start;
  cand.level = level;
  cand.format = format;
  cand.path_metric = vit.path_metric;
  cand.payload.assign(vit.bits.begin(),
                      vit.bits.begin() + static_cast<long>(spec.payload_bits));
  uint16_t appended = static_cast<uint16_t>(
      uint_from_bits(vit.bits, spec.payload_bits, 16));
  cand.derived_rnti = scramble_crc(crc16(cand.payload), appended);

  BitVec reenc = rate_match(conv_encode(vit.bits), level);
  BitVec hard = hard_decisions(span);
  unsigned flips = 0;
  unsigned worst = 0;
  for (unsigned c = 0; c < level; ++c) {
    unsigned cce_flips = 0;
    for (unsigned j = 0; j < kCceBits; ++j) {
      size_t i = static_cast<size_t>(c) * kCceBits + j;
      cce_flips += reenc[i] != hard[i];
    }
    flips += cce_flips;
    worst = std::max(worst, cce_flips);
  }
  cand.flip_ratio =
      static_cast<double>(flips) / static_cast<double>(reenc.size());
  cand.worst_cce_flip = static_cast<double>(worst) / kCceBits;

  cand.msg = parse_dci_payload(cand.payload, format);
  cand.msg.rnti = cand.derived_rnti;
  cand.msg.sfn = sfn;
  cand.msg.cce_start = cce_start;
  cand.msg.aggregation_level = level;
  return cand;
}

// Child-ancestor verdict: a candidate is validated by its first-half
// companion when both the decoded payload and the derived ID agree.
inline bool child_ancestor_match(const CandidateMessage& node,
                                 const CandidateMessage& companion) {
  return node.derived_rnti == companion.derived_rnti &&
         node.payload == companion.payload;
}

// ---------------------------------------------------------------------------
// Whole-subframe decoding.

enum class ValidatedBy : uint8_t { kAncestor, kTracker };

struct ValidatedMessage {
  DciMessage msg;
  double flip_ratio = 0.0;
  ValidatedBy by = ValidatedBy::kAncestor;
};

struct ActiveUeHint {
  uint16_t rnti = 0;
  unsigned recent_count = 0;  // decoded messages in the past second
  FormatId last_format = FormatId::kA;
};

struct DecodeReport {
  uint64_t sfn = 0;
  uint32_t cell_id = 0;
  std::vector<ValidatedMessage> validated;
  std::vector<CandidateMessage> candidates;  // for temporal validation
  unsigned attempts = 0;
  unsigned pruned_cces = 0;
  double llr_scale = 1.0;
};

// Decodes every control message in one subframe: normalizes LLRs, prunes
// empty CCEs, decodes the hashed search spaces of recently active users
// first, then walks each 8-CCE segment tree in order with child-ancestor
// validation. Traversal halts once validated allocations cover the cell's
// PRBs. Pure function of (subframe, hints); hints are an immutable
// tracker snapshot.
inline DecodeReport decode_subframe(const LlrSubframe& sub,
                                    const CellConfig& cell,
                                    std::span<const ActiveUeHint> hints,
                                    const DecoderConfig& cfg = {}) {
  if (sub.n_cce != cell.n_cce_padded ||
      sub.llrs.size() != static_cast<size_t>(sub.n_cce) * kCceBits)
    throw std::invalid_argument("decode_subframe: malformed subframe");

  DecodeReport report;
  report.sfn = sub.sfn;
  report.cell_id = sub.cell_id;

  double scale =
      cfg.llr_scale > 0.0 ? cfg.llr_scale : estimate_llr_scale(sub, cell);
  report.llr_scale = scale;
  std::vector<float> norm = normalized_llrs(sub, scale);

  std::vector<bool> empty = mark_empty_cces(norm, sub.n_cce,
                                            cfg.empty_threshold);
  std::vector<bool> consumed(sub.n_cce, false);
  for (unsigned c = 0; c < sub.n_cce; ++c) report.pruned_cces += empty[c];

  unsigned total_prb = 0;
  bool stop = false;

  auto node_empty = [&](unsigned start, unsigned level) {
    for (unsigned c = start; c < start + level; ++c)
      if (!empty[c]) return false;
    return true;
  };
  auto node_consumed = [&](unsigned start, unsigned level) {
    for (unsigned c = start; c < start + level; ++c)
      if (consumed[c]) return true;
    return false;
  };
  auto out_of_budget = [&] {
    return cfg.max_attempts && report.attempts >= cfg.max_attempts;
  };

  auto try_attempt = [&](unsigned start, unsigned level,
                         FormatId f) -> std::optional<CandidateMessage> {
    if (out_of_budget()) return std::nullopt;
    ++report.attempts;
    CandidateMessage cand = attempt_decode(norm, sub.sfn, start, level, f);
    if (cand.flip_ratio > cfg.flip_drop_ratio) return std::nullopt;
    if (cand.worst_cce_flip > cfg.cce_flip_drop_ratio) return std::nullopt;
    return cand;
  };

  auto validate = [&](const CandidateMessage& cand, ValidatedBy by) {
    report.validated.push_back({cand.msg, cand.flip_ratio, by});
    for (unsigned c = cand.cce_start; c < cand.cce_start + cand.level; ++c)
      consumed[c] = true;
    total_prb += cand.msg.nof_prb;
    if (total_prb >= cell.n_prb) stop = true;
  };

  // ---- priority pass: hashed search spaces of recently active users,
  // most talkative first; a matching derived ID validates immediately.
  std::vector<ActiveUeHint> order(hints.begin(), hints.end());
  std::stable_sort(order.begin(), order.end(),
                   [](const ActiveUeHint& a, const ActiveUeHint& b) {
                     return a.recent_count > b.recent_count;
                   });
  // Levels are scanned largest-first so an aggregated message is claimed
  // at its full span; claiming a prefix candidate first would leave the
  // tail CCEs to decode as a rotated ghost codeword.
  for (const ActiveUeHint& hint : order) {
    if (stop || out_of_budget()) break;
    bool found = false;
    for (unsigned level : {8u, 4u, 2u, 1u}) {
      if (found || stop) break;
      // formats for this level, the user's recent format first
      std::vector<FormatId> formats;
      for (FormatId f : {hint.last_format, FormatId::kA, FormatId::kB,
                         FormatId::kC}) {
        if (!format_allows_level(f, level)) continue;
        if (std::find(formats.begin(), formats.end(), f) == formats.end())
          formats.push_back(f);
      }
      for (unsigned start :
           search_space_candidates(hint.rnti, sub.sfn, level, cell.n_cce)) {
        if (found || stop || out_of_budget()) break;
        if (start + level > cell.n_cce) continue;
        if (node_consumed(start, level)) continue;
        // only fully occupied spans can hold a message of this level
        bool any_empty = false;
        for (unsigned c = start; c < start + level; ++c)
          any_empty = any_empty || empty[c];
        if (any_empty) continue;
        for (FormatId f : formats) {
          auto cand = try_attempt(start, level, f);
          if (cand && cand->derived_rnti == hint.rnti) {
            validate(*cand, ValidatedBy::kTracker);
            found = true;
            break;
          }
          if (out_of_budget()) break;
        }
      }
    }
  }

  // ---- tree pass over each 8-CCE segment, in-order traversal with
  // child-ancestor chain validation
  const unsigned n_segments = sub.n_cce / 8;
  for (unsigned seg = 0; seg < n_segments && !stop; ++seg) {
    const unsigned base = seg * 8;

    std::vector<CandidateMessage> buffered;  // all flip-passing decodes
    // First-half companion with agreeing payload and derived ID. The match
    // only counts when every CCE under the larger node carries signal:
    // with an empty second half the two decodes share all their input and
    // the agreement proves nothing.
    auto matching_companion = [&](const CandidateMessage& cand)
        -> const CandidateMessage* {
      if (cand.level < 2) return nullptr;
      for (unsigned c = cand.cce_start; c < cand.cce_start + cand.level; ++c)
        if (empty[c]) return nullptr;
      for (const auto& c : buffered)
        if (c.cce_start == cand.cce_start && c.level == cand.level / 2 &&
            child_ancestor_match(cand, c))
          return &c;
      return nullptr;
    };

    // Matched chains, keyed by (start, content). The winner climbs to a
    // larger level while its flip ratio stays within the margin of the
    // chain's best; rival contents at the same start stay separate chains.
    struct Pending {
      CandidateMessage winner;
      double chain_min_flip = 1.0;
    };
    std::vector<Pending> pendings;
    auto same_content = [](const CandidateMessage& a,
                           const CandidateMessage& b) {
      return a.derived_rnti == b.derived_rnti && a.payload == b.payload;
    };

    auto under_pending = [&](unsigned start, unsigned level) {
      for (const Pending& p : pendings) {
        unsigned ws = p.winner.cce_start, wl = p.winner.level;
        bool inside = start >= ws && start + level <= ws + wl;
        bool is_winner_slot = start == ws && level == wl;
        if (inside && !is_winner_slot) return true;
      }
      return false;
    };

    for (auto [level, offset] : kInOrderNodes) {
      if (stop || out_of_budget()) break;
      unsigned start = base + offset;
      if (node_empty(start, level) || node_consumed(start, level)) continue;
      if (under_pending(start, level)) continue;

      for (FormatId f : {FormatId::kA, FormatId::kB, FormatId::kC}) {
        if (!format_allows_level(f, level)) continue;
        auto cand = try_attempt(start, level, f);
        if (!cand) {
          if (out_of_budget()) break;
          continue;
        }
        if (const CandidateMessage* half = matching_companion(*cand)) {
          Pending* p = nullptr;
          for (Pending& q : pendings)
            if (q.winner.cce_start == start && same_content(q.winner, *cand))
              p = &q;
          if (!p) {
            pendings.push_back({*half, half->flip_ratio});
            p = &pendings.back();
          }
          p->chain_min_flip = std::min(p->chain_min_flip, cand->flip_ratio);
          if (cand->flip_ratio <= p->chain_min_flip + cfg.chain_flip_margin)
            p->winner = *cand;
        }
        buffered.push_back(std::move(*cand));
      }
    }

    // Chain finalization. Decoding a foreign message's coded stream with a
    // shorter format yields a structured near-codeword whose level-L and
    // level-2L decodes agree, so agreement alone is not proof. Such ghost
    // chains are put down by three rules: the winner must sit in its own
    // derived ID's search space, any overlapping foreign candidate with a
    // clearly better flip ratio cancels the chain, and surviving chains
    // are settled best-first with no CCE granted twice.
    std::vector<const Pending*> final_order;
    for (const Pending& p : pendings) {
      if (cfg.enforce_search_space &&
          !in_search_space(p.winner.derived_rnti, sub.sfn, p.winner.level,
                           p.winner.cce_start, cell.n_cce))
        continue;
      bool cancelled = false;
      for (const auto& c : buffered) {
        if (same_content(c, p.winner)) continue;
        bool overlaps = c.cce_start < p.winner.cce_start + p.winner.level &&
                        p.winner.cce_start < c.cce_start + c.level;
        if (!overlaps) continue;
        if (c.flip_ratio + 0.02 < p.winner.flip_ratio &&
            (!cfg.enforce_search_space ||
             in_search_space(c.derived_rnti, sub.sfn, c.level, c.cce_start,
                             cell.n_cce)))
          cancelled = true;
      }
      if (!cancelled) final_order.push_back(&p);
    }
    std::stable_sort(final_order.begin(), final_order.end(),
                     [](const Pending* a, const Pending* b) {
                       return a->winner.flip_ratio < b->winner.flip_ratio;
                     });
    for (const Pending* p : final_order) {
      if (stop) break;
      if (node_consumed(p->winner.cce_start, p->winner.level)) continue;
      validate(p->winner, ValidatedBy::kAncestor);
    }

    // survivors go to the tracker: not overlapping any validated span and,
    // when enforced, sitting inside their derived ID's search space
    for (auto& c : buffered) {
      bool overlapped = false;
      for (unsigned cc = c.cce_start; cc < c.cce_start + c.level; ++cc)
        overlapped = overlapped || consumed[cc];
      if (overlapped) continue;
      if (cfg.enforce_search_space &&
          !in_search_space(c.derived_rnti, sub.sfn, c.level, c.cce_start,
                           cell.n_cce))
        continue;
      report.candidates.push_back(std::move(c));
    }
  }

  return report;
}

}  // namespace ngkit
