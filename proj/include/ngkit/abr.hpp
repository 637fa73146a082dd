#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace ngkit {

struct VideoSpec {
  unsigned n_chunks = 48;
  double chunk_s = 4.0;
  std::vector<double> ladder_bps = {300e3, 750e3, 1200e3,
                                    1850e3, 2850e3, 4300e3};
  double buffer_cap_s = 60.0;

  double chunk_bits(unsigned rung) const { return ladder_bps[rung] * chunk_s; }
  unsigned top_rung() const {
    return static_cast<unsigned>(ladder_bps.size()) - 1;
  }
};

enum class QoeMapping : uint8_t { kLinear, kLog, kHd };

struct QoeParams {
  QoeMapping mapping = QoeMapping::kLinear;
  double rebuffer_penalty = 4.3;  // defaults: 4.3 linear, 2.66 log, 8 HD
  // The smoothness term is |q(R_{n+1}) - q(R_n)| by default; the variant
  // additionally weighs each switch by the rebuffer time.
  bool rebuffer_weighted_smoothness = false;
  std::vector<double> hd_table = {1, 2, 3, 12, 15, 20};

  static QoeParams preset(QoeMapping m) {
    QoeParams p;
    p.mapping = m;
    p.rebuffer_penalty =
        m == QoeMapping::kLinear ? 4.3 : (m == QoeMapping::kLog ? 2.66 : 8.0);
    return p;
  }
};

// Per-chunk quality score.
inline double qoe_quality(const QoeParams& p, const VideoSpec& spec,
                          unsigned rung) {
  switch (p.mapping) {
    case QoeMapping::kLinear: return spec.ladder_bps[rung] / 1e6;
    case QoeMapping::kLog:
      return std::log(spec.ladder_bps[rung] / spec.ladder_bps.front());
    case QoeMapping::kHd: return p.hd_table[rung];
  }
  return 0.0;
}

struct ChunkRecord {
  unsigned rung = 0;
  double bitrate_bps = 0.0;
  double download_s = 0.0;
  double rebuffer_s = 0.0;
  double buffer_after_s = 0.0;
};

struct SessionLog {
  std::vector<ChunkRecord> chunks;
  bool stalled = false;  // a download exceeded the stall guard
};

// Session score: total quality minus the rebuffering penalty minus the
// quality-switch penalty.
inline double qoe(const SessionLog& session, const QoeParams& p,
                  const VideoSpec& spec) {
  double quality = 0.0, rebuf = 0.0, smooth = 0.0;
  for (size_t n = 0; n < session.chunks.size(); ++n) {
    const auto& c = session.chunks[n];
    quality += qoe_quality(p, spec, c.rung);
    rebuf += c.rebuffer_s;
    if (n + 1 < session.chunks.size()) {
      double dq = std::fabs(qoe_quality(p, spec, session.chunks[n + 1].rung) -
                            qoe_quality(p, spec, c.rung));
      smooth += p.rebuffer_weighted_smoothness ? c.rebuffer_s * dq : dq;
    }
  }
  return quality - p.rebuffer_penalty * rebuf - smooth;
}

// ---------------------------------------------------------------------------
// Policies. Each decision sees the download history, the buffer level and
// (for the telemetry policy) the current measured capacity.

struct AbrContext {
  std::span<const double> speed_history_bps;  // completed chunk downloads
  double buffer_s = 0.0;
  std::optional<unsigned> last_rung;
  unsigned chunk_index = 0;
  unsigned chunks_left = 0;
  std::optional<double> telemetry_bps;  // fresh telemetry, when available
};

using AbrPolicy = std::function<unsigned(const AbrContext&)>;

inline double harmonic_mean_bps(std::span<const double> speeds,
                                unsigned window) {
  if (speeds.empty()) return 0.0;
  size_t n = std::min<size_t>(window, speeds.size());
  double inv = 0.0;
  for (size_t i = speeds.size() - n; i < speeds.size(); ++i)
    inv += 1.0 / std::max(1.0, speeds[i]);
  return static_cast<double>(n) / inv;
}

struct MpcConfig {
  unsigned horizon = 5;
  unsigned harmonic_window = 5;
  double startup_estimate_bps = 1e6;
};

// Exhaustive model-predictive search over the ladder sequences of the
// horizon, scoring with the session QoE terms under a constant capacity
// estimate. Sequences enumerate with the first chunk's rung varying
// fastest and only strictly better scores replace the incumbent, so ties
// resolve toward the lowest first rung.
inline std::vector<unsigned> mpc_plan_sequence(
    const VideoSpec& spec, const QoeParams& qp, const MpcConfig& cfg,
    double est_bps, double buffer_s, std::optional<unsigned> last_rung,
    unsigned chunks_left) {
  const unsigned rungs = static_cast<unsigned>(spec.ladder_bps.size());
  const unsigned depth = std::min(cfg.horizon, std::max(1u, chunks_left));
  est_bps = std::max(1.0, est_bps);

  unsigned total = 1;
  for (unsigned i = 0; i < depth; ++i) total *= rungs;

  double best_score = 0.0;
  std::vector<unsigned> best_seq;
  for (unsigned seq = 0; seq < total; ++seq) {
    unsigned code = seq;
    double buf = buffer_s, score = 0.0;
    std::optional<unsigned> prev = last_rung;
    std::vector<unsigned> chosen;
    chosen.reserve(depth);
    for (unsigned step = 0; step < depth; ++step) {
      unsigned rung = code % rungs;
      code /= rungs;
      chosen.push_back(rung);
      double dl = spec.chunk_bits(rung) / est_bps;
      double rebuf = std::max(0.0, dl - buf);
      buf = std::min(std::max(buf - dl, 0.0) + spec.chunk_s,
                     spec.buffer_cap_s);
      score += qoe_quality(qp, spec, rung) - qp.rebuffer_penalty * rebuf;
      if (prev)
        score -= std::fabs(qoe_quality(qp, spec, rung) -
                           qoe_quality(qp, spec, *prev));
      prev = rung;
    }
    if (best_seq.empty() || score > best_score + 1e-12) {
      best_score = score;
      best_seq = std::move(chosen);
    }
  }
  return best_seq;
}

inline unsigned mpc_plan(const VideoSpec& spec, const QoeParams& qp,
                         const MpcConfig& cfg, double est_bps,
                         double buffer_s, std::optional<unsigned> last_rung,
                         unsigned chunks_left) {
  return mpc_plan_sequence(spec, qp, cfg, est_bps, buffer_s, last_rung,
                           chunks_left)
      .front();
}

inline AbrPolicy make_mpc_policy(const VideoSpec& spec, const QoeParams& qp,
                                 MpcConfig cfg = {}) {
  return [spec, qp, cfg](const AbrContext& ctx) {
    double est = ctx.speed_history_bps.empty()
                     ? cfg.startup_estimate_bps
                     : harmonic_mean_bps(ctx.speed_history_bps,
                                         cfg.harmonic_window);
    return mpc_plan(spec, qp, cfg, est, ctx.buffer_s, ctx.last_rung,
                    ctx.chunks_left);
  };
}

// Identical search, but the capacity estimate is the live telemetry; the
// harmonic mean remains the stale-telemetry fallback.
inline AbrPolicy make_ngmpc_policy(const VideoSpec& spec, const QoeParams& qp,
                                   MpcConfig cfg = {}) {
  return [spec, qp, cfg](const AbrContext& ctx) {
    double est;
    if (ctx.telemetry_bps) {
      est = *ctx.telemetry_bps;
    } else if (!ctx.speed_history_bps.empty()) {
      est = harmonic_mean_bps(ctx.speed_history_bps, cfg.harmonic_window);
    } else {
      est = cfg.startup_estimate_bps;
    }
    return mpc_plan(spec, qp, cfg, est, ctx.buffer_s, ctx.last_rung,
                    ctx.chunks_left);
  };
}

// Buffer-level ladder: lowest rung below the reservoir, highest above the
// cushion, linear in between.
inline AbrPolicy make_buffer_policy(const VideoSpec& spec,
                                    double reservoir_s = 5.0,
                                    double cushion_s = 15.0) {
  return [spec, reservoir_s, cushion_s](const AbrContext& ctx) {
    if (ctx.buffer_s <= reservoir_s) return 0u;
    unsigned top = spec.top_rung();
    if (ctx.buffer_s >= reservoir_s + cushion_s) return top;
    double f = (ctx.buffer_s - reservoir_s) / cushion_s;
    return static_cast<unsigned>(f * top);
  };
}

// ---------------------------------------------------------------------------
// Sequential chunk download over a capacity series (bits per millisecond,
// looped when shorter than the session). Playback starts with the first
// finished chunk; rebuffering accrues whenever the buffer runs dry.

struct DownloadParams {
  double rtt_ms = 40.0;  // per-chunk request latency
  std::span<const double> telemetry_bits_per_ms = {};  // for NG policies
  uint64_t stall_guard_ms = 600000;  // give up on a chunk after this
};

inline SessionLog download_sim(const VideoSpec& spec, const AbrPolicy& policy,
                               std::span<const double> capacity_bits_per_ms,
                               const DownloadParams& params = {}) {
  if (capacity_bits_per_ms.empty())
    throw std::invalid_argument("download_sim: empty capacity series");
  SessionLog log;
  double buffer_s = 0.0;
  uint64_t now_ms = 0;
  std::vector<double> speeds;
  std::optional<unsigned> last_rung;

  for (unsigned n = 0; n < spec.n_chunks; ++n) {
    AbrContext ctx;
    ctx.speed_history_bps = speeds;
    ctx.buffer_s = buffer_s;
    ctx.last_rung = last_rung;
    ctx.chunk_index = n;
    ctx.chunks_left = spec.n_chunks - n;
    if (!params.telemetry_bits_per_ms.empty()) {
      size_t idx = std::min<size_t>(now_ms,
                                    params.telemetry_bits_per_ms.size() - 1);
      ctx.telemetry_bps = params.telemetry_bits_per_ms[idx] * 1000.0;
    }
    unsigned rung = std::min(policy(ctx), spec.top_rung());

    // fetch: request latency plus capacity-limited transfer
    double need_bits = spec.chunk_bits(rung);
    uint64_t start_ms = now_ms;
    double elapsed_rtt = params.rtt_ms;
    bool gave_up = false;
    while (need_bits > 0) {
      double avail =
          capacity_bits_per_ms[now_ms % capacity_bits_per_ms.size()];
      if (elapsed_rtt > 0) {
        elapsed_rtt -= 1.0;
      } else {
        need_bits -= avail;
      }
      ++now_ms;
      if (now_ms - start_ms > params.stall_guard_ms) {
        gave_up = true;  // starved link: end the session with the flag up
        break;
      }
    }
    double dl_s = static_cast<double>(now_ms - start_ms) / 1000.0;
    if (gave_up) {
      ChunkRecord rec;
      rec.rung = rung;
      rec.bitrate_bps = spec.ladder_bps[rung];
      rec.download_s = dl_s;
      rec.rebuffer_s = n == 0 ? dl_s : std::max(0.0, dl_s - buffer_s);
      rec.buffer_after_s = 0.0;
      log.chunks.push_back(rec);
      log.stalled = true;
      return log;
    }

    ChunkRecord rec;
    rec.rung = rung;
    rec.bitrate_bps = spec.ladder_bps[rung];
    rec.download_s = dl_s;
    rec.rebuffer_s = n == 0 ? 0.0 : std::max(0.0, dl_s - buffer_s);
    buffer_s = std::max(buffer_s - dl_s, 0.0) + spec.chunk_s;
    if (buffer_s > spec.buffer_cap_s) {
      // wait out the excess before requesting the next chunk
      double wait_s = buffer_s - spec.buffer_cap_s;
      now_ms += static_cast<uint64_t>(std::llround(wait_s * 1000.0));
      buffer_s = spec.buffer_cap_s;
    }
    rec.buffer_after_s = buffer_s;
    log.chunks.push_back(rec);

    speeds.push_back(spec.chunk_bits(rung) / std::max(1e-9, dl_s));
    last_rung = rung;
  }
  return log;
}

}  // namespace ngkit
