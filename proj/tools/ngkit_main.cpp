// ngkit: cellular control-channel telemetry toolkit.
//
// Subcommands cover the full experiment loop: simulate a downlink control
// channel with ground truth, blind-decode the LLR stream, derive
// per-millisecond capacity, and feed the telemetry into congestion-control
// and adaptive-bitrate experiments.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>

#include "ngkit/ngkit.hpp"

using namespace ngkit;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

KeyValueConfig load_config(const std::string& path,
                           const std::vector<std::string>& overrides) {
  KeyValueConfig cfg = KeyValueConfig::parse_file(path);
  for (const auto& kv : overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw UsageError("--set expects key=value, got: " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (const char* env = std::getenv("NGKIT_SEED")) cfg.set("seed", env);
  return cfg;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create output directory " + dir);
}

std::string out_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const std::string& config_path,
                 const std::vector<std::string>& overrides,
                 const std::string& out_dir, const std::string& packets_for,
                 int64_t packet_offset_ms, int64_t packet_owd_us) {
  KeyValueConfig cfg = load_config(config_path, overrides);
  SimScenario sc = scenario_from_config(cfg);
  ensure_dir(out_dir);

  Simulator sim(sc);
  std::vector<std::unique_ptr<LlrWriter>> writers;
  std::vector<std::vector<LoggedMessage>> truth_rows(sc.cells.size());
  std::vector<SubframeTruth> primary_truths;  // packet-log synthesis
  for (const auto& cell : sc.cells)
    writers.push_back(std::make_unique<LlrWriter>(
        out_path(out_dir, "llr_cell" + std::to_string(cell.cell_id) + ".bin"),
        cell.cell_id, cell.n_cce_padded));

  for (uint64_t sfn = 0; sfn < sc.duration_ms; ++sfn) {
    auto out = sim.step(sfn);
    for (size_t c = 0; c < sc.cells.size(); ++c) {
      writers[c]->write(out.subframes[c]);
      for (const auto& m : out.truths[c].messages)
        truth_rows[c].push_back({m, sc.cells[c].cell_id, 0.0, 0, ""});
    }
    if (!packets_for.empty()) primary_truths.push_back(out.truths[0]);
  }
  for (size_t c = 0; c < sc.cells.size(); ++c)
    write_message_csv(
        out_path(out_dir,
                 "truth_cell" + std::to_string(sc.cells[c].cell_id) + ".csv"),
        truth_rows[c], false);
  if (!packets_for.empty()) {
    PacketLogParams plp;
    plp.rnti = static_cast<uint16_t>(std::stoul(packets_for, nullptr, 0));
    plp.clock_offset_ms = packet_offset_ms;
    plp.base_owd_us = packet_owd_us;
    write_packet_csv(out_path(out_dir, "packets.csv"),
                     synth_packet_log(primary_truths, plp));
  }
  write_manifest(out_dir, cfg, sc.seed, "simulate");
  std::cout << "simulated " << sc.duration_ms << " subframes across "
            << sc.cells.size() << " cell(s) into " << out_dir << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fuse

int cmd_fuse(const std::string& packets_path,
             const std::vector<std::string>& decoded_paths, int search_range,
             const std::string& out_dir) {
  ensure_dir(out_dir);
  auto log = read_packet_csv(packets_path);
  if (log.empty()) throw DataError("empty packet log");

  std::map<uint16_t, std::vector<DciMessage>> by_rnti;
  for (const auto& path : decoded_paths)
    for (auto& r : read_message_csv(path))
      by_rnti[r.msg.rnti].push_back(r.msg);
  std::vector<RntiMessageStream> streams;
  for (auto& [rnti, msgs] : by_rnti) streams.push_back({rnti, msgs});
  if (streams.empty()) throw DataError("no messages to associate");

  FusionConfig fc;
  fc.search_range_ms = search_range;
  auto res = associate_rnti(log, streams, fc);
  if (!res) throw DataError("no retransmission events on either side");

  write_fused_csv(out_path(out_dir, "fused.csv"),
                  fuse_streams(by_rnti[res->rnti], res->rnti));
  std::ofstream summary(out_path(out_dir, "association.csv"));
  summary << "rnti,offset_ms,matched,margin,ambiguous\n"
          << res->rnti << "," << res->offset_ms << "," << res->matched << ","
          << res->margin << "," << (res->ambiguous ? 1 : 0) << "\n";
  std::cout << "associated user " << res->rnti << " at offset "
            << res->offset_ms << " ms (" << res->matched
            << " matching retransmissions, margin " << res->margin << ")"
            << (res->ambiguous ? " [ambiguous]" : "") << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// decode

struct DecodedLog {
  std::vector<LoggedMessage> rows;
  std::vector<TrackerEvent> events;
  std::vector<std::array<uint64_t, 3>> stats;  // sfn, attempts, pruned
};

int cmd_decode(const std::string& config_path,
               const std::vector<std::string>& overrides,
               const std::vector<std::string>& llr_paths,
               const std::string& out_dir, unsigned max_attempts,
               unsigned pool) {
  KeyValueConfig cfg = load_config(config_path, overrides);
  SimScenario sc = scenario_from_config(cfg);
  ensure_dir(out_dir);

  std::vector<LlrReader> readers;
  std::vector<CellConfig> cells;
  for (const auto& path : llr_paths) {
    readers.emplace_back(path);
    const CellConfig& cell = sc.cell_by_id(readers.back().cell_id());
    if (readers.back().n_cce() != cell.n_cce_padded)
      throw DataError("LLR stream CCE count does not match cell config");
    cells.push_back(cell);
  }

  WorkerConfig wc;
  wc.pool_size = pool ? pool : static_cast<unsigned>(
                                   cfg.get_num("pipeline.pool_size", 0));
  wc.queue_depth = static_cast<unsigned>(
      cfg.get_num("pipeline.queue_depth", wc.queue_depth));
  wc.snapshot_period_ms = static_cast<unsigned>(
      cfg.get_num("pipeline.snapshot_period_ms", wc.snapshot_period_ms));
  wc.history_subframes = static_cast<unsigned>(
      cfg.get_num("pipeline.history_subframes", wc.history_subframes));
  wc.decoder.max_attempts = max_attempts;
  MultiCellPipeline pipe(cells, wc);

  std::vector<TrackerEvent> ca_events;
  std::set<uint16_t> ca_seen;

  bool done = false;
  while (!done) {
    std::vector<LlrSubframe> batch;
    for (auto& r : readers) {
      auto sub = r.next();
      if (!sub) {
        done = true;
        break;
      }
      batch.push_back(std::move(*sub));
    }
    if (done || batch.size() != readers.size()) break;
    uint64_t sfn = batch.front().sfn;
    pipe.submit_all(std::move(batch));
    for (const auto& [rnti, entry] : pipe.ca_map().entries) {
      if (ca_seen.insert(rnti).second)
        ca_events.push_back({TrackerEvent::Kind::kCaDetected, sfn, 0, rnti,
                             entry.primary_cell()});
    }
  }
  pipe.flush();

  std::vector<TrackerEvent> all_events = std::move(ca_events);
  for (auto& worker : pipe.workers()) {
    DecodedLog log;
    uint32_t cell_id = 0;
    for (auto& fr : worker.drain_ordered(UINT64_MAX)) {
      cell_id = fr.cell_id;
      for (const auto& v : fr.messages)
        log.rows.push_back({v.msg, fr.cell_id, v.flip_ratio, fr.attempts,
                            v.by == ValidatedBy::kAncestor ? "ancestor"
                                                           : "tracker"});
      log.stats.push_back({fr.sfn, fr.attempts, fr.pruned_cces});
    }
    std::sort(log.rows.begin(), log.rows.end(),
              [](const LoggedMessage& a, const LoggedMessage& b) {
                if (a.msg.sfn != b.msg.sfn) return a.msg.sfn < b.msg.sfn;
                if (a.msg.cce_start != b.msg.cce_start)
                  return a.msg.cce_start < b.msg.cce_start;
                return a.msg.rnti < b.msg.rnti;
              });
    write_message_csv(
        out_path(out_dir, "decoded_cell" + std::to_string(cell_id) + ".csv"),
        log.rows, true);
    std::ofstream stats(
        out_path(out_dir, "stats_cell" + std::to_string(cell_id) + ".csv"));
    stats << "sfn,attempts,pruned_cces\n";
    for (auto& s : log.stats)
      stats << s[0] << "," << s[1] << "," << s[2] << "\n";
    for (auto& e : worker.take_events()) all_events.push_back(e);
  }
  std::sort(all_events.begin(), all_events.end(),
            [](const TrackerEvent& a, const TrackerEvent& b) {
              return a.sfn != b.sfn ? a.sfn < b.sfn : a.rnti < b.rnti;
            });
  write_events_csv(out_path(out_dir, "events.csv"), all_events);
  write_manifest(out_dir, cfg, sc.seed, "decode");
  std::cout << "decoded " << llr_paths.size() << " stream(s) into " << out_dir
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// capacity (shared with the emulate telemetry path)

struct CapacityRun {
  std::vector<std::pair<std::string, CapacitySample>> rows;
  std::vector<AggregatedCapacity> ca_rows;
  std::vector<double> trace_bits;   // per ms, aggregated or single-cell
  std::vector<double> mean_util;    // across cells
};

CapacityRun run_capacity(const std::vector<std::string>& decoded_paths,
                         const SimScenario& sc, uint16_t target, bool ca,
                         double drop_p, uint64_t drop_seed, unsigned window) {
  struct PerCell {
    CellConfig cell;
    std::map<uint64_t, std::vector<DciMessage>> by_sfn;
    uint64_t max_sfn = 0;
  };
  std::vector<PerCell> cells;
  for (const auto& path : decoded_paths) {
    auto rows = read_message_csv(path);
    if (rows.empty()) throw DataError("no messages in " + path);
    std::vector<DciMessage> msgs;
    msgs.reserve(rows.size());
    for (auto& r : rows) msgs.push_back(r.msg);
    if (drop_p > 0.0) msgs = drop_messages(msgs, drop_p, drop_seed);
    PerCell pc{sc.cell_by_id(rows.front().cell_id), {}, 0};
    for (auto& m : msgs) {
      pc.by_sfn[m.sfn].push_back(m);
      pc.max_sfn = std::max(pc.max_sfn, m.sfn);
    }
    cells.push_back(std::move(pc));
  }
  uint64_t duration = 0;
  for (auto& pc : cells) duration = std::max(duration, pc.max_sfn + 1);

  std::vector<CapacityEstimator> ests;
  std::vector<CapacitySmoother> smoothers;
  std::vector<uint32_t> ids;
  for (auto& pc : cells) {
    ests.emplace_back(pc.cell, target);
    smoothers.emplace_back(window);
    ids.push_back(pc.cell.cell_id);
  }
  CaAggregator agg(ids);

  CapacityRun run;
  for (uint64_t sfn = 0; sfn < duration; ++sfn) {
    double first_cell_bits = 0.0;
    double util = 0.0;
    for (size_t c = 0; c < cells.size(); ++c) {
      static const std::vector<DciMessage> kNone;
      auto it = cells[c].by_sfn.find(sfn);
      const auto& msgs = it == cells[c].by_sfn.end() ? kNone : it->second;
      auto sample = ests[c].step(sfn, msgs);
      run.rows.push_back({std::to_string(cells[c].cell.cell_id), sample});
      auto smoothed = smoothers[c].push(sample);
      agg.push(cells[c].cell.cell_id, smoothed);
      if (c == 0) first_cell_bits = smoothed.capacity_bits;
      util += cell_utilization(sample, cells[c].cell);
    }
    auto a = agg.emit(sfn);
    if (ca) {
      run.ca_rows.push_back(a);
      run.trace_bits.push_back(a.capacity_bits);
    } else {
      run.trace_bits.push_back(first_cell_bits);
    }
    run.mean_util.push_back(util / static_cast<double>(cells.size()));
  }
  return run;
}

int cmd_capacity(const std::string& config_path,
                 const std::vector<std::string>& overrides,
                 const std::vector<std::string>& decoded_paths,
                 const std::string& target_str, bool ca, double drop_p,
                 uint64_t drop_seed, unsigned window,
                 const std::string& out_dir) {
  KeyValueConfig cfg = load_config(config_path, overrides);
  SimScenario sc = scenario_from_config(cfg);
  ensure_dir(out_dir);
  auto target = static_cast<uint16_t>(std::stoul(target_str, nullptr, 0));

  auto run = run_capacity(decoded_paths, sc, target, ca, drop_p, drop_seed,
                          window);
  write_capacity_csv(out_path(out_dir, "capacity.csv"), run.rows,
                     run.ca_rows);
  write_link_trace(out_path(out_dir, "capacity.trace"),
                   trace_from_capacity(run.trace_bits));
  write_manifest(out_dir, cfg, sc.seed, "capacity");
  std::cout << "capacity over " << run.trace_bits.size() << " subframes ("
            << (ca ? "aggregated" : "single-cell") << ") into " << out_dir
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// emulate

int cmd_emulate(const std::string& trace_path, const std::string& cc,
                const std::string& config_path,
                const std::vector<std::string>& overrides,
                const std::vector<std::string>& decoded_paths,
                const std::string& target_str, uint64_t duration,
                double prop_delay_ms, const std::string& sweep, double drop_p,
                uint64_t drop_seed, unsigned window,
                const std::string& out_dir) {
  ensure_dir(out_dir);
  EmuLink link;
  link.trace = read_link_trace(trace_path);
  link.prop_delay_ms = prop_delay_ms;
  if (duration == 0) duration = link.trace.duration_ms();
  if (duration == 0) throw DataError("empty link trace");

  std::vector<double> drops;
  if (!sweep.empty()) {
    double a = 0, b = 0, step = 0;
    if (std::sscanf(sweep.c_str(), "%lf:%lf:%lf", &a, &b, &step) != 3 ||
        step <= 0)
      throw UsageError("--sweep-drop expects start:end:step");
    for (double p = a; p <= b + 1e-9; p += step) drops.push_back(p);
  } else {
    drops.push_back(drop_p);
  }

  std::ofstream out(out_path(out_dir, "metrics.csv"));
  out << "algorithm,run,throughput_bps,p95_delay_ms\n";

  for (double p : drops) {
    PacingPolicy policy;
    NgccState ngcc_state;
    NgccConfig ngcc_cfg;
    std::vector<double> telemetry_bits, util;
    if (cc == "ngcc") {
      if (decoded_paths.empty() || config_path.empty() || target_str.empty())
        throw UsageError("ngcc needs --config, --decoded and --target");
      KeyValueConfig cfg = load_config(config_path, overrides);
      SimScenario sc = scenario_from_config(cfg);
      auto target = static_cast<uint16_t>(std::stoul(target_str, nullptr, 0));
      auto run = run_capacity(decoded_paths, sc, target,
                              decoded_paths.size() > 1, p, drop_seed, window);
      telemetry_bits = std::move(run.trace_bits);
      util = std::move(run.mean_util);
      policy = [&ngcc_state, &ngcc_cfg, &telemetry_bits, &util](
                   uint64_t now, const SenderFeedback& fb) {
        TelemetrySample sample;
        const TelemetrySample* sp = nullptr;
        if (now < telemetry_bits.size()) {
          sample.capacity_bps = telemetry_bits[now] * 1000.0;
          sample.cell_util = now < util.size() ? util[now] : 0.0;
          sp = &sample;
        }
        return ngcc_step(ngcc_state, ngcc_cfg, sp, static_cast<double>(now),
                         fb.last_rtt_ms);
      };
    } else if (cc == "cubic") {
      auto cubic = std::make_shared<CubicState>();
      auto seen_losses = std::make_shared<uint64_t>(0);
      policy = [cubic, seen_losses](uint64_t now, const SenderFeedback& fb) {
        double rtt_ms = fb.last_rtt_ms > 0 ? fb.last_rtt_ms : fb.min_rtt_ms;
        double rtt_s = std::max(1.0, rtt_ms) / 1000.0;
        while (*seen_losses < fb.losses) {
          cubic_on_loss(*cubic);
          ++*seen_losses;
        }
        double cwnd =
            cubic_on_ack(*cubic, static_cast<double>(now) / 1000.0, rtt_s);
        return cwnd * 8.0 * kMtuBytes / rtt_s;
      };
    } else {
      throw UsageError("--cc must be ngcc or cubic");
    }

    auto res = emulate(link, policy, duration);
    auto m = metrics(res, duration);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%.2f,%.0f,%.3f\n", cc.c_str(), p,
                  m.throughput_bps, m.p95_delay_ms);
    out << buf;
  }
  std::cout << "emulated " << cc << " over " << duration << " ms into "
            << out_dir << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// abr

int cmd_abr(const std::string& capacity_trace, const std::string& policy_arg,
            const std::string& qoe_arg, unsigned chunks, double chunk_s,
            unsigned runs, const std::string& out_dir) {
  ensure_dir(out_dir);
  LinkTrace link = read_link_trace(capacity_trace);
  if (link.opportunities_ms.empty()) throw DataError("empty capacity trace");
  // back to a bits-per-ms series
  std::vector<double> cap(link.duration_ms(), 0.0);
  for (uint64_t t : link.opportunities_ms) cap[t] += 8.0 * kMtuBytes;

  VideoSpec spec;
  spec.n_chunks = chunks;
  spec.chunk_s = chunk_s;

  std::vector<std::string> policies;
  if (policy_arg == "all")
    policies = {"mpc", "ngmpc", "buffer"};
  else
    policies = {policy_arg};
  std::vector<QoeMapping> mappings;
  if (qoe_arg == "all")
    mappings = {QoeMapping::kLinear, QoeMapping::kLog, QoeMapping::kHd};
  else if (qoe_arg == "linear")
    mappings = {QoeMapping::kLinear};
  else if (qoe_arg == "log")
    mappings = {QoeMapping::kLog};
  else if (qoe_arg == "hd")
    mappings = {QoeMapping::kHd};
  else
    throw UsageError("--qoe must be linear, log, hd or all");

  std::ofstream sessions(out_path(out_dir, "sessions.csv"));
  sessions << "policy,metric,run,chunk,rung,bitrate_bps,download_s,"
              "rebuffer_s,buffer_s\n";
  std::ofstream qoecsv(out_path(out_dir, "qoe.csv"));
  qoecsv << "policy,metric,mean,stdev\n";

  for (const auto& pol : policies) {
    for (QoeMapping mapping : mappings) {
      QoeParams qp = QoeParams::preset(mapping);
      const char* mname = mapping == QoeMapping::kLinear ? "linear"
                          : mapping == QoeMapping::kLog  ? "log"
                                                         : "hd";
      std::vector<double> scores;
      for (unsigned run = 0; run < runs; ++run) {
        // rotate the trace so each run sees a different phase
        std::vector<double> rotated(cap.size());
        size_t shift = (1009ull * run) % cap.size();
        for (size_t i = 0; i < cap.size(); ++i)
          rotated[i] = cap[(i + shift) % cap.size()];

        AbrPolicy policy;
        DownloadParams params;
        if (pol == "mpc") {
          policy = make_mpc_policy(spec, qp);
        } else if (pol == "ngmpc") {
          policy = make_ngmpc_policy(spec, qp);
          params.telemetry_bits_per_ms = rotated;
        } else if (pol == "buffer") {
          policy = make_buffer_policy(spec);
        } else {
          throw UsageError("--policy must be mpc, ngmpc, buffer or all");
        }
        auto log = download_sim(spec, policy, rotated, params);
        scores.push_back(qoe(log, qp, spec));
        for (size_t c = 0; c < log.chunks.size(); ++c) {
          const auto& ch = log.chunks[c];
          char buf[200];
          std::snprintf(buf, sizeof(buf),
                        "%s,%s,%u,%zu,%u,%.0f,%.3f,%.3f,%.3f\n", pol.c_str(),
                        mname, run, c, ch.rung, ch.bitrate_bps, ch.download_s,
                        ch.rebuffer_s, ch.buffer_after_s);
          sessions << buf;
        }
      }
      double mean = 0.0;
      for (double s : scores) mean += s;
      mean /= static_cast<double>(scores.size());
      double var = 0.0;
      for (double s : scores) var += (s - mean) * (s - mean);
      double stdev =
          scores.size() > 1
              ? std::sqrt(var / (static_cast<double>(scores.size()) - 1))
              : 0.0;
      char buf[120];
      std::snprintf(buf, sizeof(buf), "%s,%s,%.4f,%.4f\n", pol.c_str(), mname,
                    mean, stdev);
      qoecsv << buf;
    }
  }
  std::cout << "abr sessions into " << out_dir << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bench

int cmd_bench(const std::string& config_path,
              const std::vector<std::string>& overrides,
              const std::string& llr_path, const std::string& out_dir) {
  KeyValueConfig cfg = load_config(config_path, overrides);
  SimScenario sc = scenario_from_config(cfg);
  ensure_dir(out_dir);
  LlrReader reader(llr_path);
  const CellConfig& cell = sc.cell_by_id(reader.cell_id());

  CellWorker worker(cell);
  std::map<unsigned, uint64_t> hist;
  std::vector<unsigned> attempts;
  while (auto sub = reader.next()) worker.submit(std::move(*sub));
  worker.flush();
  for (auto& fr : worker.drain_ordered(UINT64_MAX)) {
    ++hist[fr.attempts];
    attempts.push_back(fr.attempts);
  }
  std::ofstream out(out_path(out_dir, "attempts.csv"));
  out << "attempts,count\n";
  for (auto& [a, n] : hist) out << a << "," << n << "\n";
  if (attempts.empty()) {
    std::cout << "empty corpus\n";
    return kExitOk;
  }
  std::sort(attempts.begin(), attempts.end());
  auto pct = [&](double q) {
    size_t rank = static_cast<size_t>(
        std::ceil(q * static_cast<double>(attempts.size())));
    return attempts[std::max<size_t>(rank, 1) - 1];
  };
  std::ofstream summary(out_path(out_dir, "attempts_summary.csv"));
  summary << "p50,p90,p99,max,subframes\n";
  summary << pct(0.50) << "," << pct(0.90) << "," << pct(0.99) << ","
          << attempts.back() << "," << attempts.size() << "\n";
  std::cout << "bench: p99 attempts = " << pct(0.99) << " over "
            << attempts.size() << " subframes\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cellular control-channel telemetry toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", trace_path, target, cc = "ngcc";
  std::string policy = "all", qoe_metric = "all", sweep;
  std::vector<std::string> overrides, llr_paths, decoded_paths;
  unsigned max_attempts = 0, pool = 0, window = 100, chunks = 48, runs = 1;
  double drop_p = 0.0, prop_delay = 10.0, chunk_s = 4.0;
  uint64_t duration = 0, drop_seed = 1;
  bool ca = false;
  std::string packets_for, packets_path;
  int64_t packet_offset = 0, packet_owd = 20000;
  int search_range = 500;

  auto* sim = app.add_subcommand("simulate", "generate ground truth + LLRs");
  sim->add_option("--config", config_path)->required();
  sim->add_option("--set", overrides, "override config keys (key=value)");
  sim->add_option("--out", out_dir)->required();
  sim->add_option("--packets", packets_for,
                  "also emit a packet log for this user (primary cell)");
  sim->add_option("--packet-offset", packet_offset,
                  "receiver clock offset (ms) baked into the packet log");
  sim->add_option("--packet-owd", packet_owd, "base one-way delay (us)");

  auto* dec = app.add_subcommand("decode", "blind-decode LLR streams");
  dec->add_option("--config", config_path)->required();
  dec->add_option("--set", overrides);
  dec->add_option("--llr", llr_paths, "LLR stream file(s)")->required();
  dec->add_option("--out", out_dir)->required();
  dec->add_option("--max-attempts", max_attempts,
                  "cap Viterbi runs per subframe (0 = unlimited)");
  dec->add_option("--pool", pool, "decoder threads (0 = auto)");

  auto* cap = app.add_subcommand("capacity", "per-ms capacity from a log");
  cap->add_option("--config", config_path)->required();
  cap->add_option("--set", overrides);
  cap->add_option("--decoded", decoded_paths, "decoded/truth CSV(s)")
      ->required();
  cap->add_option("--target", target, "target user ID")->required();
  cap->add_flag("--ca", ca, "aggregate across the given cells");
  cap->add_option("--drop", drop_p, "drop fraction of messages first");
  cap->add_option("--drop-seed", drop_seed);
  cap->add_option("--window", window, "smoothing window (subframes)");
  cap->add_option("--out", out_dir)->required();

  auto* emu = app.add_subcommand("emulate", "trace-driven link emulation");
  emu->add_option("--trace", trace_path, "delivery opportunity trace")
      ->required();
  emu->add_option("--cc", cc, "ngcc or cubic");
  emu->add_option("--config", config_path);
  emu->add_option("--set", overrides);
  emu->add_option("--decoded", decoded_paths, "telemetry source log(s)");
  emu->add_option("--target", target);
  emu->add_option("--duration", duration, "ms (default: trace length)");
  emu->add_option("--prop-delay", prop_delay, "one-way propagation (ms)");
  emu->add_option("--drop", drop_p, "telemetry message drop fraction");
  emu->add_option("--drop-seed", drop_seed);
  emu->add_option("--sweep-drop", sweep, "start:end:step drop sweep");
  emu->add_option("--window", window);
  emu->add_option("--out", out_dir)->required();

  auto* abr =
      app.add_subcommand("abr", "chunked video streaming over a trace");
  abr->add_option("--trace", trace_path, "capacity trace file")->required();
  abr->add_option("--policy", policy, "mpc, ngmpc, buffer or all");
  abr->add_option("--qoe", qoe_metric, "linear, log, hd or all");
  abr->add_option("--chunks", chunks);
  abr->add_option("--chunk-seconds", chunk_s);
  abr->add_option("--runs", runs, "sessions per policy/metric");
  abr->add_option("--out", out_dir)->required();

  auto* fuse = app.add_subcommand(
      "fuse", "associate a packet log with a decoded user");
  fuse->add_option("--packets", packets_path, "packet log CSV")->required();
  fuse->add_option("--decoded", decoded_paths, "decoded/truth CSV(s)")
      ->required();
  fuse->add_option("--search-range", search_range, "offset range (ms)");
  fuse->add_option("--out", out_dir)->required();

  auto* bench = app.add_subcommand("bench", "attempt-count benchmark");
  bench->add_option("--config", config_path)->required();
  bench->add_option("--set", overrides);
  bench->add_option("--llr", llr_paths, "LLR corpus")->required();
  bench->add_option("--out", out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (sim->parsed())
      return cmd_simulate(config_path, overrides, out_dir, packets_for,
                          packet_offset, packet_owd);
    if (dec->parsed())
      return cmd_decode(config_path, overrides, llr_paths, out_dir,
                        max_attempts, pool);
    if (cap->parsed())
      return cmd_capacity(config_path, overrides, decoded_paths, target, ca,
                          drop_p, drop_seed, window, out_dir);
    if (emu->parsed())
      return cmd_emulate(trace_path, cc, config_path, overrides,
                         decoded_paths, target, duration, prop_delay, sweep,
                         drop_p, drop_seed, window, out_dir);
    if (abr->parsed())
      return cmd_abr(trace_path, policy, qoe_metric, chunks, chunk_s, runs,
                     out_dir);
    if (fuse->parsed())
      return cmd_fuse(packets_path, decoded_paths, search_range, out_dir);
    if (bench->parsed())
      return cmd_bench(config_path, overrides, llr_paths.front(), out_dir);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
