#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ngkit/capacity.hpp"
#include "ngkit/cell.hpp"
#include "ngkit/decoder.hpp"
#include "ngkit/emu.hpp"
#include "ngkit/fusion.hpp"
#include "ngkit/sim.hpp"
#include "ngkit/tracker.hpp"

namespace ngkit {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Plain-text key-value configuration: `key = value`, '#' comments.
// Cells are sections keyed by id, users by their 16-bit ID:
//   cell.1.bandwidth_mhz = 20
//   ue.0x4601.traffic = constant
// Values listed per README; unknown keys are rejected.

class KeyValueConfig {
public:
  static KeyValueConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  static KeyValueConfig parse(const std::string& text) {
    KeyValueConfig cfg;
    cfg.text_ = text;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto eq = line.find('=');
      if (eq == std::string::npos) {
        if (line.find_first_not_of(" \t\r") != std::string::npos)
          throw DataError("config line " + std::to_string(lineno) +
                          ": expected key = value");
        continue;
      }
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty())
        throw DataError("config line " + std::to_string(lineno) +
                        ": empty key");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
    text_ += "\n" + key + " = " + value;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string require(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("missing config key: " + key);
    return it->second;
  }

  double get_num(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return parse_num(key, it->second);
  }

  double require_num(const std::string& key) const {
    return parse_num(key, require(key));
  }

  // all distinct <id> occurring as prefix.<id>.*
  std::vector<std::string> section_ids(const std::string& prefix) const {
    std::vector<std::string> ids;
    for (const auto& [key, value] : values_) {
      if (key.rfind(prefix + ".", 0) != 0) continue;
      auto rest = key.substr(prefix.size() + 1);
      auto dot = rest.find('.');
      if (dot == std::string::npos) continue;
      std::string id = rest.substr(0, dot);
      bool seen = false;
      for (auto& s : ids) seen = seen || s == id;
      if (!seen) ids.push_back(id);
    }
    return ids;
  }

  const std::string& text() const { return text_; }

  uint64_t content_hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [k, v] : values_) {
      for (char c : k + "=" + v) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
      }
      h ^= 0x1e;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

private:
  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
  }

  static double parse_num(const std::string& key, const std::string& v) {
    try {
      size_t pos = 0;
      double x = v.rfind("0x", 0) == 0
                     ? static_cast<double>(std::stoull(v, &pos, 16))
                     : std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw DataError("config key " + key + ": bad number '" + v + "'");
    }
  }

  std::map<std::string, std::string> values_;
  std::string text_;
};

// Build a simulation scenario from a parsed config.
inline SimScenario scenario_from_config(const KeyValueConfig& cfg) {
  SimScenario sc;
  sc.seed = static_cast<uint64_t>(cfg.get_num("seed", 1));
  sc.duration_ms = static_cast<uint64_t>(cfg.get_num("duration_ms", 1000));
  sc.snr_db = cfg.get_num("snr_db", 10.0);
  sc.ber = cfg.get_num("ber", 0.0);
  sc.ca_spill_threshold_bits =
      cfg.get_num("ca_spill_threshold_bits", sc.ca_spill_threshold_bits);

  for (const std::string& id : cfg.section_ids("cell")) {
    std::string p = "cell." + id + ".";
    auto cell_id = static_cast<uint32_t>(std::stoul(id, nullptr, 0));
    unsigned mhz = static_cast<unsigned>(cfg.get_num(p + "bandwidth_mhz", 20));
    CellRole role = cfg.get(p + "role", "primary") == "secondary"
                        ? CellRole::kSecondaryOnly
                        : CellRole::kPrimaryCapable;
    auto cell = CellConfig::for_bandwidth(cell_id, mhz, role);
    cell.antennas = static_cast<unsigned>(cfg.get_num(p + "antennas", 2));
    sc.cells.push_back(cell);
  }
  std::sort(sc.cells.begin(), sc.cells.end(),
            [](const CellConfig& a, const CellConfig& b) {
              return a.cell_id < b.cell_id;
            });

  for (const std::string& id : cfg.section_ids("ue")) {
    std::string p = "ue." + id + ".";
    UeProfile ue;
    ue.rnti = static_cast<uint16_t>(std::stoul(id, nullptr, 0));
    std::string traffic = cfg.get(p + "traffic", "constant");
    if (traffic == "constant")
      ue.traffic.kind = TrafficModel::Kind::kConstantRate;
    else if (traffic == "bursty")
      ue.traffic.kind = TrafficModel::Kind::kBursty;
    else if (traffic == "web")
      ue.traffic.kind = TrafficModel::Kind::kWebLike;
    else
      throw DataError("unknown traffic model: " + traffic);
    ue.traffic.rate_bps = cfg.get_num(p + "rate_bps", 10e6);
    ue.traffic.on_ms = static_cast<unsigned>(cfg.get_num(p + "on_ms", 200));
    ue.traffic.off_ms = static_cast<unsigned>(cfg.get_num(p + "off_ms", 800));
    ue.traffic.flow_bytes = cfg.get_num(p + "flow_bytes", 250e3);
    ue.traffic.flow_gap_ms = cfg.get_num(p + "flow_gap_ms", 2000);
    ue.streams = static_cast<unsigned>(cfg.get_num(p + "streams", 1));
    ue.mcs_walk.initial = static_cast<unsigned>(cfg.get_num(p + "mcs", 12));
    ue.mcs_walk.lo = static_cast<unsigned>(cfg.get_num(p + "mcs_lo", 0));
    ue.mcs_walk.hi = static_cast<unsigned>(cfg.get_num(p + "mcs_hi", 28));
    ue.mcs_walk.step_prob = cfg.get_num(p + "mcs_step_prob", 0.1);
    ue.mcs_walk.period_ms =
        static_cast<unsigned>(cfg.get_num(p + "mcs_period_ms", 50));
    std::string cells = cfg.get(p + "cells", "");
    if (cells.empty() && !sc.cells.empty())
      ue.ca_cells = {sc.cells.front().cell_id};
    std::istringstream cs(cells);
    std::string tok;
    while (std::getline(cs, tok, ','))
      if (!tok.empty())
        ue.ca_cells.push_back(
            static_cast<uint32_t>(std::stoul(tok, nullptr, 0)));
    sc.ues.push_back(ue);
  }
  if (sc.cells.empty()) throw DataError("config declares no cells");
  return sc;
}

// ---------------------------------------------------------------------------
// CSV helpers and the fixed schemas.

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline constexpr const char* kMessageCsvHeader =
    "sfn,cell_id,rnti,format,L,cce_start,mcs1,mcs2,nof_prb,tbs,ndi,harq";

inline std::string message_csv_row(const DciMessage& m, uint32_t cell_id) {
  char buf[192];
  std::string mcs2 = m.mcs2 ? std::to_string(*m.mcs2) : "";
  std::snprintf(buf, sizeof(buf), "%llu,%u,%u,%s,%u,%u,%u,%s,%u,%u,%u,%u",
                static_cast<unsigned long long>(m.sfn), cell_id, m.rnti,
                format_name(m.format), m.aggregation_level, m.cce_start,
                m.mcs1, mcs2.c_str(), m.nof_prb, m.tbs, m.ndi ? 1 : 0,
                m.harq);
  return buf;
}

struct LoggedMessage {
  DciMessage msg;
  uint32_t cell_id = 0;
  double flip_ratio = 0.0;
  unsigned attempts = 0;
  std::string validated_by;  // decoded logs only
};

inline void write_message_csv(const std::string& path,
                              const std::vector<LoggedMessage>& rows,
                              bool decoded_columns) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << kMessageCsvHeader;
  if (decoded_columns) out << ",flip_ratio,attempts,validated_by";
  out << "\n";
  for (const auto& r : rows) {
    out << message_csv_row(r.msg, r.cell_id);
    if (decoded_columns) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), ",%.4f,%u,%s", r.flip_ratio, r.attempts,
                    r.validated_by.c_str());
      out << buf;
    }
    out << "\n";
  }
}

inline std::vector<LoggedMessage> read_message_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty csv: " + path);
  if (line.rfind(kMessageCsvHeader, 0) != 0)
    throw DataError("unexpected csv header in " + path);
  bool decoded = line.find("validated_by") != std::string::npos;
  std::vector<LoggedMessage> rows;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() < 12)
      throw DataError(path + ": short row at line " + std::to_string(lineno));
    LoggedMessage r;
    try {
      r.msg.sfn = std::stoull(f[0]);
      r.cell_id = static_cast<uint32_t>(std::stoul(f[1]));
      r.msg.rnti = static_cast<uint16_t>(std::stoul(f[2]));
      auto fmt = format_from_name(f[3]);
      if (!fmt) throw std::invalid_argument("format");
      r.msg.format = *fmt;
      r.msg.aggregation_level = static_cast<unsigned>(std::stoul(f[4]));
      r.msg.cce_start = static_cast<unsigned>(std::stoul(f[5]));
      r.msg.mcs1 = static_cast<uint8_t>(std::stoul(f[6]));
      if (!f[7].empty()) r.msg.mcs2 = static_cast<uint8_t>(std::stoul(f[7]));
      r.msg.nof_prb = static_cast<uint8_t>(std::stoul(f[8]));
      r.msg.tbs = static_cast<uint32_t>(std::stoul(f[9]));
      r.msg.ndi = f[10] == "1";
      r.msg.harq = static_cast<uint8_t>(std::stoul(f[11]));
      if (decoded && f.size() >= 15) {
        r.flip_ratio = std::stod(f[12]);
        r.attempts = static_cast<unsigned>(std::stoul(f[13]));
        r.validated_by = f[14];
      }
    } catch (const std::exception&) {
      throw DataError(path + ": bad row at line " + std::to_string(lineno));
    }
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// LLR stream: little-endian binary. Header: cell_id u32, n_cce u32.
// Per subframe: sfn u64, then n_cce * 72 float32 LLRs.

class LlrWriter {
public:
  LlrWriter(const std::string& path, uint32_t cell_id, uint32_t n_cce)
      : out_(path, std::ios::binary), n_cce_(n_cce) {
    if (!out_) throw DataError("cannot write " + path);
    put32(cell_id);
    put32(n_cce);
  }

  void write(const LlrSubframe& sub) {
    if (sub.n_cce != n_cce_) throw DataError("subframe CCE count mismatch");
    uint64_t sfn = sub.sfn;
    out_.write(reinterpret_cast<const char*>(&sfn), 8);
    out_.write(reinterpret_cast<const char*>(sub.llrs.data()),
               static_cast<std::streamsize>(sub.llrs.size() * sizeof(float)));
  }

private:
  void put32(uint32_t v) { out_.write(reinterpret_cast<const char*>(&v), 4); }
  std::ofstream out_;
  uint32_t n_cce_;
};

class LlrReader {
public:
  explicit LlrReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw DataError("cannot open " + path);
    cell_id_ = get32();
    n_cce_ = get32();
    if (!in_ || n_cce_ == 0 || n_cce_ > 4096)
      throw DataError("corrupt LLR stream header in " + path);
  }

  uint32_t cell_id() const { return cell_id_; }
  uint32_t n_cce() const { return n_cce_; }

  std::optional<LlrSubframe> next() {
    uint64_t sfn = 0;
    in_.read(reinterpret_cast<char*>(&sfn), 8);
    if (in_.gcount() == 0) return std::nullopt;
    if (in_.gcount() != 8) throw DataError("truncated LLR stream");
    LlrSubframe sub;
    sub.sfn = sfn;
    sub.cell_id = cell_id_;
    sub.n_cce = n_cce_;
    sub.llrs.resize(static_cast<size_t>(n_cce_) * kCceBits);
    in_.read(reinterpret_cast<char*>(sub.llrs.data()),
             static_cast<std::streamsize>(sub.llrs.size() * sizeof(float)));
    if (static_cast<size_t>(in_.gcount()) != sub.llrs.size() * sizeof(float))
      throw DataError("truncated LLR stream");
    return sub;
  }

private:
  uint32_t get32() {
    uint32_t v = 0;
    in_.read(reinterpret_cast<char*>(&v), 4);
    return v;
  }
  std::ifstream in_;
  uint32_t cell_id_ = 0;
  uint32_t n_cce_ = 0;
};

// ---------------------------------------------------------------------------
// Remaining fixed formats.

inline void write_capacity_csv(
    const std::string& path,
    const std::vector<std::pair<std::string, CapacitySample>>& rows,
    const std::vector<AggregatedCapacity>& ca_rows = {}) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "sfn,cell_id,target_prb,idle_prb,bits_per_prb,capacity_bits\n";
  for (const auto& [cell, s] : rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%llu,%s,%u,%u,%.6f,%.6f\n",
                  static_cast<unsigned long long>(s.sfn), cell.c_str(),
                  s.target_prb, s.idle_prb, s.bits_per_prb, s.capacity_bits);
    out << buf;
  }
  for (const auto& a : ca_rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%llu,CA,,,,%.6f\n",
                  static_cast<unsigned long long>(a.sfn), a.capacity_bits);
    out << buf;
  }
}

inline void write_events_csv(const std::string& path,
                             const std::vector<TrackerEvent>& events) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "sfn,cell_id,rnti,event,primary_cell\n";
  for (const auto& e : events) {
    const char* kind = e.kind == TrackerEvent::Kind::kPromoted   ? "promoted"
                       : e.kind == TrackerEvent::Kind::kExpired ? "expired"
                                                                : "ca_detected";
    out << e.sfn << "," << e.cell_id << "," << e.rnti << "," << kind << ","
        << e.primary_cell << "\n";
  }
}

inline void write_packet_csv(const std::string& path,
                             const std::vector<PacketRecord>& log) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "recv_time_us,size_bytes,one_way_delay_us,seq\n";
  for (const auto& p : log)
    out << p.recv_time_us << "," << p.size_bytes << "," << p.one_way_delay_us
        << "," << p.seq << "\n";
}

inline std::vector<PacketRecord> read_packet_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("recv_time_us", 0) != 0)
    throw DataError("unexpected packet csv header in " + path);
  std::vector<PacketRecord> log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() < 4) throw DataError("short packet row in " + path);
    PacketRecord p;
    p.recv_time_us = std::stoll(f[0]);
    p.size_bytes = static_cast<uint32_t>(std::stoul(f[1]));
    p.one_way_delay_us = std::stoll(f[2]);
    p.seq = std::stoull(f[3]);
    log.push_back(p);
  }
  return log;
}

inline void write_fused_csv(const std::string& path,
                            const std::vector<FusedRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "sfn,rnti,bytes_delivered,retx_flag\n";
  for (const auto& r : rows)
    out << r.sfn << "," << r.rnti << "," << r.bytes_delivered << ","
        << (r.retx ? 1 : 0) << "\n";
}

// One millisecond timestamp per line, packet-delivery-trace layout.
inline void write_link_trace(const std::string& path, const LinkTrace& trace) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (uint64_t t : trace.opportunities_ms) out << t << "\n";
}

inline LinkTrace read_link_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  LinkTrace trace;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      trace.opportunities_ms.push_back(std::stoull(line));
    } catch (const std::exception&) {
      throw DataError(path + ": bad timestamp at line " +
                      std::to_string(lineno));
    }
    if (trace.opportunities_ms.size() > 1 &&
        trace.opportunities_ms.back() <
            trace.opportunities_ms[trace.opportunities_ms.size() - 2])
      throw DataError(path + ": timestamps must be nondecreasing");
  }
  return trace;
}

inline void write_manifest(const std::string& dir, const KeyValueConfig& cfg,
                           uint64_t seed, const std::string& command) {
  std::ofstream out(dir + "/manifest.txt");
  if (!out) throw DataError("cannot write manifest in " + dir);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(cfg.content_hash()));
  out << "command = " << command << "\n"
      << "config_hash = " << buf << "\n"
      << "seed = " << seed << "\n"
      << "version = ngkit 0.1.0\n";
}

}  // namespace ngkit
