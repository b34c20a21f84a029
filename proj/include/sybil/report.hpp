#pragma once

// Output files:
//   cycles.csv   one row per cycle per replication
//   summary.json config echo, pooled and per-replication rates
//   grid.csv     one row per sweep point (means and sample std devs)

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "sybil/config.hpp"
#include "sybil/sim.hpp"

namespace sybil {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr int kSummarySchemaVersion = 1;

inline constexpr const char* kCyclesHeader =
    "replication,cycle,normal_as_normal,normal_as_sybil,sybil_as_sybil,sybil_as_normal,member_packets,edge_packets,"
    "aborted,normal_unjudged,sybil_unjudged,unattributed,pair_changes";

inline constexpr const char* kGridHeader =
    "N,S,C,R,replications,normal_accuracy_mean,normal_accuracy_sd,normal_misclassification_mean,"
    "normal_misclassification_sd,sybil_detection_mean,sybil_detection_sd,pooled_normal_accuracy,"
    "pooled_normal_misclassification,pooled_sybil_detection";

/// Six significant digits.
inline std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string format_metric(const std::optional<double>& v) { return v ? format_metric(*v) : std::string{}; }

inline nlohmann::ordered_json metric_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return std::stod(format_metric(*v));
}

inline void write_cycles_csv(std::ostream& os, const SimulationSummary& s) {
  os << kCyclesHeader << '\n';
  for (const auto& rep : s.replications) {
    for (std::size_t c = 0; c < rep.cycles.size(); ++c) {
      const auto& m = rep.cycles[c];
      os << rep.index << ',' << c << ',' << m.normal_as_normal << ',' << m.normal_as_sybil << ',' << m.sybil_as_sybil
         << ',' << m.sybil_as_normal << ',' << m.member_packets << ',' << m.edge_packets << ',' << (m.aborted ? 1 : 0)
         << ',' << m.normal_unjudged << ',' << m.sybil_unjudged << ',' << m.unattributed << ',' << m.pair_changes
         << '\n';
    }
  }
}

inline nlohmann::ordered_json counts_json(const CycleMetrics& m) {
  nlohmann::ordered_json j;
  j["normal_as_normal"] = m.normal_as_normal;
  j["normal_as_sybil"] = m.normal_as_sybil;
  j["sybil_as_sybil"] = m.sybil_as_sybil;
  j["sybil_as_normal"] = m.sybil_as_normal;
  j["normal_unjudged"] = m.normal_unjudged;
  j["sybil_unjudged"] = m.sybil_unjudged;
  j["unattributed"] = m.unattributed;
  j["member_packets"] = m.member_packets;
  j["edge_packets"] = m.edge_packets;
  j["pair_changes"] = m.pair_changes;
  j["pair_changed_normal_as_sybil"] = m.pair_changed_normal_as_sybil;
  return j;
}

inline nlohmann::ordered_json rates_json(const Rates& r) {
  nlohmann::ordered_json j;
  j["normal_accuracy"] = metric_json(r.normal_accuracy);
  j["normal_misclassification_rate"] = metric_json(r.normal_misclassification);
  j["sybil_detection_rate"] = metric_json(r.sybil_detection);
  return j;
}

inline nlohmann::ordered_json stats_json(const RateStats& s) {
  nlohmann::ordered_json j;
  j["mean"] = metric_json(s.mean);
  j["sd"] = metric_json(s.sd);
  return j;
}

inline nlohmann::ordered_json summary_json(const SimConfig& cfg, const SimulationSummary& s) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSummarySchemaVersion;
  j["version"] = kVersion;
  j["seed"] = cfg.seed;
  nlohmann::ordered_json config;
  for (const auto& [k, v] : echo_config(cfg)) config[k] = v;
  j["config"] = config;

  nlohmann::ordered_json pooled = rates_json(s.pooled);
  pooled["counts"] = counts_json(s.pooled_totals);
  j["pooled"] = pooled;

  nlohmann::ordered_json across;
  across["normal_accuracy"] = stats_json(s.normal_accuracy);
  across["normal_misclassification_rate"] = stats_json(s.normal_misclassification);
  across["sybil_detection_rate"] = stats_json(s.sybil_detection);
  j["across_replications"] = across;

  std::uint64_t aborted = 0;
  std::uint64_t cycles = 0;
  for (const auto& rep : s.replications) {
    cycles += rep.cycles.size();
    for (const auto& c : rep.cycles) aborted += c.aborted ? 1 : 0;
  }
  nlohmann::ordered_json overhead;
  overhead["cycles"] = cycles;
  overhead["aborted_cycles"] = aborted;
  overhead["member_packets"] = s.pooled_totals.member_packets;
  overhead["edge_packets"] = s.pooled_totals.edge_packets;
  j["overhead"] = overhead;

  nlohmann::ordered_json reps = nlohmann::ordered_json::array();
  for (const auto& rep : s.replications) {
    nlohmann::ordered_json r = rates_json(rep.rates);
    r = {{"replication", rep.index}, {"seed", rep.seed}, {"normal_accuracy", r["normal_accuracy"]},
         {"normal_misclassification_rate", r["normal_misclassification_rate"]},
         {"sybil_detection_rate", r["sybil_detection_rate"]}, {"counts", counts_json(rep.totals)}};
    reps.push_back(r);
  }
  j["replications"] = reps;
  return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out << text;
}

/// Writes cycles.csv and summary.json into `dir` (created if needed).
inline void write_run_report(const std::filesystem::path& dir, const SimConfig& cfg, const SimulationSummary& s) {
  std::filesystem::create_directories(dir);
  std::ostringstream csv;
  write_cycles_csv(csv, s);
  write_text(dir / "cycles.csv", csv.str());
  write_text(dir / "summary.json", summary_json(cfg, s).dump(2) + "\n");
}

struct GridPoint {
  SimConfig cfg;
  SimulationSummary summary;
};

inline std::string grid_point_name(const SimConfig& cfg) {
  return "N" + std::to_string(cfg.normal_nodes) + "_S" + std::to_string(cfg.sybil_nodes) + "_C" +
         std::to_string(cfg.edge_units) + "_R" + std::to_string(cfg.cycles);
}

inline void write_grid_row(std::ostream& os, const GridPoint& p) {
  const auto& s = p.summary;
  os << p.cfg.normal_nodes << ',' << p.cfg.sybil_nodes << ',' << p.cfg.edge_units << ',' << p.cfg.cycles << ','
     << p.cfg.replications << ',' << format_metric(s.normal_accuracy.mean) << ',' << format_metric(s.normal_accuracy.sd)
     << ',' << format_metric(s.normal_misclassification.mean) << ',' << format_metric(s.normal_misclassification.sd)
     << ',' << format_metric(s.sybil_detection.mean) << ',' << format_metric(s.sybil_detection.sd) << ','
     << format_metric(s.pooled.normal_accuracy) << ',' << format_metric(s.pooled.normal_misclassification) << ','
     << format_metric(s.pooled.sybil_detection) << '\n';
}

/// Cartesian product N x S x C x R, in that nesting order.
inline std::vector<SimConfig> expand_grid(const GridConfig& grid) {
  std::vector<SimConfig> out;
  for (int n : grid.normal_nodes)
    for (int s : grid.sybil_nodes)
      for (int c : grid.edge_units)
        for (int r : grid.cycles) {
          SimConfig cfg = grid.base;
          cfg.normal_nodes = n;
          cfg.sybil_nodes = s;
          cfg.edge_units = c;
          cfg.cycles = r;
          cfg.validate();
          out.push_back(cfg);
        }
  if (out.empty()) throw Error(ErrorCode::ConfigError, "empty grid");
  return out;
}

/// Runs every grid point, writing points/<name>/{cycles.csv,summary.json}
/// and grid.csv under `dir`.
inline std::vector<GridPoint> run_sweep(const GridConfig& grid, const std::filesystem::path& dir) {
  std::vector<GridPoint> points;
  std::ostringstream table;
  table << kGridHeader << '\n';
  for (const auto& cfg : expand_grid(grid)) {
    GridPoint p{cfg, run_simulation(cfg)};
    write_run_report(dir / "points" / grid_point_name(cfg), cfg, p.summary);
    write_grid_row(table, p);
    points.push_back(std::move(p));
  }
  std::filesystem::create_directories(dir);
  write_text(dir / "grid.csv", table.str());
  return points;
}

}  // namespace sybil
