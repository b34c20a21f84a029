#pragma once

// Flat dotted-key configuration:
//
//   # comment
//   nodes.normal = 100
//   adversary.policy = fresh
//   failure.scheduled = 1@50, 3@70      # edge@cycle
//
// Every key has a default, so an empty file is a valid baseline run. A JSON
// object (or a summary.json carrying a "config" object) with the same keys is
// accepted as well, which is how a report's config echo is replayed.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sybil/core.hpp"
#include "sybil/sim.hpp"

namespace sybil {

namespace config_detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    auto t = trim(cur);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
T parse_number(const std::string& text, const std::string& where) {
  T value{};
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), last, value);
  if (ec != std::errc{} || ptr != last) {
    throw Error(ErrorCode::ConfigError,
                where + (std::is_floating_point_v<T> ? ": expected a number, got '" : ": expected an integer, got '") +
                    text + "'");
  }
  return value;
}

inline bool parse_bool(const std::string& text, const std::string& where) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
  if (t == "false" || t == "no" || t == "off" || t == "0") return false;
  throw Error(ErrorCode::ConfigError, where + ": expected true/false, got '" + text + "'");
}

}  // namespace config_detail

inline const char* to_string(AdversaryPolicy p) {
  switch (p) {
    case AdversaryPolicy::Fresh: return "fresh";
    case AdversaryPolicy::Steal: return "steal";
    case AdversaryPolicy::Stable: return "stable";
  }
  return "fresh";
}

inline const char* to_string(AbortMode m) { return m == AbortMode::Skip ? "skip" : "rerun"; }

/// Sets one key. `where` prefixes diagnostics (e.g. "run.conf:12").
inline void apply_setting(SimConfig& cfg, const std::string& key, const std::string& value, const std::string& where) {
  using namespace config_detail;
  const std::string at = where + ": " + key;
  if (key == "area.width") cfg.area.width = parse_number<double>(value, at);
  else if (key == "area.height") cfg.area.height = parse_number<double>(value, at);
  else if (key == "nodes.normal") cfg.normal_nodes = parse_number<int>(value, at);
  else if (key == "nodes.sybil") cfg.sybil_nodes = parse_number<int>(value, at);
  else if (key == "edges.count") cfg.edge_units = parse_number<int>(value, at);
  else if (key == "cycles") cfg.cycles = parse_number<int>(value, at);
  else if (key == "mobility.v_max") cfg.v_max = parse_number<double>(value, at);
  else if (key == "mobility.dt_between_rounds") cfg.dt_between_rounds = parse_number<double>(value, at);
  else if (key == "channel.alpha") cfg.alpha = parse_number<double>(value, at);
  else if (key == "channel.gain") cfg.gain = parse_number<double>(value, at);
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(value, at);
  else if (key == "replications") cfg.replications = parse_number<int>(value, at);
  else if (key == "adversary.policy") {
    if (value == "fresh") cfg.policy = AdversaryPolicy::Fresh;
    else if (value == "steal") cfg.policy = AdversaryPolicy::Steal;
    else if (value == "stable") cfg.policy = AdversaryPolicy::Stable;
    else throw Error(ErrorCode::ConfigError, at + ": expected fresh|steal|stable, got '" + value + "'");
  } else if (key == "adversary.cap_identities") cfg.cap_identities = parse_bool(value, at);
  else if (key == "failure.probability") cfg.failure_probability = parse_number<double>(value, at);
  else if (key == "failure.aborted_cycle") {
    if (value == "rerun") cfg.abort_mode = AbortMode::Rerun;
    else if (value == "skip") cfg.abort_mode = AbortMode::Skip;
    else throw Error(ErrorCode::ConfigError, at + ": expected rerun|skip, got '" + value + "'");
  } else if (key == "failure.scheduled") {
    cfg.scheduled_failures.clear();
    for (const auto& item : split(value, ',')) {
      const auto at_sign = item.find('@');
      if (at_sign == std::string::npos) throw Error(ErrorCode::ConfigError, at + ": expected edge@cycle, got '" + item + "'");
      cfg.scheduled_failures.push_back({parse_number<std::uint32_t>(trim(item.substr(0, at_sign)), at),
                                        parse_number<std::uint64_t>(trim(item.substr(at_sign + 1)), at)});
    }
  } else if (key == "resilience.substitutes") cfg.substitutes_enabled = parse_bool(value, at);
  else if (key == "resilience.substitute_offset") cfg.substitute_offset = parse_number<double>(value, at);
  else if (key == "resilience.heartbeat_threshold") cfg.heartbeat_threshold = parse_number<int>(value, at);
  else throw Error(ErrorCode::ConfigError, where + ": unknown key '" + key + "'");
}

/// Effective configuration as ordered (key, value) pairs; parsing these back
/// yields the same SimConfig.
inline std::vector<std::pair<std::string, std::string>> echo_config(const SimConfig& cfg) {
  using config_detail::fmt_double;
  std::string scheduled;
  for (const auto& f : cfg.scheduled_failures) {
    if (!scheduled.empty()) scheduled += ", ";
    scheduled += std::to_string(f.edge) + "@" + std::to_string(f.cycle);
  }
  return {
      {"area.width", fmt_double(cfg.area.width)},
      {"area.height", fmt_double(cfg.area.height)},
      {"nodes.normal", std::to_string(cfg.normal_nodes)},
      {"nodes.sybil", std::to_string(cfg.sybil_nodes)},
      {"edges.count", std::to_string(cfg.edge_units)},
      {"cycles", std::to_string(cfg.cycles)},
      {"mobility.v_max", fmt_double(cfg.v_max)},
      {"mobility.dt_between_rounds", fmt_double(cfg.dt_between_rounds)},
      {"channel.alpha", fmt_double(cfg.alpha)},
      {"channel.gain", fmt_double(cfg.gain)},
      {"seed", std::to_string(cfg.seed)},
      {"adversary.policy", to_string(cfg.policy)},
      {"adversary.cap_identities", cfg.cap_identities ? "true" : "false"},
      {"failure.scheduled", scheduled},
      {"failure.probability", fmt_double(cfg.failure_probability)},
      {"failure.aborted_cycle", to_string(cfg.abort_mode)},
      {"resilience.substitutes", cfg.substitutes_enabled ? "true" : "false"},
      {"resilience.substitute_offset", fmt_double(cfg.substitute_offset)},
      {"resilience.heartbeat_threshold", std::to_string(cfg.heartbeat_threshold)},
      {"replications", std::to_string(cfg.replications)},
  };
}

/// Key/value lines in file order. Lines with an unknown key for the caller's
/// purpose are reported by the caller.
struct ConfigLine {
  std::string key;
  std::string value;
  std::string where;
};

inline std::vector<ConfigLine> read_config_lines(const std::string& text, const std::string& source) {
  using namespace config_detail;
  std::vector<ConfigLine> out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::ConfigError, source + ": " + e.what());
    }
    const nlohmann::json& obj = doc.contains("config") ? doc["config"] : doc;
    if (!obj.is_object()) throw Error(ErrorCode::ConfigError, source + ": expected a JSON object of dotted keys");
    for (const auto& [key, val] : obj.items()) {
      std::string value;
      if (val.is_string()) value = val.get<std::string>();
      else if (val.is_boolean()) value = val.get<bool>() ? "true" : "false";
      else if (val.is_number_integer() || val.is_number_unsigned()) value = val.dump();
      else if (val.is_number_float()) value = fmt_double(val.get<double>());
      else throw Error(ErrorCode::ConfigError, source + ": " + key + ": unsupported value type");
      out.push_back({key, value, source});
    }
    return out;
  }

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno);
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, where + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw Error(ErrorCode::ConfigError, where + ": empty key");
    out.push_back({key, trim(t.substr(eq + 1)), where});
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline SimConfig parse_config(const std::string& text, const std::string& source = "<config>") {
  SimConfig cfg;
  for (const auto& l : read_config_lines(text, source)) apply_setting(cfg, l.key, l.value, l.where);
  cfg.validate();
  return cfg;
}

inline SimConfig load_config(const std::string& path) { return parse_config(read_file(path), path); }

/// Sweep file: the run keys plus axes over N, S, C and R, e.g.
///   sweep.N = 100:500:100     # start:stop:step, inclusive
///   sweep.C = 2, 4, 8
struct GridConfig {
  SimConfig base;
  std::vector<int> normal_nodes;
  std::vector<int> sybil_nodes;
  std::vector<int> edge_units;
  std::vector<int> cycles;
};

inline std::vector<int> parse_axis(const std::string& value, const std::string& where) {
  using namespace config_detail;
  std::vector<int> out;
  if (value.find(':') != std::string::npos) {
    const auto parts = split(value, ':');
    if (parts.size() != 3) throw Error(ErrorCode::ConfigError, where + ": expected start:stop:step");
    const int start = parse_number<int>(parts[0], where);
    const int stop = parse_number<int>(parts[1], where);
    const int step = parse_number<int>(parts[2], where);
    if (step <= 0) throw Error(ErrorCode::ConfigError, where + ": step must be > 0");
    for (int v = start; v <= stop; v += step) out.push_back(v);
  } else {
    for (const auto& item : split(value, ',')) out.push_back(parse_number<int>(item, where));
  }
  if (out.empty()) throw Error(ErrorCode::ConfigError, where + ": empty axis");
  return out;
}

inline GridConfig parse_grid(const std::string& text, const std::string& source = "<grid>") {
  GridConfig grid;
  bool any_axis = false;
  for (const auto& l : read_config_lines(text, source)) {
    const std::string at = l.where + ": " + l.key;
    if (l.key == "sweep.N") grid.normal_nodes = parse_axis(l.value, at);
    else if (l.key == "sweep.S") grid.sybil_nodes = parse_axis(l.value, at);
    else if (l.key == "sweep.C") grid.edge_units = parse_axis(l.value, at);
    else if (l.key == "sweep.R") grid.cycles = parse_axis(l.value, at);
    else {
      apply_setting(grid.base, l.key, l.value, l.where);
      continue;
    }
    any_axis = true;
  }
  if (!any_axis) throw Error(ErrorCode::ConfigError, source + ": empty grid (no sweep.N/S/C/R axis)");
  if (grid.normal_nodes.empty()) grid.normal_nodes = {grid.base.normal_nodes};
  if (grid.sybil_nodes.empty()) grid.sybil_nodes = {grid.base.sybil_nodes};
  if (grid.edge_units.empty()) grid.edge_units = {grid.base.edge_units};
  if (grid.cycles.empty()) grid.cycles = {grid.base.cycles};
  grid.base.validate();
  return grid;
}

inline GridConfig load_grid(const std::string& path) { return parse_grid(read_file(path), path); }

}  // namespace sybil
