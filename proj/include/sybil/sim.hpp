#pragma once

// World orchestration. Ground truth lives only in Device; the detectors see
// packets and RSSI values and nothing else.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <numbers>
#include <span>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "sybil/channel.hpp"
#include "sybil/core.hpp"
#include "sybil/geometry.hpp"
#include "sybil/mobility.hpp"
#include "sybil/protocol.hpp"
#include "sybil/resilience.hpp"

namespace sybil {

enum class AdversaryPolicy { Fresh, Steal, Stable };
enum class AbortMode { Rerun, Skip };

struct ScheduledFailure {
  std::uint32_t edge{};
  std::uint64_t cycle{};
  friend bool operator==(const ScheduledFailure&, const ScheduledFailure&) = default;
};

struct SimConfig {
  Area area;
  int normal_nodes{100};
  int sybil_nodes{20};
  int edge_units{4};
  int cycles{100};
  double v_max{0.5};
  double dt_between_rounds{60.0};
  double alpha{2.0};
  double gain{1.0};
  std::uint64_t seed{1};
  AdversaryPolicy policy{AdversaryPolicy::Fresh};
  bool cap_identities{false};
  std::vector<ScheduledFailure> scheduled_failures;
  double failure_probability{0.0};
  AbortMode abort_mode{AbortMode::Rerun};
  bool substitutes_enabled{true};
  double substitute_offset{1.0};
  int heartbeat_threshold{1};
  int replications{50};
  int threads{0};  // 0: hardware concurrency; results never depend on it

  ChannelParams channel() const { return {gain, alpha}; }
  double reach_radius() const { return displacement_bound(v_max, dt_between_rounds); }

  /// Throws ConfigError naming every offending field.
  void validate() const {
    std::string problems;
    auto bad = [&](bool cond, const char* field, const char* rule) {
      if (cond) problems += std::string(problems.empty() ? "" : "; ") + field + ": " + rule;
    };
    bad(!(area.width > 0.0 && area.height > 0.0), "area", "width and height must be > 0");
    bad(normal_nodes < 0, "nodes.normal", "must be >= 0");
    bad(sybil_nodes < 0, "nodes.sybil", "must be >= 0");
    bad(edge_units < 2, "edges.count", "must be >= 2");
    bad(cycles < 1, "cycles", "must be >= 1");
    bad(!(v_max >= 0.0), "mobility.v_max", "must be >= 0");
    bad(!(dt_between_rounds > 0.0), "mobility.dt_between_rounds", "must be > 0");
    bad(!(alpha >= 1.6 && alpha <= 3.5), "channel.alpha", "must lie in [1.6, 3.5]");
    bad(!(gain > 0.0), "channel.gain", "must be > 0");
    bad(!(failure_probability >= 0.0 && failure_probability <= 1.0), "failure.probability", "must lie in [0, 1]");
    bad(substitutes_enabled && !(substitute_offset > 0.0), "resilience.substitute_offset", "must be > 0");
    bad(heartbeat_threshold < 1, "resilience.heartbeat_threshold", "must be >= 1");
    bad(replications < 1, "replications", "must be >= 1");
    bad(threads < 0, "threads", "must be >= 0");
    for (const auto& f : scheduled_failures) {
      bad(static_cast<int>(f.edge) >= edge_units, "failure.scheduled", "edge index out of range");
    }
    if (!problems.empty()) throw Error(ErrorCode::ConfigError, problems);
  }
};

/// Fixed layout: C=2 on the horizontal midline, C=4 at the inner-square
/// corners (quarter points), C=8 adds that square's side midpoints. Other
/// counts sit evenly on a circle of a quarter of the shorter side.
inline std::vector<Position> edge_layout(int count, const Area& area) {
  const double w = area.width;
  const double h = area.height;
  std::vector<Position> out;
  if (count == 2) {
    out = {{0.25 * w, 0.5 * h}, {0.75 * w, 0.5 * h}};
  } else if (count == 4 || count == 8) {
    out = {{0.25 * w, 0.25 * h}, {0.75 * w, 0.25 * h}, {0.25 * w, 0.75 * h}, {0.75 * w, 0.75 * h}};
    if (count == 8) {
      out.insert(out.end(), {{0.5 * w, 0.25 * h}, {0.75 * w, 0.5 * h}, {0.5 * w, 0.75 * h}, {0.25 * w, 0.5 * h}});
    }
  } else {
    const double radius = 0.25 * std::min(w, h);
    for (int i = 0; i < count; ++i) {
      const double a = 2.0 * std::numbers::pi * i / count;
      out.push_back({0.5 * w + radius * std::cos(a), 0.5 * h + radius * std::sin(a)});
    }
  }
  return out;
}

enum class Truth { Normal, Sybil };

struct Device {
  Truth truth{Truth::Normal};
  NodeId registered_id{};  // normal devices only
  WaypointState mobility;
  std::optional<NodeId> stable_id;
  std::vector<NodeId> forged;  // identities used so far, for the capped budget
  std::size_t forged_cursor{0};
};

struct CycleMetrics {
  std::uint64_t normal_as_normal{};
  std::uint64_t normal_as_sybil{};
  std::uint64_t sybil_as_sybil{};
  std::uint64_t sybil_as_normal{};
  std::uint64_t normal_unjudged{};  // sent round 2 but got no verdict (lost packets, dead edge)
  std::uint64_t sybil_unjudged{};
  std::uint64_t unattributed{};
  std::uint64_t member_packets{};
  std::uint64_t edge_packets{};
  std::uint64_t pair_changes{};  // nearest pair at round 2 differs from the pinned pair
  std::uint64_t pair_changed_normal_as_sybil{};
  bool aborted{false};

  CycleMetrics& operator+=(const CycleMetrics& o) {
    normal_as_normal += o.normal_as_normal;
    normal_as_sybil += o.normal_as_sybil;
    sybil_as_sybil += o.sybil_as_sybil;
    sybil_as_normal += o.sybil_as_normal;
    normal_unjudged += o.normal_unjudged;
    sybil_unjudged += o.sybil_unjudged;
    unattributed += o.unattributed;
    member_packets += o.member_packets;
    edge_packets += o.edge_packets;
    pair_changes += o.pair_changes;
    pair_changed_normal_as_sybil += o.pair_changed_normal_as_sybil;
    aborted = aborted || o.aborted;
    return *this;
  }

  std::uint64_t normal_total() const { return normal_as_normal + normal_as_sybil + normal_unjudged; }
  std::uint64_t sybil_total() const { return sybil_as_sybil + sybil_as_normal + sybil_unjudged; }
  std::uint64_t verdicts() const { return normal_as_normal + normal_as_sybil + sybil_as_sybil + sybil_as_normal; }
};

/// Rates over a metrics total; empty when the denominator is zero.
struct Rates {
  std::optional<double> normal_accuracy;
  std::optional<double> normal_misclassification;
  std::optional<double> sybil_detection;
};

inline Rates rates_of(const CycleMetrics& m) {
  Rates r;
  if (const auto n = m.normal_total(); n > 0) {
    r.normal_accuracy = static_cast<double>(m.normal_as_normal) / static_cast<double>(n);
    r.normal_misclassification = static_cast<double>(m.normal_as_sybil) / static_cast<double>(n);
  }
  if (const auto s = m.sybil_total(); s > 0) {
    r.sybil_detection = static_cast<double>(m.sybil_as_sybil) / static_cast<double>(s);
  }
  return r;
}

inline void score(CycleMetrics& m, Verdict v, std::optional<Truth> truth) {
  if (!truth) {
    ++m.unattributed;
    return;
  }
  const bool flagged = v == Verdict::Sybil;
  if (*truth == Truth::Normal) {
    ++(flagged ? m.normal_as_sybil : m.normal_as_normal);
  } else {
    ++(flagged ? m.sybil_as_sybil : m.sybil_as_normal);
  }
}

/// Confusion counts at identity granularity. NewMember counts as Normal.
inline CycleMetrics compute_metrics(std::span<const std::pair<NodeId, Verdict>> verdicts,
                                    const std::map<NodeId, Truth>& truth) {
  CycleMetrics m;
  for (const auto& [id, v] : verdicts) {
    const auto it = truth.find(id);
    score(m, v, it == truth.end() ? std::nullopt : std::optional<Truth>(it->second));
  }
  return m;
}

struct AdversaryContext {
  std::uint64_t next_fresh{};
  int normal_count{};
  bool cap_identities{false};
};

/// Identity a Sybil device puts in its packet for one round.
inline NodeId adversary_emit(AdversaryPolicy policy, Device& device, Round /*round*/, Rng& rng,
                             AdversaryContext& ctx) {
  auto fresh = [&]() {
    const bool capped = ctx.cap_identities && ctx.normal_count > 0 &&
                        device.forged.size() >= static_cast<std::size_t>(ctx.normal_count);
    if (capped) {
      const NodeId id = device.forged[device.forged_cursor % device.forged.size()];
      ++device.forged_cursor;
      return id;
    }
    const NodeId id{ctx.next_fresh++};
    device.forged.push_back(id);
    return id;
  };
  switch (policy) {
    case AdversaryPolicy::Stable:
      if (!device.stable_id) device.stable_id = fresh();
      return *device.stable_id;
    case AdversaryPolicy::Steal:
      if (ctx.normal_count > 0) return NodeId{1 + rng.index(static_cast<std::uint64_t>(ctx.normal_count))};
      return fresh();
    case AdversaryPolicy::Fresh:
      break;
  }
  return fresh();
}

class World {
 public:
  explicit World(const SimConfig& cfg)
      : cfg_(cfg),
        place_rng_(mix64(cfg.seed ^ 0x706c616365ULL)),
        move_rng_(mix64(cfg.seed ^ 0x6d6f7665ULL)),
        adversary_rng_(mix64(cfg.seed ^ 0x616476ULL)),
        failure_rng_(mix64(cfg.seed ^ 0x6661696cULL)) {
    cfg_.validate();
    const auto layout = edge_layout(cfg_.edge_units, cfg_.area);
    for (int i = 0; i < cfg_.edge_units; ++i) {
      const EdgeId id{static_cast<std::uint32_t>(i)};
      std::optional<Position> sub;
      if (cfg_.substitutes_enabled) sub = Position{layout[i].x + cfg_.substitute_offset, layout[i].y};
      units_.emplace_back(id, layout[i], sub, cfg_.heartbeat_threshold);
      detectors_.emplace_back(id, layout[i], cfg_.channel(), cfg_.reach_radius());
    }

    ctx_.normal_count = cfg_.normal_nodes;
    ctx_.cap_identities = cfg_.cap_identities;
    ctx_.next_fresh = static_cast<std::uint64_t>(cfg_.normal_nodes) + 1;

    const int total = cfg_.normal_nodes + cfg_.sybil_nodes;
    for (int i = 0; i < total; ++i) {
      Device d;
      d.truth = i < cfg_.normal_nodes ? Truth::Normal : Truth::Sybil;
      if (d.truth == Truth::Normal) {
        d.registered_id = NodeId{static_cast<std::uint64_t>(i) + 1};
        registry_.enroll(d.registered_id);
      }
      d.mobility = spawn_waypoint(place_clear_of_edges(), cfg_.v_max, cfg_.area, place_rng_);
      devices_.push_back(std::move(d));
    }
  }

  const SimConfig& config() const { return cfg_; }
  const std::vector<Device>& devices() const { return devices_; }
  std::vector<Device>& devices() { return devices_; }
  const std::vector<EdgeUnit>& units() const { return units_; }
  const MembershipRegistry& registry() const { return registry_; }
  std::uint64_t cycles_run() const { return cycle_; }

  /// Detection state still held by each edge; cleared at the end of every cycle.
  std::vector<std::size_t> retained_records() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < detectors_.size(); ++i) {
      out.push_back(detectors_[i].retained() + units_[i].shadow_records().size());
    }
    return out;
  }

  CycleMetrics run_cycle() {
    CycleMetrics m;
    const std::uint64_t cycle = cycle_++;
    settle_at_cycle_start();

    bool injected = false;
    for (;;) {
      const bool completed = attempt(cycle, m, injected);
      clear_detection_state();
      if (completed) break;
      m.aborted = true;
      if (cfg_.abort_mode == AbortMode::Skip) {
        zero_verdicts(m);
        break;
      }
    }
    move_all();
    return m;
  }

 private:
  Position place_clear_of_edges() {
    for (;;) {
      const Position p = cfg_.area.sample(place_rng_);
      bool clear = true;
      // Standby spots count even when substitutes are off, so enabling them never shifts placement.
      for (const auto& u : units_) {
        const Position standby{u.primary_position().x + cfg_.substitute_offset, u.primary_position().y};
        clear = clear && euclidean_distance(p, u.primary_position()) >= 0.1 && euclidean_distance(p, standby) >= 0.1;
      }
      if (clear) return p;
    }
  }

  std::vector<EdgeSite> live_sites() const {
    std::vector<EdgeSite> sites;
    for (const auto& u : units_) {
      if (u.state() != UnitState::BothDead) sites.push_back({u.id(), u.active_position()});
    }
    return sites;
  }

  // A silent unit with no standby is noticed by the network at the next cycle.
  void settle_at_cycle_start() {
    std::set<EdgeId> dead;
    for (auto& u : units_) {
      if (u.state() == UnitState::BothDead || u.responsive()) continue;
      if (!u.has_standby() || u.tick() == HeartbeatStatus::DeclareDead) dead.insert(u.id());
    }
    if (!dead.empty()) apply_failover(dead);
    if (live_sites().size() < 2) throw Error(ErrorCode::InsufficientEdges, "fewer than two edge units remain");
  }

  // Heartbeat at a round boundary. True when the in-flight cycle must abort.
  bool boundary() {
    std::set<EdgeId> dead;
    for (auto& u : units_) {
      if (u.has_standby() && u.tick() == HeartbeatStatus::DeclareDead) dead.insert(u.id());
    }
    if (dead.empty()) return false;
    apply_failover(dead);
    return true;
  }

  void apply_failover(const std::set<EdgeId>& dead) {
    failover(units_, dead);
    for (std::size_t i = 0; i < units_.size(); ++i) detectors_[i].relocate(units_[i].active_position());
  }

  void inject_failures(std::uint64_t cycle) {
    for (const auto& f : cfg_.scheduled_failures) {
      if (f.cycle == cycle && units_[f.edge].state() != UnitState::BothDead) units_[f.edge].fail_active();
    }
    if (cfg_.failure_probability > 0.0) {
      for (auto& u : units_) {
        const bool dies = failure_rng_.bernoulli(cfg_.failure_probability);
        if (dies && u.state() != UnitState::BothDead) u.fail_active();
      }
    }
  }

  void transmit(std::size_t device, const EdgePair& pair, NodeId claimed, Round round, std::uint64_t cycle,
                std::uint64_t tx, CycleMetrics& m) {
    const Position pos = devices_[device].mobility.pos;
    const auto params = cfg_.channel();
    m.member_packets += 2;

    auto deliver = [&](const EdgeSite& site, const EdgeSite& peer, EdgeRole role) -> std::optional<RssiObservation> {
      EdgeUnit& unit = units_[to_underlying(site.id)];
      const ControlPacket pkt{claimed, site.id, peer.id, role, round, cycle, tx};
      if (!unit.responsive()) return std::nullopt;
      const double d = euclidean_distance(pos, unit.active_position());
      if (!(d > 0.0)) return std::nullopt;
      auto obs = detectors_[to_underlying(site.id)].receive(pkt, rssi(params, d));
      if (unit.has_standby()) shadow_observe(unit, pkt, pos, params);
      return obs;
    };

    deliver(pair.e2, pair.e1, EdgeRole::Evaluator);
    const auto reported = deliver(pair.e1, pair.e2, EdgeRole::Reporter);
    if (!reported) return;
    const auto msg = forward_report(*reported, pair.e2.id, units_[to_underlying(pair.e1.id)].responsive());
    if (!msg) return;
    ++m.edge_packets;
    EdgeUnit& evaluator = units_[to_underlying(pair.e2.id)];
    if (!evaluator.responsive()) return;
    detectors_[to_underlying(pair.e2.id)].accept_forward(*msg);
    if (evaluator.has_standby()) evaluator.shadow_share(*msg);
  }

  NodeId claim(std::size_t device, Round round) {
    Device& d = devices_[device];
    if (d.truth == Truth::Normal) return d.registered_id;
    return adversary_emit(cfg_.policy, d, round, adversary_rng_, ctx_);
  }

  static bool same_pair(const EdgePair& a, const EdgePair& b) {
    return (a.e1.id == b.e1.id && a.e2.id == b.e2.id) || (a.e1.id == b.e2.id && a.e2.id == b.e1.id);
  }

  bool attempt(std::uint64_t cycle, CycleMetrics& m, bool& injected) {
    const auto sites = live_sites();
    if (sites.size() < 2) throw Error(ErrorCode::InsufficientEdges, "fewer than two edge units remain");
    for (auto& det : detectors_) {
      for (const auto& s : sites) {
        if (s.id != det.id()) det.set_peer(s.id, s.pos);
      }
    }

    const std::size_t n = devices_.size();
    std::vector<EdgePair> pinned(n);
    for (std::size_t i = 0; i < n; ++i) {
      pinned[i] = select_edge_pair(devices_[i].mobility.pos, sites);
      transmit(i, pinned[i], claim(i, Round::First), Round::First, cycle, next_tx_++, m);
    }

    if (!injected) {
      inject_failures(cycle);
      injected = true;
    }
    if (boundary()) return false;

    move_all();

    std::vector<std::uint64_t> round2_tx(n);
    std::vector<bool> changed(n, false);
    std::unordered_map<std::uint64_t, std::size_t> owner;
    for (std::size_t i = 0; i < n; ++i) {
      changed[i] = !same_pair(select_edge_pair(devices_[i].mobility.pos, sites), pinned[i]);
      round2_tx[i] = next_tx_++;
      owner[round2_tx[i]] = i;
      transmit(i, pinned[i], claim(i, Round::Second), Round::Second, cycle, round2_tx[i], m);
    }

    if (boundary()) return false;

    std::vector<bool> judged(n, false);
    for (std::size_t e = 0; e < detectors_.size(); ++e) {
      if (!units_[e].responsive()) continue;
      for (const auto& j : detectors_[e].judge(registry_)) {
        const auto it = owner.find(j.transmission);
        if (it == owner.end()) {
          score(m, j.verdict, std::nullopt);
          continue;
        }
        const std::size_t i = it->second;
        judged[i] = true;
        score(m, j.verdict, devices_[i].truth);
        if (changed[i] && devices_[i].truth == Truth::Normal && j.verdict == Verdict::Sybil) {
          ++m.pair_changed_normal_as_sybil;
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (changed[i]) ++m.pair_changes;
      if (judged[i]) continue;
      ++(devices_[i].truth == Truth::Normal ? m.normal_unjudged : m.sybil_unjudged);
    }
    return true;
  }

  static void zero_verdicts(CycleMetrics& m) {
    m.normal_as_normal = m.normal_as_sybil = m.sybil_as_sybil = m.sybil_as_normal = 0;
    m.normal_unjudged = m.sybil_unjudged = m.unattributed = 0;
    m.pair_changes = m.pair_changed_normal_as_sybil = 0;
  }

  void clear_detection_state() {
    for (auto& det : detectors_) det.clear();
    for (auto& u : units_) u.clear_shadow();
  }

  void move_all() {
    for (auto& d : devices_) d.mobility = step(d.mobility, cfg_.dt_between_rounds, move_rng_);
  }

  SimConfig cfg_;
  Rng place_rng_;
  Rng move_rng_;
  Rng adversary_rng_;
  Rng failure_rng_;
  std::vector<EdgeUnit> units_;
  std::vector<EdgeDetector> detectors_;
  std::vector<Device> devices_;
  MembershipRegistry registry_;
  AdversaryContext ctx_;
  std::uint64_t cycle_{0};
  std::uint64_t next_tx_{1};
};

inline World build_world(const SimConfig& cfg) { return World(cfg); }

struct ReplicationResult {
  int index{};
  std::uint64_t seed{};
  std::vector<CycleMetrics> cycles;
  CycleMetrics totals;
  Rates rates;
};

struct RateStats {
  std::optional<double> mean;
  std::optional<double> sd;  // sample standard deviation; empty for fewer than two values
};

struct SimulationSummary {
  std::vector<ReplicationResult> replications;
  CycleMetrics pooled_totals;
  Rates pooled;
  RateStats normal_accuracy;
  RateStats normal_misclassification;
  RateStats sybil_detection;
};

inline RateStats stats_of(const std::vector<double>& xs) {
  RateStats s;
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  s.mean = mean;
  if (xs.size() >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    s.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

inline ReplicationResult run_replication(const SimConfig& cfg, int index) {
  SimConfig rep = cfg;
  rep.seed = cfg.seed + static_cast<std::uint64_t>(index);
  World world(rep);
  ReplicationResult out;
  out.index = index;
  out.seed = rep.seed;
  out.cycles.reserve(static_cast<std::size_t>(cfg.cycles));
  for (int c = 0; c < cfg.cycles; ++c) {
    out.cycles.push_back(world.run_cycle());
    out.totals += out.cycles.back();
  }
  out.rates = rates_of(out.totals);
  return out;
}

inline SimulationSummary summarize(std::vector<ReplicationResult> reps) {
  SimulationSummary s;
  s.replications = std::move(reps);
  std::vector<double> acc, fnr, det;
  for (const auto& r : s.replications) {
    s.pooled_totals += r.totals;
    if (r.rates.normal_accuracy) acc.push_back(*r.rates.normal_accuracy);
    if (r.rates.normal_misclassification) fnr.push_back(*r.rates.normal_misclassification);
    if (r.rates.sybil_detection) det.push_back(*r.rates.sybil_detection);
  }
  s.pooled = rates_of(s.pooled_totals);
  s.normal_accuracy = stats_of(acc);
  s.normal_misclassification = stats_of(fnr);
  s.sybil_detection = stats_of(det);
  return s;
}

/// Runs every replication; replications may execute on several threads but
/// are merged by index, so the result is independent of scheduling.
inline SimulationSummary run_simulation(const SimConfig& cfg) {
  cfg.validate();
  const int reps = cfg.replications;
  std::vector<ReplicationResult> results(static_cast<std::size_t>(reps));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(reps));

  int workers = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, reps);
  if (workers == 1) {
    for (int i = 0; i < reps; ++i) results[i] = run_replication(cfg, i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (int i = w; i < reps; i += workers) {
          try {
            results[i] = run_replication(cfg, i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return summarize(std::move(results));
}

}  // namespace sybil
