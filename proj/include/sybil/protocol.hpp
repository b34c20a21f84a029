#pragma once

// Two-round detection run by each edge node. A member node broadcasts a
// control packet to its two nearest edges in each round; the reporter (e1)
// forwards its RSSI to the evaluator (e2), which forms eta = R2/R1. Round 1
// yields an interval of feasible round-2 ratios per claimed identity;
// judgment compares round-2 ratios and identities against those intervals.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sybil/channel.hpp"
#include "sybil/core.hpp"
#include "sybil/geometry.hpp"

namespace sybil {

struct EdgeSite {
  EdgeId id{};
  Position pos;
};

struct EdgePair {
  EdgeSite e1;  // nearest: reporter
  EdgeSite e2;  // second nearest: evaluator
};

/// Two nearest edges, ties broken toward the lower edge id.
inline EdgePair select_edge_pair(Position node, std::span<const EdgeSite> edges) {
  if (edges.size() < 2) throw Error(ErrorCode::InsufficientEdges, "need at least two live edges");
  auto closer = [&](const EdgeSite& a, const EdgeSite& b) {
    const double da = euclidean_distance(node, a.pos);
    const double db = euclidean_distance(node, b.pos);
    if (da != db) return da < db;
    return to_underlying(a.id) < to_underlying(b.id);
  };
  const EdgeSite* best = &edges[0];
  const EdgeSite* second = &edges[1];
  if (closer(*second, *best)) std::swap(best, second);
  for (std::size_t i = 2; i < edges.size(); ++i) {
    const EdgeSite* cand = &edges[i];
    if (closer(*cand, *best)) {
      second = best;
      best = cand;
    } else if (closer(*cand, *second)) {
      second = cand;
    }
  }
  return {*best, *second};
}

enum class EdgeRole : std::uint8_t { Reporter, Evaluator };

struct ControlPacket {
  NodeId claimed_id{};
  EdgeId addressed{};
  EdgeId peer_edge{};
  EdgeRole role{EdgeRole::Reporter};
  Round round{Round::First};
  std::uint64_t cycle{};
  std::uint64_t transmission{};
};

enum class Verdict : std::uint8_t { Normal, Sybil, NewMember };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Normal: return "Normal";
    case Verdict::Sybil: return "Sybil";
    case Verdict::NewMember: return "NewMember";
  }
  return "?";
}

struct DetectionRecord {
  NodeId claimed_id{};
  std::uint64_t transmission{};
  double eta1{};
  RatioInterval interval;
  IntervalInputs local_inputs;
  std::optional<double> matched_round2;
  std::optional<Verdict> verdict;
  bool valid{true};
};

class MembershipRegistry {
 public:
  MembershipRegistry() = default;
  explicit MembershipRegistry(std::unordered_set<NodeId> ids) : ids_(std::move(ids)) {}

  void enroll(NodeId id) { ids_.insert(id); }
  bool registered(NodeId id) const { return ids_.contains(id); }
  std::size_t size() const { return ids_.size(); }

 private:
  std::unordered_set<NodeId> ids_;
};

/// Round-1 processing at the evaluator. A record whose ranges cannot be
/// localized is kept but marked invalid; its identity is re-polled next cycle.
inline DetectionRecord round1_process(const ControlPacket& pkt, double rssi_at_e1, double rssi_at_e2,
                                      const LocalFrame& frame, const ChannelParams& params, double r) {
  DetectionRecord rec;
  rec.claimed_id = pkt.claimed_id;
  rec.transmission = pkt.transmission;
  if (!(rssi_at_e1 > 0.0) || !(rssi_at_e2 > 0.0)) {
    rec.valid = false;
    return rec;
  }
  rec.eta1 = rssi_at_e2 / rssi_at_e1;
  try {
    const double d1 = invert_rssi(params, rssi_at_e1);
    const double d2 = invert_rssi(params, rssi_at_e2);
    rec.local_inputs = localize(d1, d2, frame);
  } catch (const Error&) {
    rec.valid = false;
    return rec;
  }
  rec.local_inputs.r = r;
  rec.local_inputs.alpha = params.alpha;
  rec.interval = r == 0.0 ? RatioInterval::point(rec.eta1) : rssi_ratio_interval(rec.local_inputs, frame.c);
  return rec;
}

using RecordTable = std::map<NodeId, std::vector<DetectionRecord>>;

struct Round2Entry {
  NodeId claimed_id{};
  double eta2{};
  std::uint64_t transmission{};
};

struct Judgment {
  NodeId claimed_id{};
  std::uint64_t transmission{};
  Verdict verdict{Verdict::Normal};
  std::optional<NodeId> matched_with;  // vanished round-1 identity the packet was linked to
};

/// Judgment at one evaluator. One judgment per round-2 entry, in input order;
/// entries whose only round-1 records are invalid are skipped (re-polled).
inline std::vector<Judgment> judge(const RecordTable& records, std::span<const Round2Entry> round2,
                                   const MembershipRegistry& registry) {
  std::set<NodeId> reappeared;
  for (const auto& e : round2) reappeared.insert(e.claimed_id);

  std::vector<Judgment> out;
  out.reserve(round2.size());
  for (const auto& entry : round2) {
    Judgment j{entry.claimed_id, entry.transmission, Verdict::Normal, std::nullopt};
    if (auto it = records.find(entry.claimed_id); it != records.end()) {
      bool any_valid = false;
      bool feasible = false;
      for (const auto& rec : it->second) {
        if (!rec.valid) continue;
        any_valid = true;
        feasible = feasible || rec.interval.contains(entry.eta2);
      }
      if (!any_valid) continue;
      j.verdict = feasible ? Verdict::Normal : Verdict::Sybil;
      out.push_back(j);
      continue;
    }

    // New identity: is it a vanished round-1 identity wearing a new badge?
    const DetectionRecord* best = nullptr;
    double best_gap = 0.0;
    for (const auto& [id, recs] : records) {
      if (reappeared.contains(id)) continue;
      for (const auto& rec : recs) {
        if (!rec.valid || !rec.interval.contains(entry.eta2)) continue;
        const double gap = std::abs(rec.eta1 - entry.eta2);
        if (!best || gap < best_gap) {
          best = &rec;
          best_gap = gap;
        }
      }
    }
    if (best) {
      j.verdict = Verdict::Sybil;
      j.matched_with = best->claimed_id;
    } else {
      j.verdict = registry.registered(entry.claimed_id) ? Verdict::NewMember : Verdict::Sybil;
    }
    out.push_back(j);
  }
  return out;
}

struct CrossEdgeMessage {
  EdgeId from{};
  EdgeId to{};
  RssiObservation observation;
};

/// Reporter-to-evaluator forward. A dead sender delivers nothing.
inline std::optional<CrossEdgeMessage> forward_report(const RssiObservation& from_e1, EdgeId to, bool sender_alive) {
  if (!sender_alive) return std::nullopt;
  return CrossEdgeMessage{from_e1.observer, to, from_e1};
}

/// Detection state owned by a single edge node for one cycle.
class EdgeDetector {
 public:
  EdgeDetector(EdgeId self, Position pos, ChannelParams params, double reach_radius)
      : self_(self), pos_(pos), params_(params), reach_(reach_radius) {}

  EdgeId id() const { return self_; }
  Position position() const { return pos_; }
  void relocate(Position pos) { pos_ = pos; }

  void set_peer(EdgeId id, Position pos) { peers_[id] = pos; }

  /// Reception of a packet addressed to this edge. Reporters get back the
  /// observation to forward; evaluators keep it until the forward arrives.
  std::optional<RssiObservation> receive(const ControlPacket& pkt, double measured) {
    RssiObservation obs{measured, pkt.round, self_, pkt.claimed_id, pkt.cycle, pkt.transmission};
    if (pkt.role == EdgeRole::Reporter) return obs;
    auto& slot = pending_[key_of(obs)];
    slot.packet = pkt;
    slot.own = obs;
    try_complete(key_of(obs));
    return std::nullopt;
  }

  /// Idempotent: a repeated delivery of the same (id, round, cycle, transmission) is dropped.
  void accept_forward(const CrossEdgeMessage& msg) {
    const Key key = key_of(msg.observation);
    if (done_.contains(key)) return;
    auto& slot = pending_[key];
    slot.forwarded = msg.observation;
    slot.reporter = msg.from;
    try_complete(key);
  }

  std::vector<Judgment> judge(const MembershipRegistry& registry) {
    auto out = sybil::judge(records_, round2_, registry);
    for (const auto& j : out) {
      auto it = records_.find(j.claimed_id);
      if (it == records_.end()) continue;
      const auto entry = std::find_if(round2_.begin(), round2_.end(),
                                      [&](const Round2Entry& e) { return e.transmission == j.transmission; });
      for (auto& rec : it->second) {
        if (entry != round2_.end()) rec.matched_round2 = entry->eta2;
        rec.verdict = j.verdict;
      }
    }
    return out;
  }

  /// Drops everything stored for the cycle.
  void clear() {
    pending_.clear();
    done_.clear();
    records_.clear();
    round2_.clear();
  }

  const RecordTable& records() const { return records_; }
  const std::vector<Round2Entry>& round2() const { return round2_; }

  /// Number of stored items of any kind; zero after clear().
  std::size_t retained() const {
    std::size_t n = pending_.size() + done_.size() + round2_.size();
    for (const auto& [id, recs] : records_) n += recs.size();
    return n;
  }

 private:
  using Key = std::tuple<std::uint64_t, std::uint8_t, std::uint64_t, std::uint64_t>;
  struct Pending {
    std::optional<ControlPacket> packet;
    std::optional<RssiObservation> own;
    std::optional<RssiObservation> forwarded;
    EdgeId reporter{};
  };

  static Key key_of(const RssiObservation& o) {
    return {to_underlying(o.claimed_id), static_cast<std::uint8_t>(o.round), o.cycle, o.transmission};
  }

  void try_complete(const Key& key) {
    auto it = pending_.find(key);
    if (it == pending_.end() || !it->second.own || !it->second.forwarded || !it->second.packet) return;
    const Pending p = it->second;
    pending_.erase(it);
    done_.insert(key);

    if (p.own->round == Round::First) {
      auto peer = peers_.find(p.packet->peer_edge);
      DetectionRecord rec;
      if (peer == peers_.end()) {
        rec.claimed_id = p.packet->claimed_id;
        rec.transmission = p.packet->transmission;
        rec.valid = false;
      } else {
        const LocalFrame frame = make_frame(peer->second, pos_);
        rec = round1_process(*p.packet, p.forwarded->value, p.own->value, frame, params_, reach_);
      }
      records_[rec.claimed_id].push_back(rec);
    } else {
      round2_.push_back({p.own->claimed_id, ratio(*p.own, *p.forwarded), p.own->transmission});
    }
  }

  EdgeId self_;
  Position pos_;
  ChannelParams params_;
  double reach_;
  std::unordered_map<EdgeId, Position> peers_;
  std::map<Key, Pending> pending_;
  std::set<Key> done_;
  RecordTable records_;
  std::vector<Round2Entry> round2_;
};

}  // namespace sybil
