#pragma once

// Standby substitutes for edge nodes. Each substitute sits at a fixed spot
// near its primary, hears the same member packets, keeps its own RSSI for
// them, and takes over when its heartbeat on the primary times out.

#include <algorithm>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "sybil/channel.hpp"
#include "sybil/core.hpp"
#include "sybil/geometry.hpp"
#include "sybil/protocol.hpp"

namespace sybil {

struct HeartbeatState {
  int threshold{1};
  int missed{0};
};

enum class HeartbeatStatus { Healthy, DeclareDead };

inline HeartbeatStatus heartbeat_tick(HeartbeatState& hb, bool primary_alive) {
  if (hb.threshold < 1) throw Error(ErrorCode::InvalidArgument, "heartbeat threshold must be >= 1");
  if (primary_alive) {
    hb.missed = 0;
    return HeartbeatStatus::Healthy;
  }
  ++hb.missed;
  return hb.missed >= hb.threshold ? HeartbeatStatus::DeclareDead : HeartbeatStatus::Healthy;
}

enum class UnitState { PrimaryAlive, SubstitutePromoted, BothDead };

struct ShadowObservation {
  ControlPacket packet;
  double own_rssi{};
  std::optional<RssiObservation> shared;  // reporter's value relayed by the primary
};

class EdgeUnit {
 public:
  EdgeUnit(EdgeId id, Position primary, std::optional<Position> substitute, int heartbeat_threshold = 1)
      : id_(id), primary_(primary), substitute_(substitute) {
    if (substitute_ && *substitute_ == primary_) {
      throw Error(ErrorCode::InvalidArgument, "substitute must not share the primary's position");
    }
    hb_.threshold = heartbeat_threshold;
    if (hb_.threshold < 1) throw Error(ErrorCode::InvalidArgument, "heartbeat threshold must be >= 1");
  }

  EdgeId id() const { return id_; }
  UnitState state() const { return state_; }
  Position primary_position() const { return primary_; }
  std::optional<Position> substitute_position() const { return substitute_; }

  /// Position of the node currently doing the unit's work.
  Position active_position() const {
    return state_ == UnitState::SubstitutePromoted ? *substitute_ : primary_;
  }

  /// Whether the node currently serving answers packets.
  bool responsive() const { return state_ != UnitState::BothDead && !active_down_; }

  bool has_standby() const { return substitute_.has_value() && state_ == UnitState::PrimaryAlive; }

  /// Physical failure of whichever node is serving. Not yet known to anyone.
  void fail_active() { active_down_ = true; }

  /// One heartbeat period as seen by a standby substitute.
  HeartbeatStatus tick() {
    if (!has_standby()) return HeartbeatStatus::Healthy;
    return heartbeat_tick(hb_, !active_down_);
  }

  void promote() {
    if (!has_standby()) throw Error(ErrorCode::InvalidArgument, "no standby substitute to promote");
    state_ = UnitState::SubstitutePromoted;
    active_down_ = false;
    hb_.missed = 0;
  }

  void retire() {
    state_ = UnitState::BothDead;
    active_down_ = true;
  }

  const std::vector<ShadowObservation>& shadow_records() const { return shadow_; }
  void clear_shadow() { shadow_.clear(); }

  void shadow_store(ShadowObservation obs) { shadow_.push_back(std::move(obs)); }

  void shadow_share(const CrossEdgeMessage& msg) {
    for (auto& s : shadow_) {
      if (s.packet.transmission == msg.observation.transmission && s.packet.round == msg.observation.round) {
        s.shared = msg.observation;
      }
    }
  }

 private:
  EdgeId id_;
  Position primary_;
  std::optional<Position> substitute_;
  UnitState state_{UnitState::PrimaryAlive};
  bool active_down_{false};
  HeartbeatState hb_;
  std::vector<ShadowObservation> shadow_;
};

/// The substitute's own reception of a packet addressed to its primary.
/// Physical RSSI comes from the true node position.
inline const ShadowObservation& shadow_observe(EdgeUnit& unit, const ControlPacket& pkt, Position node_pos,
                                               const ChannelParams& params) {
  if (!unit.substitute_position()) throw Error(ErrorCode::InvalidArgument, "unit has no substitute");
  const double value = rssi(params, euclidean_distance(node_pos, *unit.substitute_position()));
  unit.shadow_store({pkt, value, std::nullopt});
  return unit.shadow_records().back();
}

/// Round-1 records rebuilt from the substitute's own observations, in the
/// frame spanned by the reporter and the substitute's position.
inline std::vector<DetectionRecord> shadow_detection_records(const EdgeUnit& unit, std::span<const EdgeSite> peers,
                                                             const ChannelParams& params, double r) {
  std::vector<DetectionRecord> out;
  if (!unit.substitute_position()) return out;
  for (const auto& s : unit.shadow_records()) {
    if (s.packet.round != Round::First || s.packet.role != EdgeRole::Evaluator || !s.shared) continue;
    const auto peer = std::find_if(peers.begin(), peers.end(),
                                   [&](const EdgeSite& e) { return e.id == s.packet.peer_edge; });
    if (peer == peers.end()) continue;
    const LocalFrame frame = make_frame(peer->pos, *unit.substitute_position());
    out.push_back(round1_process(s.packet, s.shared->value, s.own_rssi, frame, params, r));
  }
  return out;
}

struct FailoverOutcome {
  std::vector<EdgeId> promoted;
  std::vector<EdgeId> removed;
  std::size_t live_units{};
};

/// Replaces declared-dead primaries by their substitutes and removes units
/// with nothing left to promote. Aborting and re-running the in-flight cycle
/// is the caller's job.
inline FailoverOutcome failover(std::span<EdgeUnit> units, const std::set<EdgeId>& declared_dead) {
  FailoverOutcome out;
  for (auto& unit : units) {
    if (!declared_dead.contains(unit.id()) || unit.state() == UnitState::BothDead) continue;
    if (unit.has_standby()) {
      unit.promote();
      out.promoted.push_back(unit.id());
    } else {
      unit.retire();
      out.removed.push_back(unit.id());
    }
  }
  for (const auto& unit : units) {
    if (unit.state() != UnitState::BothDead) ++out.live_units;
  }
  if (out.live_units < 2) throw Error(ErrorCode::InsufficientEdges, "fewer than two edge units remain");
  return out;
}

}  // namespace sybil
