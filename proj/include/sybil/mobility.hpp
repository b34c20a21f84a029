#pragma once

// Random waypoint motion with zero pause time. A node that reaches its
// waypoint mid-step stays there for the rest of the step, then continues
// toward a fresh uniform waypoint at a fresh uniform speed.

#include <algorithm>

#include "sybil/core.hpp"
#include "sybil/geometry.hpp"

namespace sybil {

struct Area {
  double width{100.0};
  double height{100.0};

  bool contains(Position p) const { return p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= height; }
  Position sample(Rng& rng) const { return {rng.uniform(0.0, width), rng.uniform(0.0, height)}; }
};

struct WaypointState {
  Position pos;
  Position target;
  double speed{};
  double v_max{0.5};
  Area area;
};

inline WaypointState spawn_waypoint(Position start, double v_max, const Area& area, Rng& rng) {
  WaypointState s;
  s.pos = start;
  s.area = area;
  s.v_max = v_max;
  s.target = area.sample(rng);
  s.speed = rng.uniform(0.0, v_max);
  return s;
}

inline WaypointState step(WaypointState state, double dt, Rng& rng) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  const double remaining = euclidean_distance(state.pos, state.target);
  const double travel = state.speed * dt;
  if (travel < remaining) {
    const double f = travel / remaining;
    state.pos.x += (state.target.x - state.pos.x) * f;
    state.pos.y += (state.target.y - state.pos.y) * f;
    // Rounding can put a coordinate a hair outside; the segment itself is inside.
    state.pos.x = std::clamp(state.pos.x, 0.0, state.area.width);
    state.pos.y = std::clamp(state.pos.y, 0.0, state.area.height);
    return state;
  }
  state.pos = state.target;
  state.target = state.area.sample(rng);
  state.speed = rng.uniform(0.0, state.v_max);
  return state;
}

/// Radius of the disk a node can reach between rounds.
inline double displacement_bound(double v_max, double dt) {
  if (!(v_max >= 0.0) || !(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "need v_max >= 0 and dt > 0");
  return v_max * dt;
}

}  // namespace sybil
