#pragma once

// Deterministic mean-power channel: RSSI = gain / d^alpha, where gain folds
// transmit power and the propagation constant together.

#include <cmath>

#include "sybil/core.hpp"

namespace sybil {

struct ChannelParams {
  double gain{1.0};
  double alpha{2.0};

  void validate() const {
    if (!(gain > 0.0) || !std::isfinite(gain)) throw Error(ErrorCode::InvalidArgument, "gain must be > 0");
    if (!(alpha >= 1.6 && alpha <= 3.5)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in [1.6, 3.5]");
  }
};

struct RssiObservation {
  double value{};
  Round round{Round::First};
  EdgeId observer{};
  NodeId claimed_id{};
  std::uint64_t cycle{};
  std::uint64_t transmission{};  // pairs the two receptions of one broadcast
};

inline double rssi(const ChannelParams& params, double d) {
  if (!(d > 0.0)) throw Error(ErrorCode::ZeroDistance, "transmitter and receiver co-located");
  return params.gain / std::pow(d, params.alpha);
}

inline double invert_rssi(const ChannelParams& params, double value) {
  if (!(value > 0.0)) throw Error(ErrorCode::InvalidRssi, "RSSI must be positive");
  return std::pow(params.gain / value, 1.0 / params.alpha);
}

/// eta = R2 / R1 for the two receptions of the same packet in the same round.
inline double ratio(const RssiObservation& at_e2, const RssiObservation& at_e1) {
  if (at_e2.round != at_e1.round || at_e2.claimed_id != at_e1.claimed_id || at_e2.observer == at_e1.observer) {
    throw Error(ErrorCode::PairingMismatch, "observations do not come from one packet pair");
  }
  if (!(at_e2.value > 0.0) || !(at_e1.value > 0.0)) throw Error(ErrorCode::InvalidRssi, "RSSI must be positive");
  return at_e2.value / at_e1.value;
}

}  // namespace sybil
