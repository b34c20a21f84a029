#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace sybil {

enum class NodeId : std::uint64_t {};
enum class EdgeId : std::uint32_t {};

constexpr std::uint64_t to_underlying(NodeId id) { return static_cast<std::uint64_t>(id); }
constexpr std::uint32_t to_underlying(EdgeId id) { return static_cast<std::uint32_t>(id); }

enum class Round : std::uint8_t { First = 1, Second = 2 };

enum class ErrorCode {
  DegenerateFrame,
  InconsistentDistances,
  ZeroDistance,
  InvalidRssi,
  PairingMismatch,
  InsufficientEdges,
  InvalidArgument,
  ConfigError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateFrame: return "DegenerateFrame";
    case ErrorCode::InconsistentDistances: return "InconsistentDistances";
    case ErrorCode::ZeroDistance: return "ZeroDistance";
    case ErrorCode::InvalidRssi: return "InvalidRssi";
    case ErrorCode::PairingMismatch: return "PairingMismatch";
    case ErrorCode::InsufficientEdges: return "InsufficientEdges";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded random stream. The double/int conversions are spelled out so that
/// trajectories do not depend on the standard library's distribution code.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  /// Uniform in [0, n); n must be > 0.
  std::uint64_t index(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  bool bernoulli(double p) { return unit() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sybil
