#pragma once

// Planar geometry for the edge-pair detector: the local frame spanned by two
// edge nodes, localization from two ranges, and the feasible range of the
// RSSI ratio for a node confined to a disk of radius r.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <ostream>
#include <utility>

#include "sybil/core.hpp"

namespace sybil {

struct Position {
  double x{};
  double y{};

  friend bool operator==(const Position&, const Position&) = default;
  friend std::ostream& operator<<(std::ostream& os, const Position& p) {
    return os << '(' << p.x << ", " << p.y << ')';
  }
};

inline double euclidean_distance(Position a, Position b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Coordinate system with edge e1 at (+c, 0) and e2 at (-c, 0).
struct LocalFrame {
  Position origin;
  double c{};
  Position axis;  // unit vector from origin toward e1

  Position to_local(Position p) const {
    const double dx = p.x - origin.x;
    const double dy = p.y - origin.y;
    return {dx * axis.x + dy * axis.y, axis.x * dy - axis.y * dx};
  }

  Position to_global(Position q) const {
    return {origin.x + q.x * axis.x - q.y * axis.y, origin.y + q.x * axis.y + q.y * axis.x};
  }
};

inline LocalFrame make_frame(Position e1, Position e2) {
  const double separation = euclidean_distance(e1, e2);
  if (!(separation > 0.0)) {
    throw Error(ErrorCode::DegenerateFrame, "edge nodes coincide");
  }
  LocalFrame frame;
  frame.origin = {0.5 * (e1.x + e2.x), 0.5 * (e1.y + e2.y)};
  frame.c = 0.5 * separation;
  frame.axis = {(e1.x - e2.x) / separation, (e1.y - e2.y) / separation};
  return frame;
}

/// Node position in a local frame, reduced to what the interval needs.
/// The sign of y1 cannot be recovered from two ranges and is never used.
struct IntervalInputs {
  double x1{};
  double y1sq{};
  double r{};
  double alpha{2.0};
};

inline constexpr double kGeometryTolerance = 1e-9;

/// Recovers (x1, y1^2) from the distances to e1 (d1) and e2 (d2).
inline IntervalInputs localize(double d1, double d2, const LocalFrame& frame) {
  if (!(d1 > 0.0) || !(d2 > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "localize requires positive distances");
  }
  const double c = frame.c;
  const double d1sq = d1 * d1;
  const double d2sq = d2 * d2;
  IntervalInputs out;
  out.x1 = (d2sq - d1sq) / (4.0 * c);
  double y1sq = d1sq - (out.x1 - c) * (out.x1 - c);
  // Absolute tolerance in m^2, scaled up for long ranges where squaring
  // amplifies the rounding of d.
  const double tol = kGeometryTolerance * std::max({1.0, d1sq, d2sq});
  if (y1sq < -tol) {
    throw Error(ErrorCode::InconsistentDistances, "ranges violate the triangle inequality");
  }
  out.y1sq = std::max(0.0, y1sq);
  return out;
}

/// Feasible RSSI-ratio interval. An empty bound means unbounded on that side.
struct RatioInterval {
  std::optional<double> lo;
  std::optional<double> hi;

  static RatioInterval point(double v) { return {v, v}; }
  static RatioInterval unbounded() { return {}; }

  bool bounded() const { return lo.has_value() && hi.has_value(); }

  /// Membership with a relative slack for floating-point rounding at the
  /// endpoints; the honest-node argument puts eta exactly on the closed set.
  bool contains(double eta, double rel_tol = 1e-9) const {
    if (lo && eta < *lo * (1.0 - rel_tol)) return false;
    if (hi && eta > *hi * (1.0 + rel_tol)) return false;
    return true;
  }

  /// True when `*this` lies within `outer` up to rel_tol.
  bool within(const RatioInterval& outer, double rel_tol = 1e-9) const {
    if (outer.lo && (!lo || *lo < *outer.lo * (1.0 - rel_tol))) return false;
    if (outer.hi && (!hi || *hi > *outer.hi * (1.0 + rel_tol))) return false;
    return true;
  }

  friend bool operator==(const RatioInterval&, const RatioInterval&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const RatioInterval& iv) {
  os << '[';
  if (iv.lo) os << *iv.lo; else os << "0 (unbounded)";
  os << ", ";
  if (iv.hi) os << *iv.hi; else os << "inf (unbounded)";
  return os << ']';
}

/// Extremes of the squared distance ratio k = d2^2 / d1^2 over a disk.
/// kmin == 0 marks that e2 is reachable; an empty kmax marks that e1 is.
struct SquaredRatioExtrema {
  double kmin{};
  std::optional<double> kmax;
};

namespace detail {

inline void check_inputs(double y1sq, double r, double c) {
  if (!(y1sq >= 0.0) || !(r >= 0.0) || !(c > 0.0) || !std::isfinite(y1sq) || !std::isfinite(r) ||
      !std::isfinite(c)) {
    throw Error(ErrorCode::InvalidArgument, "require y1sq >= 0, r >= 0, c > 0 (finite)");
  }
}

inline double squared_ratio_from_tangent(double u) {
  // u = 1/t where t = (k+1)/(k-1) locates the tangent Apollonian circle.
  if (u >= 1.0) return std::numeric_limits<double>::infinity();
  if (u <= -1.0) return 0.0;
  return (1.0 + u) / (1.0 - u);
}

}  // namespace detail

/// Closed-form extremes of ((x+c)^2+y^2)/((x-c)^2+y^2) over the disk of
/// radius r centred at (x1, +-sqrt(y1sq)).
///
/// The extremes occur where the disk boundary is tangent to an Apollonian
/// circle of the pair. Writing the circle for ratio k as centre (c t, 0),
/// radius c sqrt(t^2 - 1) with t = (k+1)/(k-1), tangency gives
///   A t^2 + B t + C = 0,
///   D = x1^2 + y1^2 + c^2 - r^2,
///   A = 4 c^2 (x1^2 - r^2),  B = -4 x1 c D,  C = D^2 + 4 r^2 c^2.
/// C > 0 whenever r > 0, so the quadratic is solved in u = 1/t instead, which
/// stays finite when the disk touches the perpendicular bisector (A = 0).
/// The discriminant factors as 16 c^2 r^2 ((d1^2 - r^2)(d2^2 - r^2) + 4 c^2 r^2).
inline SquaredRatioExtrema distance_ratio_sq_extrema(double x1, double y1sq, double r, double c) {
  detail::check_inputs(y1sq, r, c);
  const double d1sq = (x1 - c) * (x1 - c) + y1sq;
  const double d2sq = (x1 + c) * (x1 + c) + y1sq;
  const double rsq = r * r;
  const bool e1_reachable = d1sq <= rsq;
  const bool e2_reachable = d2sq <= rsq;

  if (r == 0.0) {
    const double k = d2sq / d1sq;
    return {k, k};
  }

  const double D = x1 * x1 + y1sq + c * c - rsq;
  const double C = D * D + 4.0 * rsq * c * c;
  const double disc_scaled = std::max(0.0, (d1sq - rsq) * (d2sq - rsq) + 4.0 * c * c * rsq);
  const double root = r * std::sqrt(disc_scaled);
  const double lead = x1 * D;

  // u+ + u- = 4 x1 c D / C, u+ u- = A / C; take the larger root directly and
  // the other from the product to avoid cancellation.
  double u_big = 2.0 * c * (lead + std::copysign(root, lead)) / C;
  double u_small = 0.0;
  if (u_big != 0.0) {
    u_small = 4.0 * c * c * (x1 * x1 - rsq) / (C * u_big);
  }

  double k_a = detail::squared_ratio_from_tangent(u_big);
  double k_b = detail::squared_ratio_from_tangent(u_small);
  if (k_a > k_b) std::swap(k_a, k_b);

  SquaredRatioExtrema out;
  out.kmin = e2_reachable ? 0.0 : k_a;
  if (!e1_reachable && std::isfinite(k_b)) out.kmax = k_b;
  return out;
}

/// eta = (d1/d2)^alpha at the point itself.
inline double point_ratio(double x1, double y1sq, double c, double alpha) {
  const double d1sq = (x1 - c) * (x1 - c) + y1sq;
  const double d2sq = (x1 + c) * (x1 + c) + y1sq;
  return std::pow(d1sq / d2sq, 0.5 * alpha);
}

/// Interval of eta = (d1/d2)^alpha = k^(-alpha/2) reachable within the disk.
inline RatioInterval rssi_ratio_interval(const IntervalInputs& in, double c) {
  if (!(in.alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be positive");
  detail::check_inputs(in.y1sq, in.r, c);
  if (in.r == 0.0) return RatioInterval::point(point_ratio(in.x1, in.y1sq, c, in.alpha));

  const auto k = distance_ratio_sq_extrema(in.x1, in.y1sq, in.r, c);
  const double exponent = -0.5 * in.alpha;
  RatioInterval iv;
  if (k.kmax) iv.lo = std::pow(*k.kmax, exponent);
  if (k.kmin > 0.0) iv.hi = std::pow(k.kmin, exponent);
  return iv;
}

/// Brute-force interval: dense sampling of the disk boundary followed by a
/// golden-section refinement around the best samples. Interior foci are
/// detected directly. Shares no algebra with the closed form.
inline RatioInterval ratio_interval_oracle(const IntervalInputs& in, double c, std::size_t samples) {
  if (samples < 10'000) throw Error(ErrorCode::InvalidArgument, "oracle needs at least 1e4 samples");
  const Position centre{in.x1, std::sqrt(std::max(0.0, in.y1sq))};
  const Position e1{c, 0.0};
  const Position e2{-c, 0.0};

  auto eta_at = [&](Position p) {
    return std::pow(euclidean_distance(p, e1) / euclidean_distance(p, e2), in.alpha);
  };
  if (in.r == 0.0) {
    const double v = eta_at(centre);
    return RatioInterval::point(v);
  }
  auto eta_on_circle = [&](double theta) {
    return eta_at({centre.x + in.r * std::cos(theta), centre.y + in.r * std::sin(theta)});
  };

  const bool e1_inside = euclidean_distance(centre, e1) <= in.r;
  const bool e2_inside = euclidean_distance(centre, e2) <= in.r;

  const double step = 2.0 * std::numbers::pi / static_cast<double>(samples);
  std::size_t arg_min = 0;
  std::size_t arg_max = 0;
  double best_min = std::numeric_limits<double>::infinity();
  double best_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples; ++i) {
    const double v = eta_on_circle(step * static_cast<double>(i));
    if (v < best_min) { best_min = v; arg_min = i; }
    if (v > best_max) { best_max = v; arg_max = i; }
  }

  auto refine = [&](std::size_t idx, double sign) {
    double a = step * (static_cast<double>(idx) - 1.0);
    double b = step * (static_cast<double>(idx) + 1.0);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - g * (b - a);
    double x2 = a + g * (b - a);
    double f1 = sign * eta_on_circle(x1);
    double f2 = sign * eta_on_circle(x2);
    for (int it = 0; it < 100 && (b - a) > 1e-15; ++it) {
      if (f1 < f2) {
        b = x2; x2 = x1; f2 = f1;
        x1 = b - g * (b - a); f1 = sign * eta_on_circle(x1);
      } else {
        a = x1; x1 = x2; f1 = f2;
        x2 = a + g * (b - a); f2 = sign * eta_on_circle(x2);
      }
    }
    return sign * std::min(f1, f2);
  };

  RatioInterval iv;
  if (!e1_inside) iv.lo = std::min(best_min, refine(arg_min, 1.0));
  if (!e2_inside) iv.hi = std::max(best_max, refine(arg_max, -1.0));
  return iv;
}

}  // namespace sybil
