/* Copyright 2026 The blochctl Authors. All Rights Reserved.
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at
    http://www.apache.org/licenses/LICENSE-2.0
Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

// Time-optimal synthesis for the planar spin system
//
//   dy/dt = -Gamma y - u z,   dz/dt = gamma (1 - z) + u y
//
// with unbounded control u. Bang arcs are instantaneous rotations that keep
// the radius R; the radius only changes along two singular loci, the
// z-axis (vertical arcs) and the plane z = z0 = -gamma / (2 (Gamma - gamma))
// (horizontal arc). Since dR/dt does not depend on u, the minimum time
// between two states depends on their radii only:
//
//   * R grows fastest on the north z-axis,
//   * R shrinks fastest on the plane z = z0 while R >= |z0|, and on the
//     south z-axis otherwise.
//
// time_optimal_transfer() enumerates the admissible families built from
// these arcs and keeps the fastest one.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bloch/core.hpp"
#include "bloch/propagate.hpp"

namespace bloch::geo {

/// Below this |y| the horizontal singular control is unbounded; the arc is
/// closed by a bang onto the z-axis.
inline constexpr double kYFloor = 1e-9;
/// Two families whose times differ by less than this are a tie; the one
/// with fewer arcs wins.
inline constexpr double kTieTolerance = 1e-10;

class ArcTermination : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PlanarState {
  double y = 0.0;
  double z = 1.0;

  double radius() const { return std::hypot(y, z); }
  double angle() const { return std::atan2(z, y); }
};

enum class ArcKind { Bang, SingularVertical, SingularHorizontal };

inline std::string_view arc_kind_name(ArcKind k) {
  switch (k) {
    case ArcKind::Bang: return "bang";
    case ArcKind::SingularVertical: return "singular_vertical";
    case ArcKind::SingularHorizontal: return "singular_horizontal";
  }
  return "?";
}

struct Arc {
  ArcKind kind = ArcKind::Bang;
  double angle = 0.0;   // bang rotation angle
  double from = 0.0;    // z for vertical arcs, y for the horizontal arc
  double to = 0.0;
  double z0 = 0.0;      // plane of the horizontal arc
  double duration = 0.0;
  PlanarState entry;
  PlanarState exit;
};

struct ControlSequence {
  std::vector<Arc> arcs;

  double total_time() const {
    double t = 0.0;
    for (const auto& a : arcs) t += a.duration;
    return t;
  }

  /// Each arc must start where the previous one ended.
  bool continuous(double tol = 1e-10) const {
    for (std::size_t i = 1; i < arcs.size(); ++i) {
      const auto& p = arcs[i - 1].exit;
      const auto& q = arcs[i].entry;
      if (std::abs(p.y - q.y) > tol || std::abs(p.z - q.z) > tol) return false;
    }
    return true;
  }
};

/// Optimal families, named by their arcs between the leading and trailing
/// bang.
enum class Family { Bang, VerticalUp, VerticalDown, Horizontal, HorizontalVertical };

inline constexpr std::array<Family, 5> kAllFamilies{Family::Bang, Family::VerticalUp, Family::VerticalDown,
                                                    Family::Horizontal, Family::HorizontalVertical};

inline std::string_view family_name(Family f) {
  switch (f) {
    case Family::Bang: return "B";
    case Family::VerticalUp: return "B-Sv+-B";
    case Family::VerticalDown: return "B-Sv--B";
    case Family::Horizontal: return "B-Sh-B";
    case Family::HorizontalVertical: return "B-Sh-Sv--B";
  }
  return "?";
}

inline int arc_count(Family f) {
  switch (f) {
    case Family::Bang: return 1;
    case Family::HorizontalVertical: return 4;
    default: return 3;
  }
}

inline void require_bloch_ball(const SpinParams& p) {
  if (!p.within_bloch_ball()) throw InvalidParameter("relaxation times violate T2 <= 2 T1");
}

/// Height of the horizontal singular plane, -gamma / (2 (Gamma - gamma)),
/// wherever it lies.
inline double singular_plane_height(const SpinParams& p) {
  if (p.Gamma() == p.gamma()) throw DegenerateParameters("Gamma == gamma: singular plane at infinity");
  return -p.gamma() / (2.0 * (p.Gamma() - p.gamma()));
}

/// The singular plane height when the plane meets the Bloch ball
/// (for T1 >= T2 this is 2 T1 >= 3 T2), otherwise nothing.
inline std::optional<double> singular_plane_z0(const SpinParams& p) {
  const double z0 = singular_plane_height(p);
  if (std::abs(z0) > 1.0) return std::nullopt;
  return z0;
}

/// The control holding dz/dt = 0 on the plane z = z0.
inline double singular_horizontal_control(double y, const SpinParams& p) {
  const double z0 = singular_plane_height(p);
  if (!(std::abs(y) > kYFloor)) throw ArcTermination("horizontal singular arc reached the z-axis");
  return -p.gamma() * (1.0 - z0) / y;
}

/// Time to relax along the z-axis from z_from up to z_to with u = 0.
inline double vertical_arc_time(double z_from, double z_to, const SpinParams& p) {
  if (!(std::abs(z_from) <= 1.0 + 1e-12) || !(std::abs(z_to) <= 1.0 + 1e-12)) {
    throw InvalidParameter("vertical arc endpoints must lie in the Bloch ball");
  }
  if (z_to == z_from) return 0.0;
  if (z_to >= 1.0) throw Unreachable("equilibrium z = 1 is only reached asymptotically");
  if (z_to < z_from) throw Unreachable("vertical arc cannot move against relaxation");
  return std::log((1.0 - z_from) / (1.0 - z_to)) / p.gamma();
}

/// Time along the horizontal singular arc from y_from to y_to (same sign,
/// |y| decreasing).
inline double horizontal_arc_time(double y_from, double y_to, const SpinParams& p) {
  require_bloch_ball(p);
  const auto z0 = singular_plane_z0(p);
  if (!z0) throw InvalidParameter("horizontal singular arc is inadmissible (plane outside the Bloch ball)");
  if (y_from == y_to) return 0.0;
  if (y_from * y_to < 0.0) throw InvalidParameter("horizontal arc cannot cross the z-axis");
  if (y_from * y_from + (*z0) * (*z0) > 1.0 + 1e-12) {
    throw InvalidParameter("horizontal arc starts outside the Bloch ball");
  }
  if (std::abs(y_to) > std::abs(y_from)) throw Unreachable("horizontal arc only moves toward the z-axis");
  const double G = p.Gamma();
  const double k = p.gamma() * (1.0 - *z0) * (*z0);
  return -std::log((-G * y_to * y_to + k) / (-G * y_from * y_from + k)) / (2.0 * G);
}

/// Instantaneous rotation in the (y, z) plane by `angle` in the sense of
/// the planar equations (positive angle turns +z toward -y).
inline PlanarState delta_pulse(const PlanarState& s, double angle) {
  const double c = std::cos(angle);
  const double sn = std::sin(angle);
  return {s.y * c - s.z * sn, s.y * sn + s.z * c};
}

inline MagState delta_pulse(const MagState& m, double angle) {
  const auto r = delta_pulse(PlanarState{m.y, m.z}, angle);
  return {m.x, r.y, r.z};
}

/// Rotation angle in (-pi, pi] taking the direction of `from` onto `to`.
inline double rotation_between(const PlanarState& from, const PlanarState& to) {
  if (from.radius() == 0.0 || to.radius() == 0.0) return 0.0;
  double a = to.angle() - from.angle();
  while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  while (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

struct Candidate {
  Family family;
  double time;
};

/// Every admissible family for moving from radius rs to radius rm, with its
/// time, in fixed enumeration order.
inline std::vector<Candidate> transfer_candidates(double rs, double rm, const SpinParams& p) {
  require_bloch_ball(p);
  if (!(rs >= 0.0) || !(rm >= 0.0) || rs > 1.0 + 1e-12 || rm > 1.0 + 1e-12) {
    throw InvalidParameter("transfer endpoints must lie in the closed Bloch disk");
  }
  std::vector<Candidate> out;
  if (std::abs(rs - rm) <= 1e-15) {
    out.push_back({Family::Bang, 0.0});
    return out;
  }
  if (rm > rs) {
    if (rm >= 1.0) throw Unreachable("target on the Bloch sphere cannot be reached from inside");
    out.push_back({Family::VerticalUp, vertical_arc_time(rs, rm, p)});
    return out;
  }
  out.push_back({Family::VerticalDown, vertical_arc_time(-rs, -rm, p)});
  if (p.Gamma() != p.gamma()) {
    if (const auto z0 = singular_plane_z0(p); z0 && *z0 < 0.0) {
      const double h = -*z0;
      if (rs >= h) {
        const double ys = std::sqrt(std::max(0.0, rs * rs - h * h));
        if (rm >= h) {
          const double ym = std::sqrt(std::max(0.0, rm * rm - h * h));
          out.push_back({Family::Horizontal, horizontal_arc_time(ys, ym, p)});
        } else {
          out.push_back({Family::HorizontalVertical,
                         horizontal_arc_time(ys, 0.0, p) + vertical_arc_time(*z0, -rm, p)});
        }
      }
    }
  }
  return out;
}

inline Candidate best_candidate(const std::vector<Candidate>& cands) {
  Candidate best = cands.front();
  for (std::size_t i = 1; i < cands.size(); ++i) {
    const auto& c = cands[i];
    if (c.time < best.time - kTieTolerance ||
        (std::abs(c.time - best.time) <= kTieTolerance && arc_count(c.family) < arc_count(best.family))) {
      best = c;
    }
  }
  return best;
}

/// Minimum transfer time between radii and the family achieving it.
inline Candidate transfer_time(double rs, double rm, const SpinParams& p) {
  return best_candidate(transfer_candidates(rs, rm, p));
}

namespace detail {

inline Arc bang(const PlanarState& from, const PlanarState& to) {
  Arc a;
  a.kind = ArcKind::Bang;
  a.angle = rotation_between(from, to);
  a.entry = from;
  a.exit = to;
  return a;
}

inline Arc vertical(double z_from, double z_to, const SpinParams& p) {
  Arc a;
  a.kind = ArcKind::SingularVertical;
  a.from = z_from;
  a.to = z_to;
  a.duration = vertical_arc_time(z_from, z_to, p);
  a.entry = {0.0, z_from};
  a.exit = {0.0, z_to};
  return a;
}

inline Arc horizontal(double y_from, double y_to, double z0, const SpinParams& p) {
  Arc a;
  a.kind = ArcKind::SingularHorizontal;
  a.from = y_from;
  a.to = y_to;
  a.z0 = z0;
  a.duration = horizontal_arc_time(y_from, y_to, p);
  a.entry = {y_from, z0};
  a.exit = {y_to, z0};
  return a;
}

}  // namespace detail

/// Arcs of `family` from s to m; the family must be admissible.
inline ControlSequence build_sequence(Family family, const PlanarState& s, const PlanarState& m,
                                      const SpinParams& p) {
  ControlSequence seq;
  const double rs = s.radius();
  const double rm = m.radius();
  const double side = s.y < 0.0 ? -1.0 : 1.0;
  switch (family) {
    case Family::Bang:
      seq.arcs.push_back(detail::bang(s, m));
      break;
    case Family::VerticalUp:
    case Family::VerticalDown: {
      const double sign = family == Family::VerticalUp ? 1.0 : -1.0;
      const PlanarState p1{0.0, sign * rs};
      const PlanarState p2{0.0, sign * rm};
      seq.arcs.push_back(detail::bang(s, p1));
      seq.arcs.push_back(detail::vertical(p1.z, p2.z, p));
      seq.arcs.push_back(detail::bang(p2, m));
      break;
    }
    case Family::Horizontal:
    case Family::HorizontalVertical: {
      const double z0 = *singular_plane_z0(p);
      const PlanarState p1{side * std::sqrt(std::max(0.0, rs * rs - z0 * z0)), z0};
      seq.arcs.push_back(detail::bang(s, p1));
      if (family == Family::Horizontal) {
        const PlanarState p2{side * std::sqrt(std::max(0.0, rm * rm - z0 * z0)), z0};
        seq.arcs.push_back(detail::horizontal(p1.y, p2.y, z0, p));
        seq.arcs.push_back(detail::bang(p2, m));
      } else {
        const PlanarState p3{0.0, -rm};
        seq.arcs.push_back(detail::horizontal(p1.y, 0.0, z0, p));
        seq.arcs.push_back(detail::vertical(z0, -rm, p));
        seq.arcs.push_back(detail::bang(p3, m));
      }
      break;
    }
  }
  return seq;
}

struct Transfer {
  ControlSequence sequence;
  double time = 0.0;
  Family family = Family::Bang;
};

/// Minimum-time transfer between two planar states in the closed disk.
inline Transfer time_optimal_transfer(const PlanarState& s, const PlanarState& m, const SpinParams& p) {
  const auto best = transfer_time(s.radius(), m.radius(), p);
  return {build_sequence(best.family, s, m, p), best.time, best.family};
}

enum class SaturationRegime { HorizontalVertical, Inversion };

struct Saturation {
  ControlSequence sequence;
  SaturationRegime regime = SaturationRegime::Inversion;
  double t_min = 0.0;           // normalized
  double t_min_seconds = 0.0;   // physical
  /// Published closed form for the horizontal-vertical regime, in seconds.
  /// It times the horizontal arc from y = 1 rather than from the ball
  /// boundary sqrt(1 - z0^2), so it slightly overestimates t_min.
  std::optional<double> alpha_formula_seconds;
  std::string diagnostic;
};

/// Closed form T2/2 ln(1 - 2/(alpha T2)) + T1 ln((2T1 - T2)/(2(T1 - T2)))
/// with alpha = T2 (T2 - 2T1) / (2 T1 (T1 - T2)^2), for c = 1.
inline double alpha_formula_time(double t1, double t2) {
  const double alpha = t2 * (t2 - 2.0 * t1) / (2.0 * t1 * (t1 - t2) * (t1 - t2));
  return 0.5 * t2 * std::log(1.0 - 2.0 / (alpha * t2)) + t1 * std::log((2.0 * t1 - t2) / (2.0 * (t1 - t2)));
}

/// Fastest path from the north pole to the centre of the Bloch ball.
inline Saturation saturation_sequence(const SpinParams& p) {
  require_bloch_ball(p);
  Saturation out;
  const PlanarState north{0.0, 1.0};
  const PlanarState centre{0.0, 0.0};
  Candidate best{Family::VerticalDown, 0.0};
  if (p.Gamma() == p.gamma()) {
    best = {Family::VerticalDown, vertical_arc_time(-1.0, 0.0, p)};
    out.diagnostic = "T1 == T2: singular plane at infinity, using the inversion sequence";
  } else {
    best = transfer_time(1.0, 0.0, p);
  }
  out.sequence = build_sequence(best.family, north, centre, p);
  // The target is the centre: the trailing zero-angle bang carries nothing.
  if (!out.sequence.arcs.empty() && out.sequence.arcs.back().kind == ArcKind::Bang) out.sequence.arcs.pop_back();
  out.regime = best.family == Family::HorizontalVertical ? SaturationRegime::HorizontalVertical
                                                          : SaturationRegime::Inversion;
  out.t_min = best.time;
  out.t_min_seconds = p.to_seconds(best.time);
  if (out.regime == SaturationRegime::HorizontalVertical) {
    out.alpha_formula_seconds = alpha_formula_time(p.T1(), p.T2()) / p.unit_factor();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Simulation of a control sequence with the exact propagator.

struct SimulationOptions {
  double dt = 0.0;          // normalized step; 0 picks 2e-4 / max(Gamma, gamma, 1)
  double y_switch = 1e-3;   // |y| at which a horizontal arc onto the axis is closed
  bool record = false;
};

struct SimulationSample {
  double t;
  double y;
  double z;
};

struct SimulationResult {
  PlanarState final_state;
  double elapsed = 0.0;
  std::vector<double> arc_times;
  std::vector<SimulationSample> samples;
};

namespace detail {

inline PlanarState step_planar(const PlanarState& s, const SpinParams& p, double u, double dt) {
  const auto m = propagate_step(MagState{0.0, s.y, s.z}, p, 0.0, Control{u, 0.0}, dt);
  return {m.y, m.z};
}

/// Root of f on [0, hi] given f(0) > 0 >= f(hi), by bisection to machine
/// precision.
template <class F>
double bisect_time(F&& f, double hi) {
  double lo = 0.0;
  for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) > 0.0) lo = mid; else hi = mid;
  }
  return hi;
}

}  // namespace detail

/// Runs `seq` from `start`. Bangs are exact rotations onto each arc's exit
/// direction, vertical arcs use u = 0 until the target height is crossed,
/// horizontal arcs use the singular feedback control evaluated at the
/// predicted step midpoint. Elapsed time is what the simulation took, not
/// the arc durations stored in the sequence.
inline SimulationResult simulate_sequence(const ControlSequence& seq, const PlanarState& start, const SpinParams& p,
                                          SimulationOptions opt = {}) {
  const double dt = opt.dt > 0.0 ? opt.dt : 2e-4 / std::max({p.Gamma(), p.gamma(), 1.0});
  SimulationResult out;
  PlanarState s = start;
  double t = 0.0;
  auto record = [&] {
    if (opt.record) out.samples.push_back({t, s.y, s.z});
  };
  record();
  for (std::size_t ia = 0; ia < seq.arcs.size(); ++ia) {
    const Arc& arc = seq.arcs[ia];
    const double t_arc = t;
    switch (arc.kind) {
      case ArcKind::Bang:
        s = delta_pulse(s, rotation_between(s, arc.exit));
        record();
        break;
      case ArcKind::SingularVertical: {
        if (std::abs(s.y) > 0.0) s = delta_pulse(s, rotation_between(s, PlanarState{0.0, s.z < 0.0 ? -1.0 : 1.0}));
        const double target = arc.to;
        if (s.z >= target) break;
        auto gap = [&](const PlanarState& q) { return target - q.z; };
        for (;;) {
          const PlanarState next = detail::step_planar(s, p, 0.0, dt);
          if (gap(next) > 0.0) {
            s = next;
            t += dt;
            record();
            continue;
          }
          const PlanarState base = s;
          const double tau = detail::bisect_time([&](double h) { return gap(detail::step_planar(base, p, 0.0, h)); }, dt);
          s = detail::step_planar(base, p, 0.0, tau);
          t += tau;
          record();
          break;
        }
        break;
      }
      case ArcKind::SingularHorizontal: {
        const double z0 = arc.z0;
        const double sign = arc.from < 0.0 ? -1.0 : 1.0;
        const double stop = std::max(std::abs(arc.to), opt.y_switch);
        auto feedback_step = [&](const PlanarState& q, double h) {
          const double u0 = -p.gamma() * (1.0 - z0) / q.y;
          const PlanarState mid = detail::step_planar(q, p, u0, 0.5 * h);
          const double u = -p.gamma() * (1.0 - z0) / mid.y;
          return detail::step_planar(q, p, u, h);
        };
        auto gap = [&](const PlanarState& q) { return sign * q.y - stop; };
        if (gap(s) > 0.0) {
          for (;;) {
            const PlanarState next = feedback_step(s, dt);
            if (gap(next) > 0.0 && sign * next.y < sign * s.y) {
              s = next;
              t += dt;
              record();
              continue;
            }
            const PlanarState base = s;
            const double tau = detail::bisect_time([&](double h) { return gap(feedback_step(base, h)); }, dt);
            s = feedback_step(base, tau);
            t += tau;
            record();
            break;
          }
        }
        // An arc that ends on the axis is closed by a bang onto the axis; the
        // remaining horizontal time is O(y^2) and the speed mismatch O(y^4).
        if (arc.to == 0.0) {
          s = delta_pulse(s, rotation_between(s, PlanarState{0.0, -1.0}));
          record();
        }
        break;
      }
    }
    out.arc_times.push_back(t - t_arc);
  }
  out.final_state = s;
  out.elapsed = t;
  return out;
}

}  // namespace bloch::geo
