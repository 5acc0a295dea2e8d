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

// Signal-to-noise per unit time of a cyclic experiment. Each cycle is a
// control period of length Tc taking the restart point S to the measure
// point M, followed by a detection period Td = 1 of free evolution taking M
// back to S. The figure of merit is Q = y_m / sqrt(1 + Tc), where Tc is the
// minimum transfer time from S to M.

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bloch/core.hpp"
#include "bloch/optim.hpp"
#include "bloch/parallel.hpp"
#include "bloch/synthesis.hpp"

namespace bloch::snr {

using geo::Family;
using geo::PlanarState;

/// Nodes closer than this to the unit circle are not steady states.
inline constexpr double kBoundaryMargin = 1e-6;

struct MeasurePoint {
  double y_m = 0.0;
  double z_m = 0.0;
  double y_s = 0.0;
  double z_s = 0.0;
  double tc = 0.0;
  double q = 0.0;
  Family region = Family::Bang;

  PlanarState measure() const { return {y_m, z_m}; }
  PlanarState restart() const { return {y_s, z_s}; }
};

/// Restart point S reached from M by free evolution over one detection time.
inline PlanarState steady_from_measure(const PlanarState& m, const SpinParams& p) {
  if (!(m.radius() <= 1.0 + 1e-12)) throw InvalidParameter("measure point outside the Bloch disk");
  const auto s = free_evolution(MagState{0.0, m.y, m.z}, p, 1.0);
  return {s.y, s.z};
}

/// Q at the measure point (y_m, z_m); negative y_m is mapped to |y_m| by the
/// mirror symmetry of the problem.
inline MeasurePoint q_factor(const PlanarState& m, const SpinParams& p) {
  MeasurePoint out;
  out.y_m = std::abs(m.y);
  out.z_m = m.z;
  const PlanarState mm{out.y_m, out.z_m};
  const PlanarState s = steady_from_measure(mm, p);
  out.y_s = s.y;
  out.z_s = s.z;
  const auto best = geo::transfer_time(s.radius(), mm.radius(), p);
  out.tc = best.time;
  out.region = best.family;
  out.q = out.y_m / std::sqrt(1.0 + out.tc);
  return out;
}

struct SurfaceNode {
  double y_m = 0.0;
  double z_m = 0.0;
  double q = 0.0;
  Family region = Family::Bang;
  bool feasible = false;
};

struct Surface {
  int resolution = 0;
  std::vector<SurfaceNode> nodes;  // z outer, y inner

  const SurfaceNode& at(int iy, int iz) const { return nodes[static_cast<std::size_t>(iz) * resolution + iy]; }
};

inline double grid_y(int i, int n) { return static_cast<double>(i) / (n - 1); }
inline double grid_z(int j, int n) { return -1.0 + 2.0 * static_cast<double>(j) / (n - 1); }

inline bool inside_domain(double y, double z) {
  return y >= 0.0 && std::hypot(y, z) <= 1.0 - kBoundaryMargin;
}

/// Q on a resolution x resolution grid over y in [0, 1], z in [-1, 1];
/// nodes outside the open disk are flagged infeasible.
inline Surface q_surface(const SpinParams& p, int resolution, int threads = 1) {
  if (resolution < 32) throw InvalidParameter("surface resolution must be >= 32");
  geo::require_bloch_ball(p);
  Surface out;
  out.resolution = resolution;
  out.nodes.resize(static_cast<std::size_t>(resolution) * resolution);
  parallel_for(out.nodes.size(), threads, [&](std::size_t k) {
    const int iz = static_cast<int>(k / resolution);
    const int iy = static_cast<int>(k % resolution);
    SurfaceNode n;
    n.y_m = grid_y(iy, resolution);
    n.z_m = grid_z(iz, resolution);
    if (inside_domain(n.y_m, n.z_m)) {
      const auto mp = q_factor({n.y_m, n.z_m}, p);
      n.q = mp.q;
      n.region = mp.region;
      n.feasible = true;
    }
    out.nodes[k] = n;
  });
  return out;
}

/// Flip angle maximizing the steady-state signal:
/// cos(theta) = (e^-gamma + e^-Gamma) / (1 + e^-(Gamma + gamma)).
inline double ernst_angle(const SpinParams& p) {
  const double e1 = std::exp(-p.gamma());
  const double e2 = std::exp(-p.Gamma());
  return std::acos((e1 + e2) / (1.0 + e1 * e2));
}

/// One cycle: free evolution over Td, then a delta pulse of flip angle
/// theta turning +z toward +y.
inline PlanarState cycle_map(const PlanarState& m, double theta, const SpinParams& p) {
  return geo::delta_pulse(steady_from_measure(m, p), -theta);
}

/// Periodic regime of the repeated (detection, flip theta) cycle: the fixed
/// point of cycle_map, from a 2x2 linear solve. R_M = R_S by construction.
inline MeasurePoint ernst_steady_state(double theta, const SpinParams& p) {
  if (!(theta >= 0.0) || !(theta <= std::numbers::pi)) throw InvalidParameter("flip angle must lie in [0, pi]");
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Eigen::Matrix2d rot;
  rot << c, s, -s, c;
  const Eigen::Matrix2d decay = Eigen::Vector2d(std::exp(-p.Gamma()), std::exp(-p.gamma())).asDiagonal();
  const Eigen::Vector2d source(0.0, 1.0 - std::exp(-p.gamma()));
  const Eigen::Matrix2d lhs = Eigen::Matrix2d::Identity() - rot * decay;
  if (std::abs(lhs.determinant()) < 1e-14) throw NumericalFailure("cycle has no unique steady state");
  const Eigen::Vector2d m = lhs.partialPivLu().solve(rot * source);
  return q_factor({m.x(), m.y()}, p);
}

/// Angle between the restart and measure points, i.e. the flip angle of the
/// delta pulse connecting them when they have equal radius.
inline double flip_angle(const MeasurePoint& mp) {
  const Eigen::Vector2d s(mp.y_s, mp.z_s);
  const Eigen::Vector2d m(mp.y_m, mp.z_m);
  const double denom = s.norm() * m.norm();
  if (denom == 0.0) return 0.0;
  return std::acos(std::clamp(s.dot(m) / denom, -1.0, 1.0));
}

struct MaximizeOptions {
  int grid_resolution = 64;
  int threads = 1;
  optim::PatternSearchOptions search{};
};

struct Maximum {
  MeasurePoint point;
  double theta = 0.0;
  double theta_ernst = 0.0;
  int evaluations = 0;
  bool converged = false;
  std::string diagnostic;
};

/// Grid search over the half-disk, then local ascent from the best node.
///
/// Q is kinked along the Ernst ellipsoid (Tc = 0 there and grows linearly
/// off it), and near the maximum the cone of improving directions narrows
/// to nothing, so a Cartesian compass poll stalls on the ridge. The ascent
/// therefore works in polar coordinates around the origin: the inner search
/// maximizes along a ray (it lands on the kink exactly), the outer one over
/// the ray angle, where the profile is smooth. A pattern search from the
/// result spends the remaining evaluation budget.
inline Maximum maximize_q(const SpinParams& p, MaximizeOptions opt = {}) {
  if (!(p.gamma() > 0.0) || !(p.Gamma() > 0.0)) throw InvalidParameter("relaxation rates must be > 0");
  const Surface grid = q_surface(p, opt.grid_resolution, opt.threads);
  const SurfaceNode* best = nullptr;
  for (const auto& n : grid.nodes) {
    if (n.feasible && (!best || n.q > best->q)) best = &n;
  }
  auto objective = [&](const Eigen::Vector2d& v) {
    if (!inside_domain(v.x(), v.y())) return -std::numeric_limits<double>::infinity();
    return q_factor({v.x(), v.y()}, p).q;
  };
  const double r_max = 1.0 - 2.0 * kBoundaryMargin;
  int evaluations = 0;
  auto along_ray = [&](double phi) {
    const Eigen::Vector2d dir(std::cos(phi), std::sin(phi));
    auto r = optim::scan_golden_max([&](double R) { return objective(R * dir); }, 0.0, r_max, 24, 1e-11);
    evaluations += r.evaluations;
    return r;
  };
  const double half = std::numbers::pi / 2;
  const double phi0 = std::atan2(best->z_m, best->y_m);
  const auto outer = optim::scan_golden_max([&](double phi) { return along_ray(phi).value; },
                                            std::max(-half, phi0 - 0.2), std::min(half, phi0 + 0.2), 15, 1e-10);
  const double R = along_ray(outer.x).x;
  Eigen::Vector2d x0(R * std::cos(outer.x), R * std::sin(outer.x));
  if (!(objective(x0) >= best->q)) x0 = {best->y_m, best->z_m};

  auto search = opt.search;
  search.initial_step = 1e-6;
  search.max_evaluations = std::max(1, search.max_evaluations - evaluations);
  const auto r = optim::pattern_search_max(objective, x0, search);
  Maximum out;
  out.point = q_factor({r.x.x(), r.x.y()}, p);
  out.theta = flip_angle(out.point);
  out.theta_ernst = ernst_angle(p);
  out.evaluations = evaluations + r.evaluations;
  out.converged = r.converged;
  if (!r.converged) out.diagnostic = "pattern search hit the evaluation limit; returning best point found";
  return out;
}

struct BoundaryJump {
  double y = 0.0;
  double z = 0.0;
  Family from = Family::Bang;
  Family to = Family::Bang;
  double raw_difference = 0.0;  // |Q(b + h) - Q(b - h)|
  double jump = 0.0;            // difference of one-sided extrapolations to b
  double offset = 0.0;          // sample offset h actually used
};

/// Locates every label change between neighbouring feasible grid nodes by
/// bisection and measures the jump of Q across it. Each side is
/// extrapolated quadratically to the boundary from offsets h, 2h and 3h, so
/// a kink leaves a residual of O(h^3) while a discontinuity would not
/// vanish (the cubic order matters near the rim, where Tc carries
/// log(1 - R) terms of large curvature). An edge may cross several
/// boundaries, e.g. through a sliver where two families tie; each crossing
/// is measured on its own, halving h until both sides' samples stay in
/// their own region.
inline std::vector<BoundaryJump> boundary_jumps(const SpinParams& p, const Surface& surf, double h = 1e-4) {
  std::vector<BoundaryJump> out;
  const int n = surf.resolution;
  auto label = [&](const Eigen::Vector2d& v) { return q_factor({v.x(), v.y()}, p).region; };

  auto measure = [&](const Eigen::Vector2d& c, const Eigen::Vector2d& d, Family lo_label, Family hi_label) {
    double hh = h;
    double qm[3], qp[3];
    for (;;) {
      bool clean = true;
      for (int k = 0; k < 3 && clean; ++k) {
        const Eigen::Vector2d lo_pt = c - (k + 1) * hh * d;
        const Eigen::Vector2d hi_pt = c + (k + 1) * hh * d;
        if (!inside_domain(lo_pt.x(), lo_pt.y()) || !inside_domain(hi_pt.x(), hi_pt.y())) return;
        const auto mlo = q_factor({lo_pt.x(), lo_pt.y()}, p);
        const auto mhi = q_factor({hi_pt.x(), hi_pt.y()}, p);
        clean = mlo.region == lo_label && mhi.region == hi_label;
        qm[k] = mlo.q;
        qp[k] = mhi.q;
      }
      if (clean) break;
      hh *= 0.5;
      if (hh < 1e-3 * h) return;  // region narrower than the resolution of the probe
    }
    BoundaryJump j;
    j.y = c.x();
    j.z = c.y();
    j.from = lo_label;
    j.to = hi_label;
    j.offset = hh;
    j.raw_difference = std::abs(qp[0] - qm[0]);
    j.jump = std::abs((3.0 * qm[0] - 3.0 * qm[1] + qm[2]) - (3.0 * qp[0] - 3.0 * qp[1] + qp[2]));
    out.push_back(j);
  };

  auto visit = [&](const SurfaceNode& a, const SurfaceNode& b) {
    if (!a.feasible || !b.feasible || a.region == b.region) return;
    const Eigen::Vector2d end(b.y_m, b.z_m);
    const Eigen::Vector2d d = (end - Eigen::Vector2d(a.y_m, a.z_m)).normalized();
    Eigen::Vector2d start(a.y_m, a.z_m);
    Family la = a.region;
    for (int crossing = 0; crossing < 8 && la != b.region; ++crossing) {
      Eigen::Vector2d lo = start, hi = end;
      for (int i = 0; i < 64; ++i) {
        const Eigen::Vector2d mid = 0.5 * (lo + hi);
        if (label(mid) == la) lo = mid; else hi = mid;
      }
      const Family next = label(hi);
      measure(0.5 * (lo + hi), d, la, next);
      start = hi;
      la = next;
    }
  };
  for (int iz = 0; iz < n; ++iz) {
    for (int iy = 0; iy < n; ++iy) {
      if (iy + 1 < n) visit(surf.at(iy, iz), surf.at(iy + 1, iz));
      if (iz + 1 < n) visit(surf.at(iy, iz), surf.at(iy, iz + 1));
    }
  }
  return out;
}

/// Repetition count and the unnormalized SNR R = sqrt(T / Td) Q for a fixed
/// total experiment time.
struct CycleReport {
  double n_cycles = 0.0;
  double r_value = 0.0;
};

inline CycleReport cycle_report(const MeasurePoint& mp, const SpinParams& p, double t_total_seconds) {
  const double td = p.Td();
  const double n = t_total_seconds / (td * (1.0 + mp.tc));
  if (!(n >= 1.0)) throw InvalidParameter("total time shorter than one cycle");
  return {n, std::sqrt(t_total_seconds / td) * mp.q};
}

}  // namespace bloch::snr
