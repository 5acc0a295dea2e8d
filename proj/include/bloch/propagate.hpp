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

// Exact propagation of the Bloch equations with relaxation, resonance offset
// and piecewise-constant transverse controls:
//
//   dx/dt = -Gamma x - w y + uy z
//   dy/dt =  w x - Gamma y - ux z
//   dz/dt = -uy x + ux y + gamma (1 - z)
//
// The affine system is written as a 4x4 homogeneous generator acting on
// (x, y, z, 1) and each constant-control interval is advanced with its
// matrix exponential.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bloch/core.hpp"
#include "bloch/expm.hpp"
#include "bloch/parallel.hpp"

namespace bloch {

using Generator = Eigen::Matrix4d;
using Propagator = Eigen::Matrix4d;
using Trajectory = std::vector<MagState>;

/// Homogeneous generator for normalized offset and control.
inline Generator step_generator(const SpinParams& p, double offset, Control u) {
  const double G = p.Gamma();
  const double g = p.gamma();
  Generator a;
  a << -G, -offset, u.y, 0.0,
       offset, -G, -u.x, 0.0,
       -u.y, u.x, -g, g,
       0.0, 0.0, 0.0, 0.0;
  return a;
}

enum class Channel { X = 0, Y = 1 };

/// d(generator)/d(control channel).
inline Generator control_derivative(Channel c) {
  Generator e = Generator::Zero();
  if (c == Channel::X) {
    e(1, 2) = -1.0;
    e(2, 1) = 1.0;
  } else {
    e(0, 2) = 1.0;
    e(2, 0) = -1.0;
  }
  return e;
}

inline Propagator step_propagator(const SpinParams& p, double offset, Control u, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidParameter("propagation step must be finite and > 0");
  if (!std::isfinite(offset) || !std::isfinite(u.x) || !std::isfinite(u.y)) {
    throw InvalidParameter("offset and controls must be finite");
  }
  return expm<4>(Generator(step_generator(p, offset, u) * dt));
}

inline MagState apply(const Propagator& prop, const MagState& m) {
  const Eigen::Vector4d r = prop * m.homogeneous();
  return {r[0], r[1], r[2]};
}

/// Advances `state` by normalized time dt under constant normalized control.
inline MagState propagate_step(const MagState& state, const SpinParams& p, double offset, Control u, double dt) {
  return apply(step_propagator(p, offset, u, dt), state);
}

/// Pulse step in normalized units (rad/s * Td).
inline Control normalized_control(const Control& c, const SpinParams& p, double scale = 1.0) {
  return {c.x * p.Td() * scale, c.y * p.Td() * scale};
}

/// Trajectory (steps + 1 states) of one isochromat under a physical pulse.
inline Trajectory propagate_pulse(const MagState& state, const SpinParams& p, double offset, const Pulse& pulse) {
  pulse.validate();
  const double tau = p.to_normalized(pulse.dt);
  Trajectory out;
  out.reserve(pulse.size() + 1);
  out.push_back(state);
  for (const auto& step : pulse.steps) {
    out.push_back(propagate_step(out.back(), p, offset, normalized_control(step, p), tau));
  }
  return out;
}

/// Final state only; no trajectory storage.
inline MagState propagate_pulse_final(const MagState& state, const SpinParams& p, double offset,
                                      const Pulse& pulse) {
  pulse.validate();
  const double tau = p.to_normalized(pulse.dt);
  MagState m = state;
  for (const auto& step : pulse.steps) m = propagate_step(m, p, offset, normalized_control(step, p), tau);
  return m;
}

/// One trajectory per isochromat. Isochromats are independent, so the
/// result is identical for any thread count.
inline std::vector<Trajectory> propagate_pulse(const MagState& state, const SpinParams& p,
                                               std::span<const Isochromat> ensemble, const Pulse& pulse,
                                               int threads = 1) {
  pulse.validate();
  std::vector<Trajectory> out(ensemble.size());
  parallel_for(ensemble.size(), threads,
               [&](std::size_t i) { out[i] = propagate_pulse(state, p, ensemble[i].offset, pulse); });
  return out;
}

/// Closed-form relaxation without control or offset over normalized time.
inline MagState free_evolution(const MagState& m, const SpinParams& p, double duration) {
  if (!(duration >= 0.0)) throw InvalidParameter("free evolution duration must be >= 0");
  const double e2 = std::exp(-p.Gamma() * duration);
  const double e1 = std::exp(-p.gamma() * duration);
  return {m.x * e2, m.y * e2, 1.0 + (m.z - 1.0) * e1};
}

/// dR/dt of the planar system in polar form (y = R cos, z = R sin).
inline double radial_speed(double R, double theta, const SpinParams& p) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return -p.Gamma() * R * c * c + p.gamma() * (s - R * s * s);
}

/// dtheta/dt of the planar system in polar form; R > 0.
inline double angular_speed(double R, double theta, double u, const SpinParams& p) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return p.gamma() * c * (1.0 / R - s) + p.Gamma() * s * c + u;
}

struct RadialSample {
  double theta;
  double R;
  double dRdt;
};

/// Radial speed sampled on a (theta, R) grid, theta in [-pi, pi], R in (0, 1].
inline std::vector<RadialSample> radial_speed_grid(const SpinParams& p, int n_theta, int n_r) {
  if (n_theta < 2 || n_r < 1) throw InvalidParameter("radial grid needs n_theta >= 2 and n_r >= 1");
  std::vector<RadialSample> out;
  out.reserve(static_cast<std::size_t>(n_theta) * n_r);
  for (int i = 0; i < n_theta; ++i) {
    const double th = -std::numbers::pi + 2.0 * std::numbers::pi * i / (n_theta - 1);
    for (int j = 1; j <= n_r; ++j) {
      const double r = static_cast<double>(j) / n_r;
      out.push_back({th, r, radial_speed(r, th, p)});
    }
  }
  return out;
}

/// Characteristic points of dR/dt over theta at fixed R, restricted to the
/// half-plane y >= 0 (theta in [-pi/2, pi/2]); the other half mirrors it.
struct RadialProfile {
  double R;
  double theta_min;
  double speed_min;
  double theta_max;
  double speed_max;
  std::vector<double> zeros;
};

inline RadialProfile radial_profile(double R, const SpinParams& p) {
  if (!(R > 0.0)) throw InvalidParameter("radial profile needs R > 0");
  // With s = sin(theta): dR/dt = -Gamma R + (Gamma - gamma) R s^2 + gamma s.
  const double a = (p.Gamma() - p.gamma()) * R;
  const double b = p.gamma();
  const double c = -p.Gamma() * R;
  auto f = [&](double s) { return (a * s + b) * s + c; };
  std::vector<double> cand{-1.0, 1.0};
  if (a != 0.0) {
    const double vertex = -b / (2.0 * a);
    if (vertex > -1.0 && vertex < 1.0) cand.push_back(vertex);
  }
  RadialProfile out{R, 0.0, 0.0, 0.0, 0.0, {}};
  double lo = f(cand[0]);
  double hi = lo;
  double slo = cand[0];
  double shi = cand[0];
  for (double s : cand) {
    const double v = f(s);
    if (v < lo) { lo = v; slo = s; }
    if (v > hi) { hi = v; shi = s; }
  }
  out.theta_min = std::asin(slo);
  out.speed_min = lo;
  out.theta_max = std::asin(shi);
  out.speed_max = hi;
  if (a == 0.0) {
    if (b != 0.0) {
      const double s = -c / b;
      if (s >= -1.0 && s <= 1.0) out.zeros.push_back(std::asin(s));
    }
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      const double qq = -0.5 * (b + std::copysign(sq, b));
      for (double s : {qq / a, c / qq}) {
        if (std::isfinite(s) && s >= -1.0 && s <= 1.0) out.zeros.push_back(std::asin(s));
      }
      std::sort(out.zeros.begin(), out.zeros.end());
      out.zeros.erase(std::unique(out.zeros.begin(), out.zeros.end()), out.zeros.end());
    }
  }
  return out;
}

}  // namespace bloch
