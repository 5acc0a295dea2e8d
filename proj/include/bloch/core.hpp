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

// Domain types shared by every module: magnetization states, relaxation
// parameters, piecewise-constant pulses and isochromats.
//
// Units. Library internals work in normalized units: time is measured in
// multiples of the detection time Td, controls and offsets in rad per Td,
// magnetization in multiples of M0. Pulses keep physical units (seconds,
// rad/s) because they are the exchange format; conversion happens at the
// propagation boundary.

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bloch {

class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DegenerateParameters : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class Unreachable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Magnetization (x, y, z) normalized by the thermal equilibrium M0.
struct MagState {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;

  static MagState equilibrium() { return {0.0, 0.0, 1.0}; }
  static MagState from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

  Eigen::Vector3d vec() const { return {x, y, z}; }
  Eigen::Vector4d homogeneous() const { return {x, y, z, 1.0}; }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  double transverse() const { return std::hypot(x, y); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

/// Relaxation times plus the dimensionless rates that enter the normalized
/// Bloch equations: gamma = c*Td/T1, Gamma = c*Td/T2.
class SpinParams {
 public:
  static SpinParams normalize(double t1, double t2, double td = 1.0, double unit_factor = 1.0) {
    if (!(t1 > 0.0) || !(t2 > 0.0) || !(td > 0.0) || !(unit_factor > 0.0) ||
        !std::isfinite(t1) || !std::isfinite(t2) || !std::isfinite(td) || !std::isfinite(unit_factor)) {
      throw InvalidParameter("relaxation times, detection time and unit factor must be finite and > 0");
    }
    return SpinParams(t1, t2, td, unit_factor);
  }

  /// Parameters given directly as normalized rates (Td = 1, c = 1).
  static SpinParams from_rates(double Gamma, double gamma) {
    if (!(Gamma > 0.0) || !(gamma > 0.0)) {
      throw InvalidParameter("relaxation rates must be > 0");
    }
    auto p = normalize(1.0 / gamma, 1.0 / Gamma, 1.0, 1.0);
    p.gamma_ = gamma;  // keep the given rates exact
    p.Gamma_ = Gamma;
    return p;
  }

  /// Parameters with relaxation switched off (pure rotations).
  static SpinParams no_relaxation(double td = 1.0) {
    SpinParams p(std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), td, 1.0);
    p.gamma_ = 0.0;
    p.Gamma_ = 0.0;
    return p;
  }

  double T1() const { return t1_; }
  double T2() const { return t2_; }
  double Td() const { return td_; }
  double unit_factor() const { return c_; }
  double gamma() const { return gamma_; }
  double Gamma() const { return Gamma_; }

  /// Bloch-ball condition 0 <= T2 <= 2 T1.
  bool within_bloch_ball() const { return Gamma_ >= 0.5 * gamma_; }

  /// Normalized time (multiples of Td) to seconds.
  double to_seconds(double tau) const { return tau * td_; }
  double to_normalized(double seconds) const { return seconds / td_; }

 private:
  SpinParams(double t1, double t2, double td, double c)
      : t1_(t1), t2_(t2), td_(td), c_(c), gamma_(c * td / t1), Gamma_(c * td / t2) {}

  double t1_;
  double t2_;
  double td_;
  double c_;
  double gamma_;
  double Gamma_;
};

/// One piecewise-constant control value (rad/s in a Pulse, rad/Td once
/// normalized).
struct Control {
  double x = 0.0;
  double y = 0.0;

  double amplitude() const { return std::hypot(x, y); }
  friend bool operator==(const Control&, const Control&) = default;
};

struct Pulse {
  double dt = 0.0;  // seconds per step
  std::vector<Control> steps;
  std::optional<double> u_max;  // rad/s

  std::size_t size() const { return steps.size(); }
  double duration() const { return dt * static_cast<double>(steps.size()); }

  void validate() const {
    if (steps.empty()) throw InvalidParameter("pulse has no steps");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidParameter("pulse dt must be finite and > 0");
    if (u_max && !(*u_max > 0.0)) throw InvalidParameter("pulse u_max must be > 0");
    for (const auto& s : steps) {
      if (!std::isfinite(s.x) || !std::isfinite(s.y)) throw InvalidParameter("pulse step is not finite");
      if (u_max && s.amplitude() > *u_max * (1.0 + 1e-12)) {
        throw InvalidParameter("pulse step exceeds u_max");
      }
    }
  }

  static Pulse zeros(std::size_t n, double dt, std::optional<double> u_max = std::nullopt) {
    return Pulse{dt, std::vector<Control>(n), u_max};
  }
};

/// Resonance offset in rad per Td plus an ensemble weight.
struct Isochromat {
  double offset = 0.0;
  double weight = 1.0;
};

/// Offset in Hz to normalized rad per Td.
inline double offset_from_hz(double hz, double td) { return kTwoPi * hz * td; }
inline double offset_to_hz(double offset, double td) { return offset / (kTwoPi * td); }

/// Polar form of a planar (y, z) state: y = R cos(theta), z = R sin(theta).
/// theta is measured from the transverse axis, which is the convention under
/// which the radial equation dR/dt = -Gamma R cos^2 + gamma (sin - R sin^2)
/// follows from the planar Bloch equations.
struct PolarState {
  double R = 0.0;
  double theta = 0.0;

  static PolarState from_planar(double y, double z) { return {std::hypot(y, z), std::atan2(z, y)}; }
  double y() const { return R * std::cos(theta); }
  double z() const { return R * std::sin(theta); }
};

}  // namespace bloch
