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

// GRAPE optimization of piecewise-constant pulses for two-species contrast
// over an ensemble of resonance offsets.
//
// The cost is a weighted ensemble mean of a terminal function of the final
// magnetization of species a (to keep) and species b (to suppress). Its
// gradient is the exact derivative of the discrete propagation: a forward
// pass stores every state and step propagator, a backward pass carries the
// costate through the transposed propagators, and the derivative of each
// step propagator along a control channel is the Frechet derivative of the
// matrix exponential, applied to the stored state.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "bloch/core.hpp"
#include "bloch/expm.hpp"
#include "bloch/optim.hpp"
#include "bloch/parallel.hpp"
#include "bloch/propagate.hpp"

namespace bloch::grape {

struct Species {
  std::string name;
  SpinParams params = SpinParams::normalize(1.0, 1.0);

  void validate() const {
    if (!params.within_bloch_ball()) throw InvalidParameter("species " + name + ": T2 must not exceed 2 T1");
  }
};

/// Offsets in Hz with weights, plus an optional control-amplitude scaling
/// axis (B1 inhomogeneity); by default the scaling axis is {1}.
struct OffsetEnsemble {
  std::vector<double> offsets_hz;
  std::vector<double> weights;
  double min_hz = 0.0;
  double max_hz = 0.0;
  std::vector<double> b1_scales{1.0};

  static OffsetEnsemble range(double min_hz, double max_hz, double step_hz) {
    if (!(max_hz >= min_hz)) throw InvalidParameter("offset range needs max >= min");
    if (max_hz > min_hz && !(step_hz > 0.0)) throw InvalidParameter("offset step must be > 0");
    OffsetEnsemble e;
    e.min_hz = min_hz;
    e.max_hz = max_hz;
    if (max_hz == min_hz) {
      e.offsets_hz.push_back(min_hz);
    } else {
      const auto n = static_cast<long>(std::floor((max_hz - min_hz) / step_hz + 1e-9));
      for (long i = 0; i <= n; ++i) e.offsets_hz.push_back(min_hz + static_cast<double>(i) * step_hz);
    }
    e.weights.assign(e.offsets_hz.size(), 1.0);
    return e;
  }

  static OffsetEnsemble list(std::vector<double> hz) {
    if (hz.empty()) throw InvalidParameter("offset list is empty");
    OffsetEnsemble e;
    e.min_hz = *std::min_element(hz.begin(), hz.end());
    e.max_hz = *std::max_element(hz.begin(), hz.end());
    e.weights.assign(hz.size(), 1.0);
    e.offsets_hz = std::move(hz);
    return e;
  }

  std::size_t offset_count() const { return offsets_hz.size(); }
  std::size_t size() const { return offsets_hz.size() * b1_scales.size(); }
  double offset_hz(std::size_t member) const { return offsets_hz[member / b1_scales.size()]; }
  double b1_scale(std::size_t member) const { return b1_scales[member % b1_scales.size()]; }
  double weight(std::size_t member) const { return weights[member / b1_scales.size()]; }

  void validate() const {
    if (offsets_hz.empty()) throw InvalidParameter("offset ensemble is empty");
    if (weights.size() != offsets_hz.size()) throw InvalidParameter("one weight per offset required");
    if (b1_scales.empty()) throw InvalidParameter("B1 scaling axis is empty");
    double total = 0.0;
    for (std::size_t i = 0; i < offsets_hz.size(); ++i) {
      if (!std::isfinite(offsets_hz[i]) || offsets_hz[i] < min_hz - 1e-9 || offsets_hz[i] > max_hz + 1e-9) {
        throw InvalidParameter("offset outside the declared interval");
      }
      if (!(weights[i] >= 0.0)) throw InvalidParameter("offset weights must be >= 0");
      total += weights[i];
    }
    if (!(total > 0.0)) throw InvalidParameter("offset weights sum to zero");
    for (double s : b1_scales) {
      if (!(s > 0.0) || !std::isfinite(s)) throw InvalidParameter("B1 scales must be finite and > 0");
    }
  }
};

enum class CostKind { Transverse, Preparation };

inline std::string_view cost_name(CostKind k) { return k == CostKind::Transverse ? "transverse" : "preparation"; }

struct PulseTemplate {
  std::size_t n_steps = 0;
  double dt = 0.0;  // seconds
  std::optional<double> u_max;  // rad/s
};

/// Species a is kept (signal maximized), species b is suppressed.
struct ContrastProblem {
  Species a;
  Species b;
  OffsetEnsemble ensemble;
  PulseTemplate pulse;
  CostKind cost = CostKind::Preparation;
  MagState initial = MagState::equilibrium();
  bool include_b = true;  // false: single-species design, only a's term is costed

  void validate() const {
    a.validate();
    b.validate();
    ensemble.validate();
    if (!(pulse.dt > 0.0)) throw InvalidParameter("pulse dt must be > 0");
    if (pulse.u_max && !(*pulse.u_max > 0.0)) throw InvalidParameter("pulse u_max must be > 0");
    if (a.params.Td() != b.params.Td()) throw InvalidParameter("both species must share the time normalization");
  }

  Pulse zero_pulse() const { return Pulse::zeros(pulse.n_steps, pulse.dt, pulse.u_max); }
};

// ---------------------------------------------------------------------------
// Costs

namespace detail {

inline void check_finals(std::span<const MagState> fa, std::span<const MagState> fb, std::span<const double> w) {
  if (fa.empty() || fb.empty()) throw InvalidParameter("contrast cost needs a non-empty ensemble");
  if (fa.size() != fb.size()) throw InvalidParameter("species final-state lists differ in length");
  if (!w.empty() && w.size() != fa.size()) throw InvalidParameter("one weight per final state required");
}

inline double weight_at(std::span<const double> w, std::size_t i) { return w.empty() ? 1.0 : w[i]; }

/// Terminal cost of one final state and its gradient with respect to
/// (x, y, z); `keep` selects the sign convention of species a.
inline double terminal(CostKind kind, bool keep, const MagState& m, Eigen::Vector3d* grad) {
  if (kind == CostKind::Transverse || keep) {
    if (kind == CostKind::Preparation) {  // kept species, longitudinal
      if (grad) *grad = {0.0, 0.0, -1.0};
      return -m.z;
    }
    const double t = m.transverse();
    const double sign = keep ? -1.0 : 1.0;
    if (grad) *grad = t > 0.0 ? Eigen::Vector3d(sign * m.x / t, sign * m.y / t, 0.0) : Eigen::Vector3d::Zero();
    return sign * t;
  }
  const double n = m.norm();  // suppressed species, full norm
  if (grad) *grad = n > 0.0 ? Eigen::Vector3d(m.x / n, m.y / n, m.z / n) : Eigen::Vector3d::Zero();
  return n;
}

template <CostKind Kind>
double contrast(std::span<const MagState> fa, std::span<const MagState> fb, std::span<const double> w) {
  check_finals(fa, fb, w);
  double sum = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    const double wi = weight_at(w, i);
    sum += wi * (terminal(Kind, false, fb[i], nullptr) + terminal(Kind, true, fa[i], nullptr));
    total += wi;
  }
  return sum / total;
}

}  // namespace detail

/// Mean over the ensemble of |M_b,perp| - |M_a,perp| at the final time.
inline double cost_contrast_transverse(std::span<const MagState> finals_a, std::span<const MagState> finals_b,
                                       std::span<const double> weights = {}) {
  return detail::contrast<CostKind::Transverse>(finals_a, finals_b, weights);
}

/// Mean over the ensemble of |M_b| - M_a,z at the final time: saturate b,
/// keep longitudinal magnetization of a.
inline double cost_contrast_preparation(std::span<const MagState> finals_a, std::span<const MagState> finals_b,
                                        std::span<const double> weights = {}) {
  return detail::contrast<CostKind::Preparation>(finals_a, finals_b, weights);
}

// ---------------------------------------------------------------------------
// Propagation over the ensemble

using Gradient = std::vector<Control>;  // d cost / d (omega_x, omega_y), per rad/s

namespace detail {

inline void check_dimensions(const ContrastProblem& prob, const Pulse& pulse) {
  if (pulse.size() != prob.pulse.n_steps) throw InvalidParameter("pulse length does not match the problem");
  if (!(pulse.dt > 0.0) || pulse.dt != prob.pulse.dt) throw InvalidParameter("pulse dt does not match the problem");
  for (const auto& s : pulse.steps) {
    if (!std::isfinite(s.x) || !std::isfinite(s.y)) throw InvalidParameter("pulse step is not finite");
  }
}

struct MemberSpec {
  const SpinParams* params;
  double offset;  // normalized
  double scale;   // B1
};

inline MemberSpec member_spec(const ContrastProblem& prob, const Species& sp, std::size_t i) {
  return {&sp.params, offset_from_hz(prob.ensemble.offset_hz(i), sp.params.Td()), prob.ensemble.b1_scale(i)};
}

inline MagState final_state(const ContrastProblem& prob, const MemberSpec& m, const Pulse& pulse) {
  const double tau = m.params->to_normalized(pulse.dt);
  MagState s = prob.initial;
  for (const auto& step : pulse.steps) {
    s = propagate_step(s, *m.params, m.offset, normalized_control(step, *m.params, m.scale), tau);
  }
  return s;
}

/// Terminal cost of one (species, member) pair; adds its weighted gradient
/// into `grad` when non-null.
inline double member_cost(const ContrastProblem& prob, const MemberSpec& m, bool keep, const Pulse& pulse,
                          double weight, Gradient* grad) {
  if (!grad) return weight * terminal(prob.cost, keep, final_state(prob, m, pulse), nullptr);

  const std::size_t n = pulse.size();
  const SpinParams& p = *m.params;
  const double tau = p.to_normalized(pulse.dt);
  std::vector<Propagator> props(n);
  std::vector<Eigen::Vector4d> states(n + 1);
  std::vector<Generator> gens(n);
  states[0] = prob.initial.homogeneous();
  for (std::size_t k = 0; k < n; ++k) {
    gens[k] = step_generator(p, m.offset, normalized_control(pulse.steps[k], p, m.scale)) * tau;
    props[k] = expm<4>(gens[k]);
    states[k + 1] = props[k] * states[k];
  }
  const MagState fin{states[n][0], states[n][1], states[n][2]};
  Eigen::Vector3d g3;
  const double c = weight * terminal(prob.cost, keep, fin, &g3);
  Eigen::Vector4d costate(weight * g3[0], weight * g3[1], weight * g3[2], 0.0);
  // d(generator * tau)/d(omega) for each channel
  const double chain = tau * p.Td() * m.scale;
  const Generator ex = control_derivative(Channel::X) * chain;
  const Generator ey = control_derivative(Channel::Y) * chain;
  for (std::size_t k = n; k-- > 0;) {
    const auto dx = expm_frechet_action<4>(gens[k], ex, states[k]);
    const auto dy = expm_frechet_action<4>(gens[k], ey, states[k]);
    (*grad)[k].x += costate.dot(dx.frechet_v);
    (*grad)[k].y += costate.dot(dy.frechet_v);
    costate = props[k].transpose() * costate;
  }
  return c;
}

}  // namespace detail

struct Evaluation {
  double cost = 0.0;
  Gradient gradient;
};

namespace detail {

inline Evaluation evaluate(const ContrastProblem& prob, const Pulse& pulse, bool with_gradient, int threads) {
  check_dimensions(prob, pulse);
  const std::size_t members = prob.ensemble.size();
  // All sums run in a canonical member order (sorted by offset, B1 scale,
  // weight) so results depend neither on the thread count nor on how the
  // ensemble was listed. Members with equal keys contribute identical terms.
  std::vector<std::size_t> order(members);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& e = prob.ensemble;
  auto key = [&](std::size_t i) { return std::tuple(e.offset_hz(i), e.b1_scale(i), e.weight(i)); };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return key(i) < key(j); });
  double total = 0.0;
  for (std::size_t i : order) total += e.weight(i);

  std::vector<double> costs(members, 0.0);
  std::vector<Gradient> grads(with_gradient ? members : 0, Gradient(pulse.size()));
  parallel_for(members, threads, [&](std::size_t i) {
    const double w = e.weight(i) / total;
    Gradient* g = with_gradient ? &grads[i] : nullptr;
    const double cb = prob.include_b ? member_cost(prob, member_spec(prob, prob.b, i), false, pulse, w, g) : 0.0;
    const double ca = member_cost(prob, member_spec(prob, prob.a, i), true, pulse, w, g);
    costs[i] = cb + ca;
  });
  Evaluation out;
  for (std::size_t i : order) out.cost += costs[i];
  if (with_gradient) {
    out.gradient.assign(pulse.size(), Control{});
    for (std::size_t i : order) {
      for (std::size_t k = 0; k < pulse.size(); ++k) {
        out.gradient[k].x += grads[i][k].x;
        out.gradient[k].y += grads[i][k].y;
      }
    }
  }
  return out;
}

}  // namespace detail

/// Contrast cost of `pulse` over the problem's ensemble.
inline double evaluate_cost(const ContrastProblem& prob, const Pulse& pulse, int threads = 1) {
  return detail::evaluate(prob, pulse, false, threads).cost;
}

/// Cost and its exact gradient with respect to every step's (omega_x,
/// omega_y) in rad/s.
inline Evaluation cost_gradient(const ContrastProblem& prob, const Pulse& pulse, int threads = 1) {
  return detail::evaluate(prob, pulse, true, threads);
}

/// Final states of every ensemble member for one species.
inline std::vector<MagState> ensemble_finals(const ContrastProblem& prob, const Species& sp, const Pulse& pulse,
                                             int threads = 1) {
  std::vector<MagState> out(prob.ensemble.size());
  parallel_for(out.size(), threads, [&](std::size_t i) {
    out[i] = detail::final_state(prob, detail::member_spec(prob, sp, i), pulse);
  });
  return out;
}

/// Full trajectories of every ensemble member for one species.
inline std::vector<Trajectory> ensemble_trajectories(const ContrastProblem& prob, const Species& sp,
                                                     const Pulse& pulse, int threads = 1) {
  std::vector<Trajectory> out(prob.ensemble.size());
  parallel_for(out.size(), threads, [&](std::size_t i) {
    const auto m = detail::member_spec(prob, sp, i);
    const double tau = sp.params.to_normalized(pulse.dt);
    Trajectory t{prob.initial};
    t.reserve(pulse.size() + 1);
    for (const auto& step : pulse.steps) {
      t.push_back(propagate_step(t.back(), sp.params, m.offset, normalized_control(step, sp.params, m.scale), tau));
    }
    out[i] = std::move(t);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Gradient verification

struct GradientCheck {
  double h = 0.0;
  double max_rel_error = 0.0;   // max |analytic - numeric| / max |numeric|
  double mean_rel_error = 0.0;
  double max_rel_error_x = 0.0;
  double max_rel_error_y = 0.0;
  Gradient analytic;
  Gradient numeric;
};

namespace detail {

using Mat4L = Eigen::Matrix<long double, 4, 4>;
using Vec4L = Eigen::Matrix<long double, 4, 1>;

// exp(A) by scaling to norm <= 1/2 and a degree-24 Taylor sum. The
// truncation error is far below long double round-off for any scaling, so
// the result has no branch-dependent jumps a finite difference could see.
inline Mat4L expm_extended(const Mat4L& a) {
  const long double nrm = a.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(static_cast<double>(nrm))) throw NumericalFailure("expm: non-finite matrix");
  const int s = nrm > 0.5L ? static_cast<int>(std::ceil(std::log2(static_cast<double>(nrm / 0.5L)))) : 0;
  const Mat4L as = a * std::ldexp(1.0L, -s);
  Mat4L r = Mat4L::Identity();
  for (int k = 24; k >= 1; --k) r = Mat4L::Identity() + as * r / static_cast<long double>(k);
  for (int i = 0; i < s; ++i) r = r * r;
  return r;
}

inline long double member_cost_extended(const ContrastProblem& prob, const MemberSpec& m, bool keep,
                                        const Pulse& pulse) {
  const SpinParams& p = *m.params;
  const long double tau = static_cast<long double>(pulse.dt) / p.Td();
  const long double G = p.Gamma(), g = p.gamma(), w = m.offset;
  const long double c = static_cast<long double>(p.Td()) * m.scale;
  Vec4L st(prob.initial.x, prob.initial.y, prob.initial.z, 1.0L);
  for (const auto& step : pulse.steps) {
    const long double ux = c * step.x, uy = c * step.y;
    Mat4L a;
    a << -G, -w, uy, 0.0L,
         w, -G, -ux, 0.0L,
         -uy, ux, -g, g,
         0.0L, 0.0L, 0.0L, 0.0L;
    st = expm_extended(a * tau) * st;
  }
  const long double trans = std::sqrt(st[0] * st[0] + st[1] * st[1]);
  if (prob.cost == CostKind::Transverse) return keep ? -trans : trans;
  return keep ? -st[2] : std::sqrt(trans * trans + st[2] * st[2]);
}

// The cost evaluated in extended precision, summed in the canonical order.
inline long double cost_extended(const ContrastProblem& prob, const Pulse& pulse, int threads) {
  const auto& e = prob.ensemble;
  const std::size_t members = e.size();
  std::vector<std::size_t> order(members);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key = [&](std::size_t i) { return std::tuple(e.offset_hz(i), e.b1_scale(i), e.weight(i)); };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return key(i) < key(j); });
  std::vector<long double> terms(members, 0.0L);
  parallel_for(members, threads, [&](std::size_t i) {
    long double t = member_cost_extended(prob, member_spec(prob, prob.a, i), true, pulse);
    if (prob.include_b) t += member_cost_extended(prob, member_spec(prob, prob.b, i), false, pulse);
    terms[i] = t;
  });
  long double sum = 0.0L, total = 0.0L;
  for (std::size_t i : order) {
    sum += e.weight(i) * terms[i];
    total += e.weight(i);
  }
  return sum / total;
}

}  // namespace detail

/// Central differences of the cost against cost_gradient. The differenced
/// costs are evaluated in extended precision, so round-off stays well below
/// the gradient even for steps as small as 1e-6 rad/s. Errors are scaled by
/// the largest numeric component over both channels.
inline GradientCheck gradient_check(const ContrastProblem& prob, const Pulse& pulse, double h, int threads = 1) {
  if (!(h > 0.0)) throw InvalidParameter("finite-difference step must be > 0");
  prob.validate();
  detail::check_dimensions(prob, pulse);
  GradientCheck out;
  out.h = h;
  out.analytic = cost_gradient(prob, pulse, threads).gradient;
  out.numeric.assign(pulse.size(), Control{});
  Pulse work = pulse;
  for (std::size_t k = 0; k < pulse.size(); ++k) {
    for (int c = 0; c < 2; ++c) {
      double& v = c == 0 ? work.steps[k].x : work.steps[k].y;
      const double v0 = v;
      v = v0 + h;
      const long double fp = detail::cost_extended(prob, work, threads);
      v = v0 - h;
      const long double fm = detail::cost_extended(prob, work, threads);
      v = v0;
      // The perturbed value is what was actually evaluated.
      const long double span = static_cast<long double>(v0 + h) - static_cast<long double>(v0 - h);
      (c == 0 ? out.numeric[k].x : out.numeric[k].y) = static_cast<double>((fp - fm) / span);
    }
  }
  double scale = 0.0;
  for (const auto& g : out.numeric) scale = std::max({scale, std::abs(g.x), std::abs(g.y)});
  if (scale == 0.0) scale = 1.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < pulse.size(); ++k) {
    const double ex = std::abs(out.analytic[k].x - out.numeric[k].x) / scale;
    const double ey = std::abs(out.analytic[k].y - out.numeric[k].y) / scale;
    out.max_rel_error_x = std::max(out.max_rel_error_x, ex);
    out.max_rel_error_y = std::max(out.max_rel_error_y, ey);
    sum += ex + ey;
  }
  out.max_rel_error = std::max(out.max_rel_error_x, out.max_rel_error_y);
  out.mean_rel_error = pulse.size() ? sum / (2.0 * pulse.size()) : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer

struct OptimizerOptions {
  int max_iterations = 1000;
  double gradient_tolerance = 1e-10;  // on |grad| in cost per rad/s
  double initial_step = 100.0;        // rad/s displacement of the first trial
  double backtrack_factor = 0.5;
  double min_step = 1e-9;             // rad/s displacement
  double armijo = 1e-4;
  std::uint64_t seed = 1;
  int restarts = 4;
  double init_amplitude = kTwoPi * 10.0;  // rad/s
  bool quasi_newton = false;
  int lbfgs_memory = 10;
  int threads = 1;

  void validate() const {
    if (max_iterations < 0 || !(gradient_tolerance > 0.0) || !(initial_step > 0.0) ||
        !(backtrack_factor > 0.0 && backtrack_factor < 1.0) || !(min_step > 0.0) || !(armijo > 0.0) ||
        restarts < 1 || !(init_amplitude >= 0.0) || lbfgs_memory < 1 || threads < 1) {
      throw InvalidParameter("invalid optimizer options");
    }
  }
};

enum class StopReason { GradientTolerance, StepUnderflow, MaxIterations };

inline std::string_view stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::GradientTolerance: return "gradient_tolerance";
    case StopReason::StepUnderflow: return "step_underflow";
    case StopReason::MaxIterations: return "max_iterations";
  }
  return "?";
}

struct HistoryEntry {
  int iteration = 0;
  double cost = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;  // rad/s displacement accepted at this iteration
};

struct OptimizationResult {
  Pulse pulse;
  double cost = 0.0;
  std::vector<HistoryEntry> history;
  StopReason reason = StopReason::MaxIterations;
  std::string diagnostic;
  std::uint64_t seed = 0;
  std::vector<double> restart_costs;
  bool converged() const { return reason == StopReason::GradientTolerance; }
};

/// Clips each step to the amplitude bound, keeping its phase.
inline void project_amplitude(Pulse& pulse) {
  if (!pulse.u_max) return;
  const double um = *pulse.u_max;
  for (auto& s : pulse.steps) {
    const double a = s.amplitude();
    if (a > um) {
      s.x *= um / a;
      s.y *= um / a;
    }
  }
}

namespace detail {

using Flat = Eigen::VectorXd;

inline Flat flatten(const std::vector<Control>& v) {
  Flat f(2 * v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    f[2 * k] = v[k].x;
    f[2 * k + 1] = v[k].y;
  }
  return f;
}

inline void unflatten(const Flat& f, std::vector<Control>& v) {
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = {f[2 * k], f[2 * k + 1]};
}

/// L-BFGS two-loop recursion; returns -H g.
inline Flat lbfgs_direction(const Flat& g, const std::vector<Flat>& s, const std::vector<Flat>& y) {
  Flat q = g;
  std::vector<double> alpha(s.size());
  for (std::size_t i = s.size(); i-- > 0;) {
    alpha[i] = s[i].dot(q) / y[i].dot(s[i]);
    q -= alpha[i] * y[i];
  }
  if (!s.empty()) q *= s.back().dot(y.back()) / y.back().dot(y.back());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double beta = y[i].dot(q) / y[i].dot(s[i]);
    q += (alpha[i] - beta) * s[i];
  }
  return -q;
}

}  // namespace detail

/// Descent on the contrast cost from `initial`. Accepted iterations never
/// increase the cost; the amplitude bound is enforced by projection.
inline OptimizationResult grape_refine(const ContrastProblem& prob, Pulse initial, const OptimizerOptions& opt) {
  prob.validate();
  opt.validate();
  detail::check_dimensions(prob, initial);
  using detail::Flat;
  project_amplitude(initial);

  OptimizationResult res;
  res.pulse = initial;
  Pulse work = initial;
  auto cost_of = [&](const Flat& x) {
    detail::unflatten(x, work.steps);
    return evaluate_cost(prob, work, opt.threads);
  };
  auto project = [&](Flat& x) {
    detail::unflatten(x, work.steps);
    project_amplitude(work);
    x = detail::flatten(work.steps);
  };

  Flat x = detail::flatten(initial.steps);
  auto ev = cost_gradient(prob, initial, opt.threads);
  double fx = ev.cost;
  Flat g = detail::flatten(ev.gradient);
  res.history.push_back({0, fx, g.norm(), 0.0});
  double trial_len = opt.initial_step;
  std::vector<Flat> hist_s;
  std::vector<Flat> hist_y;

  res.reason = StopReason::MaxIterations;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    const double gn = g.norm();
    if (gn < opt.gradient_tolerance) {
      res.reason = StopReason::GradientTolerance;
      break;
    }
    Flat d = -g;
    double alpha0 = trial_len / gn;
    if (opt.quasi_newton && !hist_s.empty()) {
      Flat q = detail::lbfgs_direction(g, hist_s, hist_y);
      if (q.dot(g) < 0.0) {
        d = std::move(q);
        alpha0 = 1.0;
      }
    }
    Flat x_new;
    const auto ls = optim::backtracking(cost_of, project, x, fx, g, d, alpha0, opt.backtrack_factor, opt.min_step,
                                        opt.armijo, x_new);
    if (!ls.accepted) {
      if (opt.quasi_newton && !hist_s.empty()) {  // retry along the gradient before giving up
        hist_s.clear();
        hist_y.clear();
        --it;
        continue;
      }
      res.reason = StopReason::StepUnderflow;
      res.diagnostic = "line search failed at the minimum step; returning best pulse";
      break;
    }
    const double moved = (x_new - x).norm();
    detail::unflatten(x_new, work.steps);
    auto ev_new = cost_gradient(prob, work, opt.threads);
    Flat g_new = detail::flatten(ev_new.gradient);
    if (opt.quasi_newton) {
      Flat sv = x_new - x;
      Flat yv = g_new - g;
      if (sv.dot(yv) > 1e-300) {
        hist_s.push_back(std::move(sv));
        hist_y.push_back(std::move(yv));
        if (static_cast<int>(hist_s.size()) > opt.lbfgs_memory) {
          hist_s.erase(hist_s.begin());
          hist_y.erase(hist_y.begin());
        }
      }
    }
    x = std::move(x_new);
    g = std::move(g_new);
    fx = ls.value;
    trial_len = 2.0 * moved;
    res.history.push_back({it, fx, g.norm(), moved});
  }
  detail::unflatten(x, res.pulse.steps);
  res.cost = fx;
  if (res.reason == StopReason::MaxIterations) res.diagnostic = "iteration limit reached";
  return res;
}

/// Small uniform random pulse, |omega_x|, |omega_y| <= amplitude.
inline Pulse random_pulse(const ContrastProblem& prob, double amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  Pulse p = prob.zero_pulse();
  for (auto& s : p.steps) {
    s.x = u(rng);
    s.y = u(rng);
  }
  project_amplitude(p);
  return p;
}

/// Multi-start GRAPE: one refinement per seed (seed, seed + 1, ...) from a
/// small random pulse; keeps the lowest final cost (first one on ties).
inline OptimizationResult grape_optimize(const ContrastProblem& prob, const OptimizerOptions& opt) {
  prob.validate();
  opt.validate();
  std::optional<OptimizationResult> best;
  std::vector<double> costs;
  for (int r = 0; r < opt.restarts; ++r) {
    const std::uint64_t seed = opt.seed + static_cast<std::uint64_t>(r);
    auto res = grape_refine(prob, random_pulse(prob, opt.init_amplitude, seed), opt);
    res.seed = seed;
    costs.push_back(res.cost);
    if (!best || res.cost < best->cost) best = std::move(res);
  }
  best->restart_costs = std::move(costs);
  return std::move(*best);
}

// ---------------------------------------------------------------------------
// Robustness

struct RobustnessRow {
  double offset_hz = 0.0;
  double b1_scale = 1.0;
  std::string species;
  MagState final;
  double trans_norm = 0.0;
  double contribution = 0.0;  // terminal cost term of this row
};

struct SpeciesSummary {
  double mean_norm = 0.0;
  double std_norm = 0.0;
  double mean_trans = 0.0;
  double std_trans = 0.0;
  double mean_z = 0.0;
  double std_z = 0.0;
  double mean_contribution = 0.0;
  double std_contribution = 0.0;
};

struct RobustnessReport {
  std::vector<RobustnessRow> rows;  // member-major, species b then a (a only without b)
  double cost = 0.0;
  SpeciesSummary a;
  SpeciesSummary b;
};

namespace detail {

inline SpeciesSummary summarize(const std::vector<const RobustnessRow*>& rows) {
  SpeciesSummary s;
  const double n = static_cast<double>(rows.size());
  auto stats = [&](auto get, double& mean, double& sd) {
    mean = 0.0;
    for (auto* r : rows) mean += get(*r);
    mean /= n;
    double v = 0.0;
    for (auto* r : rows) v += (get(*r) - mean) * (get(*r) - mean);
    sd = std::sqrt(v / n);
  };
  stats([](const RobustnessRow& r) { return r.final.norm(); }, s.mean_norm, s.std_norm);
  stats([](const RobustnessRow& r) { return r.trans_norm; }, s.mean_trans, s.std_trans);
  stats([](const RobustnessRow& r) { return r.final.z; }, s.mean_z, s.std_z);
  stats([](const RobustnessRow& r) { return r.contribution; }, s.mean_contribution, s.std_contribution);
  return s;
}

}  // namespace detail

/// Final states of both species at every ensemble member, with per-species
/// means and (population) standard deviations.
inline RobustnessReport robustness_report(const Pulse& pulse, const ContrastProblem& prob, int threads = 1) {
  prob.validate();
  detail::check_dimensions(prob, pulse);
  const auto fa = ensemble_finals(prob, prob.a, pulse, threads);
  const auto fb = prob.include_b ? ensemble_finals(prob, prob.b, pulse, threads) : std::vector<MagState>{};
  RobustnessReport rep;
  std::vector<double> w(prob.ensemble.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = prob.ensemble.weight(i);
  if (!prob.include_b) {
    rep.cost = evaluate_cost(prob, pulse, threads);
  } else {
    rep.cost = prob.cost == CostKind::Transverse ? cost_contrast_transverse(fa, fb, w)
                                                 : cost_contrast_preparation(fa, fb, w);
  }
  for (std::size_t i = 0; i < fa.size(); ++i) {
    for (int s = prob.include_b ? 0 : 1; s < 2; ++s) {
      const bool keep = s == 1;
      const MagState& m = keep ? fa[i] : fb[i];
      RobustnessRow r;
      r.offset_hz = prob.ensemble.offset_hz(i);
      r.b1_scale = prob.ensemble.b1_scale(i);
      r.species = keep ? prob.a.name : prob.b.name;
      r.final = m;
      r.trans_norm = m.transverse();
      r.contribution = detail::terminal(prob.cost, keep, m, nullptr);
      rep.rows.push_back(std::move(r));
    }
  }
  std::vector<const RobustnessRow*> ra, rb;
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    const bool is_a = !prob.include_b || k % 2 == 1;
    (is_a ? ra : rb).push_back(&rep.rows[k]);
  }
  rep.a = detail::summarize(ra);
  if (prob.include_b) rep.b = detail::summarize(rb);
  return rep;
}

// ---------------------------------------------------------------------------
// Presets

/// Rat muscle (kept) against rat brain (saturated) over -400..400 Hz in
/// 40 Hz steps, preparation contrast, time normalized to seconds.
inline ContrastProblem preset_rat_brain_muscle(std::size_t n_steps = 500, double dt_s = 0.5e-3,
                                               std::optional<double> u_max = std::nullopt) {
  ContrastProblem p{
      .a = {"muscle", SpinParams::normalize(1.011, 0.030, 1.0)},
      .b = {"brain", SpinParams::normalize(0.920, 0.060, 1.0)},
      .ensemble = OffsetEnsemble::range(-400.0, 400.0, 40.0),
      .pulse = {n_steps, dt_s, u_max},
      .cost = CostKind::Preparation,
      .initial = MagState::equilibrium(),
  };
  return p;
}

}  // namespace bloch::grape
