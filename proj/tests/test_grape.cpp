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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "bloch/grape.hpp"

namespace bloch::grape {
namespace {

constexpr double kPi = std::numbers::pi;

ContrastProblem random_problem(std::mt19937_64& rng, CostKind cost) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto species = [&](const char* name) {
    const double t1 = 0.05 + u(rng);
    const double t2 = std::min(2.0 * t1, 0.01 + 0.3 * u(rng));
    return Species{name, SpinParams::normalize(t1, t2, 1.0)};
  };
  std::vector<double> hz;
  const int n_off = 1 + static_cast<int>(u(rng) * 5.0);
  for (int i = 0; i < n_off; ++i) hz.push_back(-200.0 + 400.0 * u(rng));
  ContrastProblem p;
  p.a = species("a");
  p.b = species("b");
  p.ensemble = OffsetEnsemble::list(hz);
  p.pulse = {static_cast<std::size_t>(4 + u(rng) * 29.0), 1e-3, std::nullopt};
  p.cost = cost;
  return p;
}

Pulse random_steps(const ContrastProblem& p, std::mt19937_64& rng, double amp) {
  std::uniform_real_distribution<double> u(-amp, amp);
  Pulse pulse = p.zero_pulse();
  for (auto& s : pulse.steps) s = {u(rng), u(rng)};
  return pulse;
}

// One species without relaxation, on resonance; only a's term is costed.
ContrastProblem single_spin(std::size_t steps, double dt, CostKind cost) {
  ContrastProblem p;
  p.a = {"spin", SpinParams::no_relaxation(1.0)};
  p.b = p.a;
  p.include_b = false;
  p.ensemble = OffsetEnsemble::list({0.0});
  p.pulse = {steps, dt, std::nullopt};
  p.cost = cost;
  return p;
}

TEST(Cost, TransverseExamples) {
  const std::vector<MagState> eq(3, MagState::equilibrium());
  EXPECT_EQ(cost_contrast_transverse(eq, eq), 0.0);
  const std::vector<MagState> excited{{1.0, 0.0, 0.0}, {0.0, -1.0, 0.0}};
  const std::vector<MagState> centre(2, MagState{0.0, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(cost_contrast_transverse(excited, centre), -1.0);
  // ((0.5 - 0.3) + (0.8 - 0.6)) / 2 by hand
  const std::vector<MagState> a{{0.3, 0.0, 0.1}, {0.0, 0.6, 0.0}};
  const std::vector<MagState> b{{0.0, 0.5, 0.7}, {0.8, 0.0, 0.0}};
  EXPECT_NEAR(cost_contrast_transverse(a, b), 0.2, 1e-15);
  EXPECT_THROW(cost_contrast_transverse({}, {}), InvalidParameter);
  EXPECT_THROW(cost_contrast_transverse(a, eq), InvalidParameter);
}

TEST(Cost, PreparationExamples) {
  const std::vector<MagState> eq(4, MagState::equilibrium());
  const std::vector<MagState> centre(4, MagState{0.0, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(cost_contrast_preparation(eq, centre), -1.0);
  EXPECT_DOUBLE_EQ(cost_contrast_preparation(eq, eq), 0.0);
  // Weighted mean: weights 3 and 1 on terms -1 and 0.
  const std::vector<MagState> a{MagState::equilibrium(), MagState::equilibrium()};
  const std::vector<MagState> b{{0.0, 0.0, 0.0}, MagState::equilibrium()};
  const std::vector<double> w{3.0, 1.0};
  EXPECT_DOUBLE_EQ(cost_contrast_preparation(a, b, w), -0.75);
  EXPECT_THROW(cost_contrast_preparation({}, {}), InvalidParameter);
}

TEST(Gradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(101);
  for (CostKind kind : {CostKind::Transverse, CostKind::Preparation}) {
    for (int t = 0; t < 6; ++t) {
      const auto prob = random_problem(rng, kind);
      const auto pulse = random_steps(prob, rng, kTwoPi * 150.0);
      const auto gc = gradient_check(prob, pulse, 1e-6);
      EXPECT_LT(gc.max_rel_error, 1e-6) << cost_name(kind) << " trial " << t;
    }
  }
}

TEST(Gradient, SixteenStepsThreeOffsets) {
  std::mt19937_64 rng(7);
  for (CostKind kind : {CostKind::Transverse, CostKind::Preparation}) {
    ContrastProblem prob;
    prob.a = {"a", SpinParams::normalize(1.011, 0.030, 1.0)};
    prob.b = {"b", SpinParams::normalize(0.920, 0.060, 1.0)};
    prob.ensemble = OffsetEnsemble::list({-150.0, 0.0, 90.0});
    prob.pulse = {16, 2e-3, std::nullopt};
    prob.cost = kind;
    const auto gc = gradient_check(prob, random_steps(prob, rng, kTwoPi * 100.0), 1e-6);
    EXPECT_LT(gc.max_rel_error, 1e-6) << cost_name(kind);
    EXPECT_LT(gc.max_rel_error_x, 1e-6);
    EXPECT_LT(gc.max_rel_error_y, 1e-6);
  }
}

TEST(Gradient, FiniteDifferenceErrorIsSecondOrder) {
  // Far from round-off, the central-difference error falls by ~100 per
  // decade of h.
  std::mt19937_64 rng(12);
  auto prob = random_problem(rng, CostKind::Preparation);
  prob.pulse.n_steps = 8;
  prob.pulse.dt = 5e-3;
  const auto pulse = random_steps(prob, rng, kTwoPi * 60.0);
  std::vector<double> err;
  for (double h : {10.0, 1.0, 0.1}) err.push_back(gradient_check(prob, pulse, h).max_rel_error);
  for (std::size_t i = 0; i + 1 < err.size(); ++i) {
    const double ratio = err[i] / err[i + 1];
    EXPECT_GT(ratio, 60.0);
    EXPECT_LT(ratio, 160.0);
  }
}

TEST(Gradient, MirrorSymmetryUnderOffsetSign) {
  // (offset, wx, wy) -> (-offset, -wx, wy) maps y -> -y and leaves both
  // costs unchanged, so dC/dwx flips sign and dC/dwy is kept.
  std::mt19937_64 rng(3);
  for (CostKind kind : {CostKind::Transverse, CostKind::Preparation}) {
    auto plus = random_problem(rng, kind);
    plus.ensemble = OffsetEnsemble::list({35.0, 120.0});
    auto minus = plus;
    minus.ensemble = OffsetEnsemble::list({-35.0, -120.0});
    const auto p = random_steps(plus, rng, kTwoPi * 80.0);
    Pulse m = p;
    for (auto& s : m.steps) s.x = -s.x;
    const auto gp = cost_gradient(plus, p);
    const auto gm = cost_gradient(minus, m);
    EXPECT_NEAR(gp.cost, gm.cost, 1e-14);
    double scale = 0.0;
    for (const auto& g : gp.gradient) scale = std::max({scale, std::abs(g.x), std::abs(g.y)});
    for (std::size_t k = 0; k < p.size(); ++k) {
      EXPECT_NEAR(gp.gradient[k].x, -gm.gradient[k].x, 1e-10 * scale);
      EXPECT_NEAR(gp.gradient[k].y, gm.gradient[k].y, 1e-10 * scale);
    }
  }
  // Zero pulse over a symmetric ensemble: the x channel cancels pairwise.
  auto sym = random_problem(rng, CostKind::Preparation);
  sym.ensemble = OffsetEnsemble::list({-80.0, -20.0, 20.0, 80.0});
  for (const auto& g : cost_gradient(sym, sym.zero_pulse()).gradient) EXPECT_NEAR(g.x, 0.0, 1e-15);
}

TEST(Gradient, RotationAngleDerivativeClosedForm) {
  // With w_y = 0 every step turns about x, so M = (0, -sin phi, cos phi)
  // with phi = dt * sum(w_x). Then C = -|sin phi| (transverse) or
  // -cos phi (preparation), and dC/dw_x,k = dt * dC/dphi for every k.
  const double dt = 1e-3;
  Pulse pulse = Pulse::zeros(5, dt);
  const double w[] = {300.0, 150.0, -90.0, 410.0, 220.0};
  double phi = 0.0;
  for (int k = 0; k < 5; ++k) {
    pulse.steps[k] = {w[k], 0.0};
    phi += w[k] * dt;
  }
  const auto tr = cost_gradient(single_spin(5, dt, CostKind::Transverse), pulse);
  const auto pr = cost_gradient(single_spin(5, dt, CostKind::Preparation), pulse);
  EXPECT_NEAR(tr.cost, -std::abs(std::sin(phi)), 1e-14);
  EXPECT_NEAR(pr.cost, -std::cos(phi), 1e-14);
  const double d_tr = -dt * std::cos(phi) * (std::sin(phi) > 0.0 ? 1.0 : -1.0);
  const double d_pr = dt * std::sin(phi);
  for (int k = 0; k < 5; ++k) {
    EXPECT_NEAR(tr.gradient[k].x, d_tr, 1e-15);
    EXPECT_NEAR(pr.gradient[k].x, d_pr, 1e-15);
    // A small turn about y moves only the x component, which starts at 0.
    EXPECT_NEAR(tr.gradient[k].y, 0.0, 1e-15);
  }
}

TEST(Gradient, EmptyPulseAndDimensionErrors) {
  auto prob = single_spin(0, 1e-3, CostKind::Preparation);
  const auto ev = cost_gradient(prob, Pulse{1e-3, {}, std::nullopt});
  EXPECT_TRUE(ev.gradient.empty());
  EXPECT_DOUBLE_EQ(ev.cost, -1.0);
  prob.pulse.n_steps = 3;
  EXPECT_THROW(cost_gradient(prob, Pulse::zeros(4, 1e-3)), InvalidParameter);
  EXPECT_THROW(cost_gradient(prob, Pulse::zeros(3, 2e-3)), InvalidParameter);
}

TEST(Ensemble, PermutationInvariantBitwise) {
  std::mt19937_64 rng(44);
  auto prob = random_problem(rng, CostKind::Transverse);
  prob.ensemble = OffsetEnsemble::list({-170.0, -3.0, 45.0, 110.0, 190.0});
  prob.ensemble.weights = {1.0, 2.0, 0.5, 1.0, 3.0};
  prob.ensemble.b1_scales = {0.9, 1.1};
  const auto pulse = random_steps(prob, rng, kTwoPi * 100.0);
  auto shuffled = prob;
  shuffled.ensemble.offsets_hz = {110.0, -3.0, 190.0, -170.0, 45.0};
  shuffled.ensemble.weights = {1.0, 2.0, 3.0, 1.0, 0.5};
  shuffled.ensemble.b1_scales = {1.1, 0.9};
  const auto a = cost_gradient(prob, pulse);
  const auto b = cost_gradient(shuffled, pulse);
  EXPECT_EQ(a.cost, b.cost);
  for (std::size_t k = 0; k < pulse.size(); ++k) {
    EXPECT_EQ(a.gradient[k].x, b.gradient[k].x);
    EXPECT_EQ(a.gradient[k].y, b.gradient[k].y);
  }
}

TEST(Ensemble, ThreadCountInvariantBitwise) {
  std::mt19937_64 rng(45);
  auto prob = random_problem(rng, CostKind::Preparation);
  prob.ensemble = OffsetEnsemble::range(-200.0, 200.0, 40.0);
  const auto pulse = random_steps(prob, rng, kTwoPi * 100.0);
  const auto one = cost_gradient(prob, pulse, 1);
  const auto four = cost_gradient(prob, pulse, 4);
  EXPECT_EQ(one.cost, four.cost);
  for (std::size_t k = 0; k < pulse.size(); ++k) {
    EXPECT_EQ(one.gradient[k].x, four.gradient[k].x);
    EXPECT_EQ(one.gradient[k].y, four.gradient[k].y);
  }
}

TEST(Ensemble, RangeAndValidation) {
  const auto e = OffsetEnsemble::range(-400.0, 400.0, 40.0);
  ASSERT_EQ(e.size(), 21u);
  EXPECT_EQ(e.offsets_hz.front(), -400.0);
  EXPECT_EQ(e.offsets_hz.back(), 400.0);
  EXPECT_EQ(OffsetEnsemble::range(5.0, 5.0, 0.0).size(), 1u);
  EXPECT_THROW(OffsetEnsemble::range(1.0, 0.0, 1.0), InvalidParameter);
  EXPECT_THROW(OffsetEnsemble::list({}), InvalidParameter);
  auto bad = e;
  bad.weights.assign(21, 0.0);
  EXPECT_THROW(bad.validate(), InvalidParameter);
  bad = e;
  bad.b1_scales = {0.0};
  EXPECT_THROW(bad.validate(), InvalidParameter);
}

TEST(Optimize, OneStepFindsQuarterTurn) {
  const double dt = 1e-3;
  const auto prob = single_spin(1, dt, CostKind::Transverse);
  OptimizerOptions opt;
  opt.restarts = 1;
  opt.max_iterations = 500;
  const auto res = grape_optimize(prob, opt);
  const auto& s = res.pulse.steps[0];
  EXPECT_NEAR(std::hypot(s.x, s.y) * dt, kPi / 2, 1e-4);
  EXPECT_NEAR(res.cost, -1.0, 1e-8);
}

TEST(Optimize, HistoryMonotoneAndAmplitudeFeasible) {
  std::mt19937_64 rng(8);
  auto prob = random_problem(rng, CostKind::Preparation);
  prob.pulse = {20, 2e-3, kTwoPi * 60.0};
  OptimizerOptions opt;
  opt.restarts = 2;
  opt.max_iterations = 150;
  const auto res = grape_optimize(prob, opt);
  ASSERT_GE(res.history.size(), 2u);
  for (std::size_t i = 1; i < res.history.size(); ++i) EXPECT_LE(res.history[i].cost, res.history[i - 1].cost);
  EXPECT_EQ(res.history.back().cost, res.cost);
  for (const auto& s : res.pulse.steps) EXPECT_LE(std::hypot(s.x, s.y), *prob.pulse.u_max * (1.0 + 1e-12));
  EXPECT_NO_THROW(res.pulse.validate());
  ASSERT_EQ(res.restart_costs.size(), 2u);
  EXPECT_EQ(res.cost, *std::min_element(res.restart_costs.begin(), res.restart_costs.end()));
}

TEST(Optimize, ProjectionClipsAmplitudeAndKeepsPhase) {
  Pulse p = Pulse::zeros(2, 1e-3, 10.0);
  p.steps[0] = {30.0, 40.0};
  p.steps[1] = {3.0, -4.0};
  project_amplitude(p);
  EXPECT_NEAR(p.steps[0].x, 6.0, 1e-14);
  EXPECT_NEAR(p.steps[0].y, 8.0, 1e-14);
  EXPECT_EQ(p.steps[1].x, 3.0);
  EXPECT_EQ(p.steps[1].y, -4.0);
}

TEST(Optimize, RestartFromResultIsStationary) {
  const auto prob = single_spin(3, 1e-3, CostKind::Preparation);
  OptimizerOptions opt;
  opt.restarts = 1;
  const auto res = grape_optimize(prob, opt);
  ASSERT_TRUE(res.converged()) << res.diagnostic;
  const auto again = grape_refine(prob, res.pulse, opt);
  EXPECT_LT(std::abs(again.cost - res.cost), 1e-12);
}

TEST(Optimize, SeedsAreReproducible) {
  std::mt19937_64 rng(9);
  const auto prob = random_problem(rng, CostKind::Transverse);
  const auto a = random_pulse(prob, 10.0, 5);
  const auto b = random_pulse(prob, 10.0, 5);
  const auto c = random_pulse(prob, 10.0, 6);
  bool differs = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a.steps[k].x, b.steps[k].x);
    EXPECT_LE(std::abs(a.steps[k].x), 10.0);
    EXPECT_LE(std::abs(a.steps[k].y), 10.0);
    differs = differs || a.steps[k].x != c.steps[k].x;
  }
  EXPECT_TRUE(differs);
}

TEST(Robustness, ZeroPulseStaysAtEquilibrium) {
  const auto prob = preset_rat_brain_muscle(20, 1e-3);
  const auto rep = robustness_report(prob.zero_pulse(), prob);
  EXPECT_EQ(rep.rows.size(), 21u * 2u);
  EXPECT_EQ(rep.rows[0].species, "brain");
  EXPECT_EQ(rep.rows[1].species, "muscle");
  EXPECT_LT(rep.a.std_norm, 1e-14);
  EXPECT_LT(rep.b.std_norm, 1e-14);
  EXPECT_LT(rep.b.std_contribution, 1e-14);
  EXPECT_NEAR(rep.a.mean_z, 1.0, 1e-15);
  EXPECT_NEAR(rep.cost, 0.0, 1e-15);
  EXPECT_NEAR(rep.cost, evaluate_cost(prob, prob.zero_pulse()), 1e-15);
}

TEST(Robustness, SingleSpeciesHasOneRowPerMember) {
  const auto prob = single_spin(2, 1e-3, CostKind::Transverse);
  const auto rep = robustness_report(prob.zero_pulse(), prob);
  EXPECT_EQ(rep.rows.size(), 1u);
  EXPECT_EQ(rep.cost, 0.0);
}

TEST(Preset, RatBrainMuscle) {
  const auto p = preset_rat_brain_muscle();
  ASSERT_EQ(p.ensemble.size(), 21u);
  for (std::size_t i = 0; i < 21; ++i) EXPECT_DOUBLE_EQ(p.ensemble.offset_hz(i), -400.0 + 40.0 * i);
  EXPECT_EQ(p.a.name, "muscle");
  EXPECT_DOUBLE_EQ(p.a.params.T1(), 1.011);
  EXPECT_DOUBLE_EQ(p.a.params.T2(), 0.030);
  EXPECT_EQ(p.b.name, "brain");
  EXPECT_DOUBLE_EQ(p.b.params.T1(), 0.920);
  EXPECT_DOUBLE_EQ(p.b.params.T2(), 0.060);
  EXPECT_EQ(p.pulse.n_steps, 500u);
  EXPECT_DOUBLE_EQ(p.pulse.dt, 0.5e-3);
  EXPECT_EQ(p.cost, CostKind::Preparation);
  EXPECT_EQ(p.initial.z, 1.0);
  EXPECT_NO_THROW(p.validate());
}

}  // namespace
}  // namespace bloch::grape
