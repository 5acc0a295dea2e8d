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

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "bloch/snr.hpp"

namespace bloch::snr {
namespace {

const std::vector<std::pair<double, double>> kSets{{1.90, 0.5}, {1.80, 1.0}, {1.69, 1.5}};

PlanarState power_iteration(double theta, const SpinParams& p, int n) {
  PlanarState m{0.0, 1.0};
  for (int i = 0; i < n; ++i) m = cycle_map(m, theta, p);
  return m;
}

TEST(Ernst, AngleMaximizesSteadySignal) {
  // Oracle: scan the flip angle, then refine by golden section.
  for (auto [G, g] : kSets) {
    const auto p = SpinParams::from_rates(G, g);
    auto y = [&](double th) { return ernst_steady_state(th, p).y_m; };
    const int n = 20000;
    int best = 1;
    for (int i = 1; i < n; ++i) {
      if (y(std::numbers::pi * i / n) > y(std::numbers::pi * best / n)) best = i;
    }
    double a = std::numbers::pi * (best - 1) / n, b = std::numbers::pi * (best + 1) / n;
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 100; ++it) {
      const double c = b - r * (b - a), d = a + r * (b - a);
      if (y(c) > y(d)) b = d; else a = c;
    }
    EXPECT_NEAR(ernst_angle(p), 0.5 * (a + b), 1e-6) << G << "," << g;
  }
}

TEST(Ernst, SteadyStateIsTheCycleFixedPoint) {
  for (auto [G, g] : kSets) {
    const auto p = SpinParams::from_rates(G, g);
    for (double th : {0.3, 1.0, 2.5}) {
      const auto mp = ernst_steady_state(th, p);
      const auto it = power_iteration(th, p, 200);
      EXPECT_NEAR(mp.y_m, std::abs(it.y), 1e-12);
      EXPECT_NEAR(mp.z_m, it.z, 1e-12);
      EXPECT_LT(mp.tc, 1e-12);  // on the Ernst ellipsoid
      EXPECT_NEAR(flip_angle(mp), th, 1e-9);
    }
  }
  EXPECT_THROW(ernst_steady_state(-0.1, SpinParams::from_rates(1.8, 1.0)), InvalidParameter);
}

TEST(QFactor, MirrorSymmetricAndBounded) {
  const auto p = SpinParams::from_rates(1.8, 1.0);
  const auto a = q_factor({0.4, 0.2}, p);
  const auto b = q_factor({-0.4, 0.2}, p);
  EXPECT_EQ(a.q, b.q);
  EXPECT_GE(a.tc, 0.0);
  EXPECT_LE(a.q, 0.4);
  EXPECT_THROW(steady_from_measure({0.9, 0.9}, p), InvalidParameter);
}

TEST(QFactor, RegionLabelMatchesRadii) {
  const auto p = SpinParams::from_rates(1.8, 1.0);
  // Measure point outside its steady partner radius needs an upward arc.
  const auto mp = q_factor({0.9, -0.3}, p);
  EXPECT_GT(mp.measure().radius(), mp.restart().radius());
  EXPECT_EQ(mp.region, Family::VerticalUp);
}

TEST(Surface, GridAndFeasibility) {
  const auto p = SpinParams::from_rates(1.8, 1.0);
  const auto s = q_surface(p, 33, 2);
  ASSERT_EQ(s.nodes.size(), 33u * 33u);
  EXPECT_FALSE(s.at(32, 32).feasible);  // corner (1, 1)
  EXPECT_TRUE(s.at(0, 16).feasible);    // origin
  EXPECT_EQ(s.at(0, 16).q, 0.0);
  EXPECT_THROW(q_surface(p, 16), InvalidParameter);
  const auto s1 = q_surface(p, 40, 1);
  const auto s3 = q_surface(p, 40, 3);
  for (std::size_t i = 0; i < s1.nodes.size(); ++i) EXPECT_EQ(s1.nodes[i].q, s3.nodes[i].q);
}

TEST(Maximize, RecoversErnstAngleOnEllipsoid) {
  for (auto [G, g] : kSets) {
    const auto p = SpinParams::from_rates(G, g);
    const auto m = maximize_q(p);
    EXPECT_NEAR(m.theta, ernst_angle(p), 1e-3) << G << "," << g;
    EXPECT_LT(m.point.tc, 1e-6);
    // No grid node beats the refined maximum.
    const auto s = q_surface(p, 128);
    for (const auto& n : s.nodes) {
      if (n.feasible) {
        EXPECT_LE(n.q, m.point.q + 1e-12);
      }
    }
    // The maximizer is the Ernst steady state.
    EXPECT_NEAR(m.point.q, ernst_steady_state(ernst_angle(p), p).q, 1e-8);
  }
}

TEST(Surface, ContinuousAcrossRegionBoundaries) {
  const auto p = SpinParams::from_rates(1.8, 1.0);
  const auto s = q_surface(p, 48);
  const auto jumps = boundary_jumps(p, s);
  ASSERT_FALSE(jumps.empty());
  for (const auto& j : jumps) EXPECT_LT(j.jump, 1e-6) << family_name(j.from) << " -> " << family_name(j.to);
}

TEST(Cycle, ReportCountsRepetitions) {
  const auto p = SpinParams::normalize(1.0, 0.5, 0.2);
  MeasurePoint mp;
  mp.tc = 0.5;
  mp.q = 0.3;
  const auto r = cycle_report(mp, p, 3.0);
  EXPECT_DOUBLE_EQ(r.n_cycles, 10.0);
  EXPECT_NEAR(r.r_value, std::sqrt(15.0) * 0.3, 1e-15);
  EXPECT_THROW(cycle_report(mp, p, 0.1), InvalidParameter);
}

}  // namespace
}  // namespace bloch::snr
