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
#include <limits>
#include <numbers>

#include <gtest/gtest.h>

#include "bloch/core.hpp"

namespace bloch {
namespace {

TEST(SpinParams, RatesFromRelaxationTimes) {
  const auto p = SpinParams::normalize(2.0, 0.5, 1.0);
  EXPECT_DOUBLE_EQ(p.gamma(), 0.5);
  EXPECT_DOUBLE_EQ(p.Gamma(), 2.0);
  EXPECT_TRUE(p.within_bloch_ball());
}

TEST(SpinParams, DetectionTimeAndUnitFactorScaleRates) {
  const auto p = SpinParams::normalize(1.0, 0.1, 0.25, 2.0);
  EXPECT_DOUBLE_EQ(p.gamma(), 0.5);
  EXPECT_DOUBLE_EQ(p.Gamma(), 5.0);
  EXPECT_DOUBLE_EQ(p.to_seconds(4.0), 1.0);
  EXPECT_DOUBLE_EQ(p.to_normalized(0.5), 2.0);
}

TEST(SpinParams, RejectsNonPositiveOrNonFinite) {
  EXPECT_THROW(SpinParams::normalize(0.0, 1.0), InvalidParameter);
  EXPECT_THROW(SpinParams::normalize(1.0, -1.0), InvalidParameter);
  EXPECT_THROW(SpinParams::normalize(1.0, 1.0, 0.0), InvalidParameter);
  EXPECT_THROW(SpinParams::normalize(std::numeric_limits<double>::infinity(), 1.0), InvalidParameter);
  EXPECT_THROW(SpinParams::from_rates(0.0, 1.0), InvalidParameter);
}

TEST(SpinParams, BlochBallCondition) {
  EXPECT_TRUE(SpinParams::normalize(1.0, 2.0).within_bloch_ball());
  EXPECT_FALSE(SpinParams::normalize(1.0, 2.0001).within_bloch_ball());
  const auto r = SpinParams::from_rates(1.8, 1.0);
  EXPECT_DOUBLE_EQ(r.Gamma(), 1.8);
  EXPECT_DOUBLE_EQ(r.gamma(), 1.0);
}

TEST(SpinParams, NoRelaxation) {
  const auto p = SpinParams::no_relaxation(0.5);
  EXPECT_EQ(p.gamma(), 0.0);
  EXPECT_EQ(p.Gamma(), 0.0);
  EXPECT_DOUBLE_EQ(p.Td(), 0.5);
}

TEST(Units, OffsetConversionRoundTrips) {
  EXPECT_DOUBLE_EQ(offset_from_hz(1.0, 1.0), 2.0 * std::numbers::pi);
  EXPECT_DOUBLE_EQ(offset_to_hz(offset_from_hz(-400.0, 0.25), 0.25), -400.0);
}

TEST(Pulse, Validation) {
  Pulse p = Pulse::zeros(3, 1e-3, 10.0);
  EXPECT_NO_THROW(p.validate());
  EXPECT_DOUBLE_EQ(p.duration(), 3e-3);
  p.steps[1] = {8.0, 8.0};
  EXPECT_THROW(p.validate(), InvalidParameter);
  p.steps[1] = {std::nan(""), 0.0};
  EXPECT_THROW(p.validate(), InvalidParameter);
  EXPECT_THROW(Pulse::zeros(0, 1e-3).validate(), InvalidParameter);
  EXPECT_THROW(Pulse::zeros(2, 0.0).validate(), InvalidParameter);
}

TEST(MagState, Norms) {
  const MagState m{0.3, 0.4, 1.2};
  EXPECT_DOUBLE_EQ(m.transverse(), 0.5);
  EXPECT_DOUBLE_EQ(m.norm(), 1.3);
  EXPECT_EQ(m.homogeneous()[3], 1.0);
  EXPECT_TRUE(m.finite());
  EXPECT_FALSE((MagState{std::nan(""), 0.0, 0.0}).finite());
}

TEST(PolarState, AngleFromTransverseAxis) {
  const auto s = PolarState::from_planar(0.0, 1.0);
  EXPECT_DOUBLE_EQ(s.R, 1.0);
  EXPECT_DOUBLE_EQ(s.theta, std::numbers::pi / 2);
  const auto q = PolarState::from_planar(0.6, -0.8);
  EXPECT_NEAR(q.y(), 0.6, 1e-15);
  EXPECT_NEAR(q.z(), -0.8, 1e-15);
}

}  // namespace
}  // namespace bloch
