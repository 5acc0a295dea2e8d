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

// Oracle: Eigen's unsupported MatrixFunctions module, an implementation
// independent of ours.

#include <random>

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "bloch/expm.hpp"

namespace bloch {
namespace {

using M4 = Eigen::Matrix4d;

M4 random_matrix(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, 1.0);
  M4 a;
  for (int i = 0; i < 16; ++i) a(i) = n(rng);
  return a * (scale / a.cwiseAbs().colwise().sum().maxCoeff());
}

double rel(const M4& a, const M4& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

TEST(Expm, ZeroGivesIdentity) { EXPECT_EQ(expm<4>(M4::Zero()), M4::Identity()); }

TEST(Expm, MatchesReferenceAcrossNorms) {
  std::mt19937_64 rng(11);
  for (double scale : {1e-6, 1e-2, 0.2, 0.9, 2.0, 5.0, 20.0, 80.0}) {
    for (int t = 0; t < 20; ++t) {
      const M4 a = random_matrix(rng, scale);
      const M4 ref = a.exp();
      EXPECT_LT(rel(expm<4>(a), ref), 1e-12 * std::max(1.0, scale)) << "scale " << scale;
    }
  }
}

TEST(Expm, RotationGeneratorGivesRotation) {
  // Pure rotation about x by angle phi.
  const double phi = 1.234;
  M4 a = M4::Zero();
  a(1, 2) = -phi;
  a(2, 1) = phi;
  const M4 r = expm<4>(a);
  EXPECT_NEAR(r(1, 1), std::cos(phi), 1e-15);
  EXPECT_NEAR(r(2, 1), std::sin(phi), 1e-15);
  EXPECT_NEAR(r(1, 2), -std::sin(phi), 1e-15);
}

TEST(ExpmFrechet, MatchesCentralDifferencesOfReference) {
  std::mt19937_64 rng(5);
  for (double scale : {0.05, 0.7, 3.0, 12.0}) {
    for (int t = 0; t < 10; ++t) {
      const M4 a = random_matrix(rng, scale);
      const M4 e = random_matrix(rng, 1.0);
      const double h = 1e-5;
      const M4 fd = ((a + h * e).exp() - (a - h * e).exp()) / (2.0 * h);
      const auto r = expm_frechet<4>(a, e);
      EXPECT_LT(rel(r.exp, a.exp()), 1e-12 * std::max(1.0, scale));
      EXPECT_LT(rel(r.frechet, fd), 1e-7) << "scale " << scale;
    }
  }
}

TEST(ExpmFrechet, CommutingDirection) {
  // L(A, A) = A exp(A).
  std::mt19937_64 rng(9);
  const M4 a = random_matrix(rng, 1.5);
  const auto r = expm_frechet<4>(a, a);
  EXPECT_LT(rel(r.frechet, a * a.exp()), 1e-13);
}

TEST(ExpmFrechetAction, AgreesWithExplicitBlock) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (double scale : {1e-4, 0.3, 1.0, 4.0, 25.0}) {
    for (int t = 0; t < 10; ++t) {
      const M4 a = random_matrix(rng, scale);
      const M4 e = random_matrix(rng, 0.5);
      const Eigen::Vector4d v(n(rng), n(rng), n(rng), n(rng));
      const auto blk = expm_frechet<4>(a, e);
      const auto act = expm_frechet_action<4>(a, e, v);
      const Eigen::Vector4d ev = blk.exp * v;
      const Eigen::Vector4d lv = blk.frechet * v;
      EXPECT_LT((act.exp_v - ev).norm() / ev.norm(), 1e-13 * std::max(1.0, scale));
      EXPECT_LT((act.frechet_v - lv).norm() / lv.norm(), 1e-12 * std::max(1.0, scale));
    }
  }
}

TEST(ExpmFrechetAction, RejectsNonFinite) {
  M4 a = M4::Zero();
  a(0, 0) = std::nan("");
  EXPECT_THROW(expm_frechet_action<4>(a, M4::Zero(), Eigen::Vector4d::Ones()), NumericalFailure);
}

}  // namespace
}  // namespace bloch
