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

// Matrix exponential of small fixed-size matrices and its Frechet
// derivative.
//
// expm() is the scaling-and-squaring Pade algorithm (degrees 3, 5, 7, 9 and
// 13 with the usual backward-error thresholds). The Frechet derivative
// L(A, E) = d/dh exp(A + hE)|_{h=0} is the upper-right block of
// exp([[A, E], [0, A]]); expm_frechet() forms that block explicitly and
// expm_frechet_action() applies it to a vector with a truncated Taylor
// series, which is all the adjoint gradient needs.

#include <array>
#include <cmath>
#include <utility>

#include <Eigen/Dense>

#include "bloch/core.hpp"

namespace bloch {

namespace detail {

template <int N>
using Mat = Eigen::Matrix<double, N, N>;
template <int N>
using Vec = Eigen::Matrix<double, N, 1>;

template <int N>
double norm1(const Mat<N>& a) {
  return a.cwiseAbs().colwise().sum().maxCoeff();
}

inline constexpr std::array<double, 4> kPade3{120.0, 60.0, 12.0, 1.0};
inline constexpr std::array<double, 6> kPade5{30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
inline constexpr std::array<double, 8> kPade7{17297280.0, 8648640.0, 1995840.0, 277200.0,
                                              25200.0,    1512.0,    56.0,      1.0};
inline constexpr std::array<double, 10> kPade9{17643225600.0, 8821612800.0, 2075673600.0, 302702400.0,
                                               30270240.0,    2162160.0,    110880.0,     3960.0,
                                               90.0,          1.0};
inline constexpr std::array<double, 14> kPade13{
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};

inline constexpr double kTheta3 = 1.495585217958292e-2;
inline constexpr double kTheta5 = 2.539398330063230e-1;
inline constexpr double kTheta7 = 9.504178996162932e-1;
inline constexpr double kTheta9 = 2.097847961257068e0;
inline constexpr double kTheta13 = 5.371920351148152e0;

template <int N>
Mat<N> pade_solve(const Mat<N>& u, const Mat<N>& v) {
  return (v - u).partialPivLu().solve(v + u);
}

}  // namespace detail

/// exp(A) for a fixed-size square matrix.
template <int N>
Eigen::Matrix<double, N, N> expm(const Eigen::Matrix<double, N, N>& a) {
  using M = detail::Mat<N>;
  const double nrm = detail::norm1<N>(a);
  if (!std::isfinite(nrm)) throw NumericalFailure("expm: non-finite matrix");
  const M id = M::Identity();

  if (nrm <= detail::kTheta9) {
    const M a2 = a * a;
    if (nrm <= detail::kTheta3) {
      const auto& b = detail::kPade3;
      const M u = a * (b[3] * a2 + b[1] * id);
      const M v = b[2] * a2 + b[0] * id;
      return detail::pade_solve<N>(u, v);
    }
    const M a4 = a2 * a2;
    if (nrm <= detail::kTheta5) {
      const auto& b = detail::kPade5;
      const M u = a * (b[5] * a4 + b[3] * a2 + b[1] * id);
      const M v = b[4] * a4 + b[2] * a2 + b[0] * id;
      return detail::pade_solve<N>(u, v);
    }
    const M a6 = a4 * a2;
    if (nrm <= detail::kTheta7) {
      const auto& b = detail::kPade7;
      const M u = a * (b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
      const M v = b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
      return detail::pade_solve<N>(u, v);
    }
    const M a8 = a6 * a2;
    const auto& b = detail::kPade9;
    const M u = a * (b[9] * a8 + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
    const M v = b[8] * a8 + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
    return detail::pade_solve<N>(u, v);
  }

  const int s = std::max(0, static_cast<int>(std::ceil(std::log2(nrm / detail::kTheta13))));
  const M as = a * std::ldexp(1.0, -s);
  const M a2 = as * as;
  const M a4 = a2 * a2;
  const M a6 = a4 * a2;
  const auto& b = detail::kPade13;
  const M u = as * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
  const M v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
  M r = detail::pade_solve<N>(u, v);
  for (int i = 0; i < s; ++i) r = r * r;
  return r;
}

template <int N>
struct ExpmWithFrechet {
  Eigen::Matrix<double, N, N> exp;
  Eigen::Matrix<double, N, N> frechet;
};

/// exp(A) and L(A, E) from the exponential of the block matrix
/// [[A, E], [0, A]].
template <int N>
ExpmWithFrechet<N> expm_frechet(const Eigen::Matrix<double, N, N>& a, const Eigen::Matrix<double, N, N>& e) {
  Eigen::Matrix<double, 2 * N, 2 * N> big = Eigen::Matrix<double, 2 * N, 2 * N>::Zero();
  big.template topLeftCorner<N, N>() = a;
  big.template topRightCorner<N, N>() = e;
  big.template bottomRightCorner<N, N>() = a;
  const auto eb = expm<2 * N>(big);
  return {eb.template topLeftCorner<N, N>(), eb.template topRightCorner<N, N>()};
}

template <int N>
struct FrechetAction {
  Eigen::Matrix<double, N, 1> exp_v;      // exp(A) v
  Eigen::Matrix<double, N, 1> frechet_v;  // L(A, E) v
};

/// exp(A) v and L(A, E) v by a Taylor series of the block generator acting
/// on [0; v], with enough substeps that every substep has norm <= 1/2.
template <int N>
FrechetAction<N> expm_frechet_action(const Eigen::Matrix<double, N, N>& a, const Eigen::Matrix<double, N, N>& e,
                                     const Eigen::Matrix<double, N, 1>& v) {
  using V = detail::Vec<N>;
  const double nrm = detail::norm1<N>(a) + detail::norm1<N>(e);
  if (!std::isfinite(nrm)) throw NumericalFailure("expm_frechet_action: non-finite matrix");
  const int substeps = std::max(1, static_cast<int>(std::ceil(2.0 * nrm)));
  const double h = 1.0 / substeps;
  const detail::Mat<N> ah = a * h;
  const detail::Mat<N> eh = e * h;

  V p = V::Zero();  // Frechet block
  V q = v;          // state block
  for (int s = 0; s < substeps; ++s) {
    V tp = p;
    V tq = q;
    V sp = p;
    V sq = q;
    int small = 0;
    for (int j = 1; j <= 60; ++j) {
      const V np = (ah * tp + eh * tq) / j;
      const V nq = (ah * tq) / j;
      tp = np;
      tq = nq;
      sp += tp;
      sq += tq;
      const double term = std::max(tp.cwiseAbs().maxCoeff(), tq.cwiseAbs().maxCoeff());
      const double total = std::max(sp.cwiseAbs().maxCoeff(), sq.cwiseAbs().maxCoeff());
      if (term <= 1e-18 * total || term == 0.0) {
        if (++small == 2) break;
      } else {
        small = 0;
      }
    }
    p = sp;
    q = sq;
  }
  return {q, p};
}

}  // namespace bloch
