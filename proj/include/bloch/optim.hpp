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

// Small generic optimizers: derivative-free searches for kinked objectives
// and an Armijo backtracking line search.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace bloch::optim {

struct PatternSearchOptions {
  double initial_step = 1e-2;
  double min_step = 1e-8;
  int max_evaluations = 10000;
  /// Extra randomly rotated poll directions on top of the adapted basis.
  int random_directions = 4;
  std::uint64_t seed = 7;
};

struct PatternSearchResult {
  Eigen::Vector2d x;
  double value = 0.0;
  int evaluations = 0;
  double final_step = 0.0;
  bool converged = false;
};

/// Maximizes f over the plane by polling an orthonormal basis that is
/// re-aligned with the accumulated displacement after every failed poll
/// (so it follows ridges), plus a few random directions. The step doubles
/// after a success along the same direction and halves after a failure.
/// Infeasible points should return -infinity.
template <class F>
PatternSearchResult pattern_search_max(F&& f, Eigen::Vector2d x0, PatternSearchOptions opt = {}) {
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  PatternSearchResult res;
  res.x = x0;
  res.value = f(x0);
  res.evaluations = 1;
  double step = opt.initial_step;
  Eigen::Matrix2d basis = Eigen::Matrix2d::Identity();
  Eigen::Vector2d travelled = Eigen::Vector2d::Zero();

  while (step >= opt.min_step && res.evaluations < opt.max_evaluations) {
    std::vector<Eigen::Vector2d> dirs{basis.col(0), -basis.col(0), basis.col(1), -basis.col(1)};
    for (int i = 0; i < opt.random_directions; ++i) {
      const double a = angle(rng);
      dirs.emplace_back(std::cos(a), std::sin(a));
    }
    bool improved = false;
    for (const auto& d : dirs) {
      if (res.evaluations >= opt.max_evaluations) break;
      const Eigen::Vector2d trial = res.x + step * d;
      const double v = f(trial);
      ++res.evaluations;
      if (v > res.value) {
        travelled += trial - res.x;
        res.x = trial;
        res.value = v;
        improved = true;
        // Keep going along a winning direction with a longer stride.
        for (;;) {
          if (res.evaluations >= opt.max_evaluations) break;
          const Eigen::Vector2d further = res.x + 2.0 * step * d;
          const double w = f(further);
          ++res.evaluations;
          if (!(w > res.value)) break;
          travelled += further - res.x;
          res.x = further;
          res.value = w;
          step *= 2.0;
        }
        break;
      }
    }
    if (!improved) {
      if (travelled.norm() > 0.0) {
        const Eigen::Vector2d a = travelled.normalized();
        basis.col(0) = a;
        basis.col(1) = Eigen::Vector2d(-a.y(), a.x());
        travelled.setZero();
      }
      step *= 0.5;
    }
  }
  res.final_step = step;
  res.converged = step < opt.min_step;
  return res;
}

struct ScalarMax {
  double x = 0.0;
  double value = 0.0;
  int evaluations = 0;
};

/// Maximizes f on [a, b]: a uniform scan of n points brackets the best
/// sample, then golden-section search shrinks the bracket below tol. Only
/// unimodality inside the bracket is assumed, so kinks are harmless.
template <class F>
ScalarMax scan_golden_max(F&& f, double a, double b, int n, double tol) {
  ScalarMax r;
  int best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double v = f(a + (b - a) * i / (n - 1));
    ++r.evaluations;
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  double lo = a + (b - a) * std::max(0, best - 1) / (n - 1);
  double hi = a + (b - a) * std::min(n - 1, best + 1) / (n - 1);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  double fc = f(c), fd = f(d);
  r.evaluations += 2;
  while (hi - lo > tol) {
    if (fc >= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - g * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + g * (hi - lo);
      fd = f(d);
    }
    ++r.evaluations;
  }
  r.x = fc >= fd ? c : d;
  r.value = std::max(fc, fd);
  if (best_v > r.value) {  // scan node beats the bracket interior
    r.x = a + (b - a) * best / (n - 1);
    r.value = best_v;
  }
  return r;
}

struct LineSearchResult {
  bool accepted = false;
  double alpha = 0.0;
  double value = 0.0;
  int evaluations = 0;
};

/// Backtracking along x + alpha d with projection `project`, starting at
/// alpha0 and shrinking by `factor` until the Armijo condition
/// f(P(x + alpha d)) <= f(x) + c1 <g, P(x + alpha d) - x> holds and the value
/// does not increase. Gives up once alpha |d| < min_step.
template <class Vec, class F, class Project>
LineSearchResult backtracking(F&& f, Project&& project, const Vec& x, double fx, const Vec& g, const Vec& d,
                              double alpha0, double factor, double min_step, double c1, Vec& x_out) {
  LineSearchResult r;
  const double dn = d.norm();
  double alpha = alpha0;
  while (alpha * dn >= min_step) {
    Vec trial = x + alpha * d;
    project(trial);
    const double v = f(trial);
    ++r.evaluations;
    const double decrease = g.dot(trial - x);
    if (std::isfinite(v) && v <= fx && v <= fx + c1 * decrease) {
      r.accepted = true;
      r.alpha = alpha;
      r.value = v;
      x_out = std::move(trial);
      return r;
    }
    alpha *= factor;
  }
  r.alpha = alpha;
  return r;
}

}  // namespace bloch::optim
