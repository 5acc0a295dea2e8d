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

// Readers and writers for the data files. CSV files open with '#' lines
// stating units, then a column header. Numbers are printed with 17
// significant digits so files round-trip and are byte-stable.

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "bloch/core.hpp"
#include "bloch/grape.hpp"
#include "bloch/propagate.hpp"
#include "bloch/snr.hpp"
#include "bloch/synthesis.hpp"

namespace bloch::io {

using json = nlohmann::ordered_json;

inline std::string num(double v) {
  if (v == 0.0) return "0";  // folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  CsvWriter& comment(const std::string& text) {
    os_ << "# " << text << '\n';
    return *this;
  }
  CsvWriter& header(std::initializer_list<std::string_view> cols) {
    bool first = true;
    for (auto c : cols) {
      if (!first) os_ << ',';
      os_ << c;
      first = false;
    }
    os_ << '\n';
    return *this;
  }
  template <class... T>
  CsvWriter& row(const T&... cells) {
    bool first = true;
    ((os_ << (first ? "" : ",") << cell(cells), first = false), ...);
    os_ << '\n';
    return *this;
  }

 private:
  static std::string cell(double v) { return num(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(std::string_view v) { return std::string(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }

  std::ostream& os_;
};

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidParameter("cannot open " + path + " for writing");
  f << content;
  if (!f) throw InvalidParameter("failed writing " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidParameter("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidParameter(what + ": malformed JSON (" + e.what() + ")");
  }
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Pulses

inline json pulse_to_json(const Pulse& p) {
  json j;
  j["units"] = {{"dt_s", "s"}, {"u_max_rad_s", "rad/s"}, {"steps", "[omega_x, omega_y] in rad/s"}};
  j["dt_s"] = p.dt;
  j["u_max_rad_s"] = p.u_max ? json(*p.u_max) : json(nullptr);
  json steps = json::array();
  for (const auto& s : p.steps) steps.push_back({s.x, s.y});
  j["steps"] = std::move(steps);
  return j;
}

inline Pulse pulse_from_json(const json& j) {
  if (!j.is_object()) throw InvalidParameter("pulse: expected a JSON object");
  if (!j.contains("dt_s") || !j["dt_s"].is_number()) throw InvalidParameter("pulse: dt_s must be a number");
  if (!j.contains("steps") || !j["steps"].is_array()) throw InvalidParameter("pulse: steps must be an array");
  Pulse p;
  p.dt = j["dt_s"].get<double>();
  if (j.contains("u_max_rad_s") && !j["u_max_rad_s"].is_null()) {
    if (!j["u_max_rad_s"].is_number()) throw InvalidParameter("pulse: u_max_rad_s must be a number or null");
    p.u_max = j["u_max_rad_s"].get<double>();
  }
  for (const auto& s : j["steps"]) {
    if (!s.is_array() || s.size() != 2 || !s[0].is_number() || !s[1].is_number()) {
      throw InvalidParameter("pulse: each step must be [omega_x, omega_y]");
    }
    p.steps.push_back({s[0].get<double>(), s[1].get<double>()});
  }
  p.validate();
  return p;
}

inline void write_pulse_csv(std::ostream& os, const Pulse& p) {
  CsvWriter w(os);
  w.comment("omega_x, omega_y in rad/s; dt_s = " + num(p.dt));
  w.header({"index", "omega_x", "omega_y"});
  for (std::size_t k = 0; k < p.size(); ++k) w.row(k, p.steps[k].x, p.steps[k].y);
}

// ---------------------------------------------------------------------------
// Trajectories

inline void write_trajectory_header(CsvWriter& w) {
  w.comment("t in units of Td, offset in Hz, x y z normalized to equilibrium magnetization");
  w.header({"step", "t", "offset", "x", "y", "z"});
}

/// Rows of one trajectory; t is normalized (step * dt / Td).
inline void write_trajectory_rows(CsvWriter& w, const Trajectory& tr, double dt_normalized, double offset_hz) {
  for (std::size_t k = 0; k < tr.size(); ++k) {
    w.row(k, static_cast<double>(k) * dt_normalized, offset_hz, tr[k].x, tr[k].y, tr[k].z);
  }
}

// ---------------------------------------------------------------------------
// Synthesis

inline json sequence_to_json(const geo::ControlSequence& seq) {
  json arcs = json::array();
  for (const auto& a : seq.arcs) {
    json params;
    switch (a.kind) {
      case geo::ArcKind::Bang:
        params = {{"angle_rad", a.angle}};
        break;
      case geo::ArcKind::SingularVertical:
        params = {{"z_from", a.from}, {"z_to", a.to}};
        break;
      case geo::ArcKind::SingularHorizontal:
        params = {{"z0", a.z0}, {"y_from", a.from}, {"y_to", a.to}};
        break;
    }
    params["entry"] = {a.entry.y, a.entry.z};
    params["exit"] = {a.exit.y, a.exit.z};
    arcs.push_back({{"kind", geo::arc_kind_name(a.kind)}, {"params", std::move(params)}, {"duration", a.duration}});
  }
  json j;
  j["units"] = {{"duration", "Td"}, {"angle_rad", "rad"}, {"coordinates", "normalized (y, z)"}};
  j["arcs"] = std::move(arcs);
  j["total_time"] = seq.total_time();
  return j;
}

inline void write_contour_csv(std::ostream& os, const std::vector<RadialSample>& samples) {
  CsvWriter w(os);
  w.comment("theta in rad (y = R cos theta, z = R sin theta), R normalized, dRdt per Td");
  w.header({"theta", "R", "dRdt"});
  for (const auto& s : samples) w.row(s.theta, s.R, s.dRdt);
}

inline void write_planar_samples_csv(std::ostream& os, const std::vector<geo::SimulationSample>& samples) {
  CsvWriter w(os);
  w.comment("t in units of Td, y z normalized");
  w.header({"t", "y", "z"});
  for (const auto& s : samples) w.row(s.t, s.y, s.z);
}

// ---------------------------------------------------------------------------
// SNR

inline void write_q_surface_csv(std::ostream& os, const snr::Surface& surf) {
  CsvWriter w(os);
  w.comment("y_m z_m normalized measure point, Q dimensionless, region_label = optimal transfer family");
  w.header({"y_m", "z_m", "Q", "region_label", "feasible"});
  for (const auto& n : surf.nodes) {
    w.row(n.y_m, n.z_m, n.q, n.feasible ? geo::family_name(n.region) : std::string_view("none"), n.feasible);
  }
}

inline json maximum_to_json(const snr::Maximum& m) {
  json j;
  j["units"] = {{"theta_rad", "rad"}, {"Tc", "Td"}, {"Q", "dimensionless"}};
  j["y_m"] = m.point.y_m;
  j["z_m"] = m.point.z_m;
  j["Q"] = m.point.q;
  j["theta_rad"] = m.theta;
  j["theta_ernst_rad"] = m.theta_ernst;
  j["Tc"] = m.point.tc;
  j["theta_error_rad"] = std::abs(m.theta - m.theta_ernst);
  j["region"] = geo::family_name(m.point.region);
  j["evaluations"] = m.evaluations;
  j["converged"] = m.converged;
  if (!m.diagnostic.empty()) j["diagnostic"] = m.diagnostic;
  return j;
}

// ---------------------------------------------------------------------------
// GRAPE

inline void write_history_csv(std::ostream& os, const std::vector<grape::HistoryEntry>& h) {
  CsvWriter w(os);
  w.comment("cost dimensionless, grad_norm per rad/s, step = accepted control displacement in rad/s");
  w.header({"iter", "cost", "grad_norm", "step"});
  for (const auto& e : h) w.row(e.iteration, e.cost, e.grad_norm, e.step);
}

inline void write_robustness_csv(std::ostream& os, const grape::RobustnessReport& r) {
  CsvWriter w(os);
  w.comment("offset_hz in Hz, x y z trans_norm normalized to equilibrium magnetization");
  w.header({"offset_hz", "species", "x", "y", "z", "trans_norm"});
  for (const auto& row : r.rows) w.row(row.offset_hz, row.species, row.final.x, row.final.y, row.final.z, row.trans_norm);
}

/// Transverse norm against M_z along each trajectory, per offset and species.
inline void write_fig6_csv(std::ostream& os, const grape::ContrastProblem& prob, const Pulse& pulse,
                           const std::vector<Trajectory>& ta, const std::vector<Trajectory>& tb) {
  CsvWriter w(os);
  w.comment("t in s, offset in Hz, m_perp = |(x, y)| and m_z normalized");
  w.header({"species", "offset_hz", "step", "t_s", "m_perp", "m_z"});
  for (int s = 0; s < 2; ++s) {
    if (s == 1 && !prob.include_b) break;
    const auto& tr = s == 0 ? ta : tb;
    const auto& name = s == 0 ? prob.a.name : prob.b.name;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      for (std::size_t k = 0; k < tr[i].size(); ++k) {
        w.row(name, prob.ensemble.offset_hz(i), k, static_cast<double>(k) * pulse.dt, tr[i][k].transverse(),
              tr[i][k].z);
      }
    }
  }
}

inline json gradient_check_to_json(const grape::GradientCheck& g) {
  json j;
  j["h_rad_s"] = g.h;
  j["max_rel_error"] = g.max_rel_error;
  j["mean_rel_error"] = g.mean_rel_error;
  j["max_rel_error_x"] = g.max_rel_error_x;
  j["max_rel_error_y"] = g.max_rel_error_y;
  return j;
}

inline json summary_to_json(const grape::SpeciesSummary& s) {
  return {{"mean_norm", s.mean_norm},   {"std_norm", s.std_norm},
          {"mean_trans", s.mean_trans}, {"std_trans", s.std_trans},
          {"mean_z", s.mean_z},         {"std_z", s.std_z},
          {"mean_contribution", s.mean_contribution}, {"std_contribution", s.std_contribution}};
}

}  // namespace bloch::io
