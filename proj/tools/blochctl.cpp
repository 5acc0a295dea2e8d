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

// blochctl: simulate, saturate, snr and grape subcommands.
//
// Exit codes: 0 success (also for converged-with-warning), 2 configuration
// error, 3 numerical failure. Configs are parsed and validated in full
// before any computation starts.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bloch/bloch.hpp"
#include "bloch/io.hpp"

namespace fs = std::filesystem;
using bloch::InvalidParameter;
using bloch::io::json;

namespace {

struct RunConfig {
  std::string config;
  std::string out = ".";
  int threads = 1;
  std::optional<std::uint64_t> seed;
  std::string preset;
  std::optional<int> resolution;
  bool gradcheck = false;
};

// ---------------------------------------------------------------------------
// Config helpers

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidParameter(where + ": expected a JSON object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || k == a;
    if (!ok) {
      std::string list;
      for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
      throw InvalidParameter(where + ": unknown key '" + k + "' (allowed: " + list + ")");
    }
  }
}

double get_number(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw InvalidParameter(where + ": missing '" + key + "'");
  if (!j[key].is_number()) throw InvalidParameter(where + ": '" + key + "' must be a number");
  return j[key].get<double>();
}

double get_number_or(const json& j, const std::string& key, double fallback, const std::string& where) {
  return j.contains(key) ? get_number(j, key, where) : fallback;
}

json load_config(const RunConfig& rc) {
  if (rc.config.empty()) throw InvalidParameter("--config is required");
  return bloch::io::parse_json(bloch::io::read_text(rc.config), rc.config);
}

/// T1_ms, T2_ms and optional Td_ms; T2 above 2 T1 is rejected.
bloch::SpinParams spin_from_json(const json& j, const std::string& where) {
  const double t1 = get_number(j, "T1_ms", where) * 1e-3;
  const double t2 = get_number(j, "T2_ms", where) * 1e-3;
  const double td = get_number_or(j, "Td_ms", 1000.0, where) * 1e-3;
  auto p = bloch::SpinParams::normalize(t1, t2, td);
  if (!p.within_bloch_ball()) throw InvalidParameter(where + ": T2 must not exceed 2 T1 (Bloch-ball condition)");
  return p;
}

std::vector<double> offsets_from_json(const json& j, const std::string& where) {
  if (j.is_array()) {
    std::vector<double> v;
    for (const auto& x : j) {
      if (!x.is_number()) throw InvalidParameter(where + ": offsets must be numbers");
      v.push_back(x.get<double>());
    }
    if (v.empty()) throw InvalidParameter(where + ": offset list is empty");
    return v;
  }
  check_keys(j, {"min", "max", "step"}, where);
  return bloch::grape::OffsetEnsemble::range(get_number(j, "min", where), get_number(j, "max", where),
                                             get_number_or(j, "step", 1.0, where))
      .offsets_hz;
}

fs::path prepare_out(const RunConfig& rc) {
  fs::path out(rc.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw InvalidParameter("cannot create output directory " + rc.out);
  return out;
}

void write(const fs::path& dir, const std::string& name, const std::string& content) {
  bloch::io::write_text((dir / name).string(), content);
}

std::string label_number(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const RunConfig& rc) {
  const json cfg = load_config(rc);
  const std::string where = "simulate config";
  check_keys(cfg, {"T1_ms", "T2_ms", "Td_ms", "relaxation", "offsets_hz", "initial", "pulse", "pulse_file"}, where);
  const bool relax = !cfg.contains("relaxation") || cfg["relaxation"].get<bool>();
  const auto params = relax ? spin_from_json(cfg, where)
                            : bloch::SpinParams::no_relaxation(get_number_or(cfg, "Td_ms", 1000.0, where) * 1e-3);
  std::vector<double> offsets{0.0};
  if (cfg.contains("offsets_hz")) offsets = offsets_from_json(cfg["offsets_hz"], where + ".offsets_hz");
  bloch::MagState init = bloch::MagState::equilibrium();
  if (cfg.contains("initial")) {
    const auto& v = cfg["initial"];
    if (!v.is_array() || v.size() != 3) throw InvalidParameter(where + ": initial must be [x, y, z]");
    init = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
    if (init.norm() > 1.0 + 1e-12) throw InvalidParameter(where + ": initial state outside the Bloch ball");
  }
  bloch::Pulse pulse;
  if (cfg.contains("pulse") == cfg.contains("pulse_file")) {
    throw InvalidParameter(where + ": give exactly one of 'pulse' or 'pulse_file'");
  }
  if (cfg.contains("pulse")) {
    pulse = bloch::io::pulse_from_json(cfg["pulse"]);
  } else {
    fs::path pf = cfg["pulse_file"].get<std::string>();
    if (pf.is_relative()) pf = fs::path(rc.config).parent_path() / pf;
    pulse = bloch::io::pulse_from_json(bloch::io::parse_json(bloch::io::read_text(pf.string()), pf.string()));
  }
  const fs::path out = prepare_out(rc);

  std::vector<bloch::Isochromat> ens;
  for (double hz : offsets) ens.push_back({bloch::offset_from_hz(hz, params.Td()), 1.0});
  const auto trs = bloch::propagate_pulse(init, params, ens, pulse, rc.threads);
  const double dtn = params.to_normalized(pulse.dt);
  json finals = json::array();
  for (std::size_t i = 0; i < trs.size(); ++i) {
    std::ostringstream ss;
    bloch::io::CsvWriter w(ss);
    bloch::io::write_trajectory_header(w);
    bloch::io::write_trajectory_rows(w, trs[i], dtn, offsets[i]);
    write(out, "trajectory_" + std::to_string(i) + ".csv", ss.str());
    const auto& f = trs[i].back();
    finals.push_back({{"offset_hz", offsets[i]}, {"final", {f.x, f.y, f.z}}, {"norm", f.norm()}});
  }
  json rep;
  rep["units"] = {{"duration_s", "s"}, {"offset_hz", "Hz"}, {"final", "normalized (x, y, z)"}};
  rep["steps"] = pulse.size();
  rep["duration_s"] = pulse.duration();
  rep["isochromats"] = std::move(finals);
  write(out, "simulate.json", bloch::io::dump(rep));
  std::cout << "simulated " << trs.size() << " isochromat(s), " << pulse.size() << " steps\n";
  return 0;
}

// ---------------------------------------------------------------------------
// saturate

int cmd_saturate(const RunConfig& rc) {
  const json cfg = load_config(rc);
  const std::string where = "saturate config";
  check_keys(cfg, {"T1_ms", "T2_ms", "Td_ms", "contour"}, where);
  const auto params = spin_from_json(cfg, where);
  int n_theta = 181, n_r = 50;
  if (cfg.contains("contour")) {
    check_keys(cfg["contour"], {"n_theta", "n_r"}, where + ".contour");
    n_theta = static_cast<int>(get_number_or(cfg["contour"], "n_theta", n_theta, where));
    n_r = static_cast<int>(get_number_or(cfg["contour"], "n_r", n_r, where));
    if (n_theta < 2 || n_r < 1) throw InvalidParameter(where + ".contour: need n_theta >= 2 and n_r >= 1");
  }
  const fs::path out = prepare_out(rc);

  const auto sat = bloch::geo::saturation_sequence(params);
  bloch::geo::SimulationOptions so;
  so.record = true;
  const auto sim = bloch::geo::simulate_sequence(sat.sequence, {0.0, 1.0}, params, so);
  const double final_radius = sim.final_state.radius();

  write(out, "sequence.json", bloch::io::dump(bloch::io::sequence_to_json(sat.sequence)));
  {
    std::ostringstream ss;
    bloch::io::write_planar_samples_csv(ss, sim.samples);
    write(out, "trajectory.csv", ss.str());
  }
  {
    std::ostringstream ss;
    bloch::io::write_contour_csv(ss, bloch::radial_speed_grid(params, n_theta, n_r));
    write(out, "contour.csv", ss.str());
  }
  json rep;
  rep["units"] = {{"t_min_normalized", "Td"}, {"t_min_s", "s"}, {"simulated_s", "s"}};
  rep["regime"] = sat.regime == bloch::geo::SaturationRegime::HorizontalVertical ? "horizontal_vertical" : "inversion";
  rep["t_min_normalized"] = sat.t_min;
  rep["t_min_s"] = sat.t_min_seconds;
  rep["alpha_formula_s"] = sat.alpha_formula_seconds ? json(*sat.alpha_formula_seconds) : json(nullptr);
  rep["simulated_s"] = params.to_seconds(sim.elapsed);
  rep["simulated_rel_diff"] = std::abs(sim.elapsed - sat.t_min) / sat.t_min;
  rep["final_radius"] = final_radius;
  rep["reached_centre"] = final_radius < 1e-6;
  if (!sat.diagnostic.empty()) rep["diagnostic"] = sat.diagnostic;
  write(out, "saturation.json", bloch::io::dump(rep));
  std::cout << "T_min = " << bloch::io::num(sat.t_min_seconds) << " s (" << rep["regime"].get<std::string>()
            << "), simulated final radius " << bloch::io::num(final_radius) << "\n";
  if (!(final_radius < 1e-6)) {
    std::cerr << "warning: simulated sequence ends at radius " << final_radius << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// snr

struct SnrSet {
  std::string label;
  bloch::SpinParams params;
};

SnrSet snr_set_from_json(const json& j, const std::string& where) {
  check_keys(j, {"label", "Gamma", "gamma", "T1_ms", "T2_ms", "Td_ms"}, where);
  std::optional<bloch::SpinParams> p;
  if (j.contains("Gamma") || j.contains("gamma")) {
    p = bloch::SpinParams::from_rates(get_number(j, "Gamma", where), get_number(j, "gamma", where));
  } else {
    p = spin_from_json(j, where);
  }
  if (!(p->gamma() > 0.0) || !(p->Gamma() > 0.0)) throw InvalidParameter(where + ": rates must be > 0");
  if (!p->within_bloch_ball()) throw InvalidParameter(where + ": Gamma must be >= gamma / 2");
  std::string label = j.contains("label") ? j["label"].get<std::string>()
                                          : "G" + label_number(p->Gamma()) + "_g" + label_number(p->gamma());
  return {label, *p};
}

int cmd_snr(const RunConfig& rc) {
  std::vector<SnrSet> sets;
  int resolution = 128;
  if (!rc.preset.empty()) {
    if (rc.preset != "ernst-fig4") throw InvalidParameter("unknown snr preset '" + rc.preset + "' (known: ernst-fig4)");
    for (auto [G, g] : {std::pair{1.90, 0.5}, std::pair{1.80, 1.0}, std::pair{1.69, 1.5}}) {
      sets.push_back(snr_set_from_json(json{{"Gamma", G}, {"gamma", g}}, "preset"));
    }
  } else {
    const json cfg = load_config(rc);
    const std::string where = "snr config";
    check_keys(cfg, {"sets", "resolution", "Gamma", "gamma", "T1_ms", "T2_ms", "Td_ms", "label"}, where);
    if (cfg.contains("resolution")) resolution = static_cast<int>(get_number(cfg, "resolution", where));
    if (cfg.contains("sets")) {
      if (!cfg["sets"].is_array() || cfg["sets"].empty()) throw InvalidParameter(where + ": 'sets' must be a list");
      for (std::size_t i = 0; i < cfg["sets"].size(); ++i) {
        sets.push_back(snr_set_from_json(cfg["sets"][i], where + ".sets[" + std::to_string(i) + "]"));
      }
    } else {
      json one = cfg;
      one.erase("resolution");
      sets.push_back(snr_set_from_json(one, where));
    }
  }
  if (rc.resolution) resolution = *rc.resolution;
  if (resolution < 32) throw InvalidParameter("resolution must be >= 32");
  const fs::path out = prepare_out(rc);

  for (const auto& s : sets) {
    const auto surf = bloch::snr::q_surface(s.params, resolution, rc.threads);
    bloch::snr::MaximizeOptions mo;
    mo.grid_resolution = resolution;
    mo.threads = rc.threads;
    const auto best = bloch::snr::maximize_q(s.params, mo);
    {
      std::ostringstream ss;
      bloch::io::write_q_surface_csv(ss, surf);
      write(out, "q_surface_" + s.label + ".csv", ss.str());
    }
    {
      std::ostringstream ss;
      bloch::io::CsvWriter w(ss);
      w.comment("y_m z_m normalized; region_label = optimal transfer family from S to M");
      w.header({"y_m", "z_m", "region_label"});
      for (const auto& n : surf.nodes) {
        if (n.feasible) w.row(n.y_m, n.z_m, bloch::geo::family_name(n.region));
      }
      write(out, "regions_" + s.label + ".csv", ss.str());
    }
    json rep = bloch::io::maximum_to_json(best);
    rep["Gamma"] = s.params.Gamma();
    rep["gamma"] = s.params.gamma();
    rep["resolution"] = resolution;
    write(out, "maximizer_" + s.label + ".json", bloch::io::dump(rep));
    std::cout << s.label << ": Q* = " << bloch::io::num(best.point.q) << ", theta* = " << bloch::io::num(best.theta)
              << " rad, Ernst = " << bloch::io::num(best.theta_ernst) << " rad\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// grape

struct GrapeRun {
  bloch::grape::ContrastProblem problem;
  bloch::grape::OptimizerOptions options;
};

bloch::grape::OptimizerOptions optimizer_from_json(const json& j, const std::string& where) {
  check_keys(j,
             {"max_iterations", "gradient_tolerance", "initial_step", "backtracking_factor", "min_step", "armijo",
              "seed", "restarts", "init_amplitude_hz", "quasi_newton"},
             where);
  bloch::grape::OptimizerOptions o;
  o.max_iterations = static_cast<int>(get_number_or(j, "max_iterations", o.max_iterations, where));
  o.gradient_tolerance = get_number_or(j, "gradient_tolerance", o.gradient_tolerance, where);
  o.initial_step = get_number_or(j, "initial_step", o.initial_step, where);
  o.backtrack_factor = get_number_or(j, "backtracking_factor", o.backtrack_factor, where);
  o.min_step = get_number_or(j, "min_step", o.min_step, where);
  o.armijo = get_number_or(j, "armijo", o.armijo, where);
  o.seed = static_cast<std::uint64_t>(get_number_or(j, "seed", static_cast<double>(o.seed), where));
  o.restarts = static_cast<int>(get_number_or(j, "restarts", o.restarts, where));
  o.init_amplitude = bloch::kTwoPi * get_number_or(j, "init_amplitude_hz", o.init_amplitude / bloch::kTwoPi, where);
  if (j.contains("quasi_newton")) o.quasi_newton = j["quasi_newton"].get<bool>();
  return o;
}

GrapeRun grape_from_json(const json& cfg) {
  const std::string where = "grape config";
  check_keys(cfg, {"species", "offsets_hz", "pulse", "cost", "optimizer", "b1_scales"}, where);
  GrapeRun run;
  auto& p = run.problem;
  if (!cfg.contains("species") || !cfg["species"].is_array() || cfg["species"].empty() ||
      cfg["species"].size() > 2) {
    throw InvalidParameter(where + ": 'species' must list one or two entries");
  }
  bool have_max = false, have_min = false;
  for (std::size_t i = 0; i < cfg["species"].size(); ++i) {
    const auto& s = cfg["species"][i];
    const std::string w = where + ".species[" + std::to_string(i) + "]";
    check_keys(s, {"name", "T1_ms", "T2_ms", "role"}, w);
    if (!s.contains("role") || !s["role"].is_string()) throw InvalidParameter(w + ": 'role' must be maximize|minimize");
    const std::string role = s["role"].get<std::string>();
    bloch::grape::Species sp{s.contains("name") ? s["name"].get<std::string>() : "species" + std::to_string(i),
                             spin_from_json(s, w)};
    if (role == "maximize" && !have_max) {
      p.a = sp;
      have_max = true;
    } else if (role == "minimize" && !have_min) {
      p.b = sp;
      have_min = true;
    } else {
      throw InvalidParameter(w + ": need one species with role 'maximize' and at most one with 'minimize'");
    }
  }
  if (!have_max) throw InvalidParameter(where + ": need one species with role 'maximize'");
  if (!have_min) {  // single-species design
    p.b = p.a;
    p.include_b = false;
  }
  if (!cfg.contains("offsets_hz")) throw InvalidParameter(where + ": missing 'offsets_hz'");
  if (cfg["offsets_hz"].is_array()) {
    p.ensemble = bloch::grape::OffsetEnsemble::list(offsets_from_json(cfg["offsets_hz"], where + ".offsets_hz"));
  } else {
    const auto& o = cfg["offsets_hz"];
    check_keys(o, {"min", "max", "step"}, where + ".offsets_hz");
    p.ensemble = bloch::grape::OffsetEnsemble::range(get_number(o, "min", where), get_number(o, "max", where),
                                                     get_number_or(o, "step", 1.0, where));
  }
  if (cfg.contains("b1_scales")) {
    p.ensemble.b1_scales.clear();
    for (const auto& s : cfg["b1_scales"]) p.ensemble.b1_scales.push_back(s.get<double>());
  }
  if (!cfg.contains("pulse")) throw InvalidParameter(where + ": missing 'pulse'");
  const auto& pl = cfg["pulse"];
  check_keys(pl, {"n_steps", "dt_ms", "u_max_hz"}, where + ".pulse");
  const double n = get_number(pl, "n_steps", where + ".pulse");
  if (!(n >= 1.0) || n != std::floor(n)) throw InvalidParameter(where + ".pulse: n_steps must be a positive integer");
  p.pulse.n_steps = static_cast<std::size_t>(n);
  p.pulse.dt = get_number(pl, "dt_ms", where + ".pulse") * 1e-3;
  if (pl.contains("u_max_hz") && !pl["u_max_hz"].is_null()) {
    p.pulse.u_max = bloch::kTwoPi * get_number(pl, "u_max_hz", where + ".pulse");
  }
  const std::string cost = cfg.contains("cost") ? cfg["cost"].get<std::string>() : "preparation";
  if (cost == "transverse") {
    p.cost = bloch::grape::CostKind::Transverse;
  } else if (cost == "preparation") {
    p.cost = bloch::grape::CostKind::Preparation;
  } else {
    throw InvalidParameter(where + ": cost must be 'transverse' or 'preparation'");
  }
  if (cfg.contains("optimizer")) run.options = optimizer_from_json(cfg["optimizer"], where + ".optimizer");
  return run;
}

int cmd_grape(const RunConfig& rc) {
  GrapeRun run;
  if (!rc.preset.empty()) {
    if (rc.preset != "rat-brain-muscle") {
      throw InvalidParameter("unknown grape preset '" + rc.preset + "' (known: rat-brain-muscle)");
    }
    run.problem = bloch::grape::preset_rat_brain_muscle();
    if (!rc.config.empty()) {  // optimizer overrides only
      const json cfg = load_config(rc);
      check_keys(cfg, {"optimizer"}, "grape config with preset");
      if (cfg.contains("optimizer")) run.options = optimizer_from_json(cfg["optimizer"], "grape config.optimizer");
    }
  } else {
    run = grape_from_json(load_config(rc));
  }
  if (rc.seed) run.options.seed = *rc.seed;
  run.options.threads = rc.threads;
  run.problem.validate();
  run.options.validate();
  const fs::path out = prepare_out(rc);
  const auto& prob = run.problem;

  if (rc.gradcheck) {
    const auto pulse = bloch::grape::random_pulse(prob, run.options.init_amplitude, run.options.seed);
    const auto gc = bloch::grape::gradient_check(prob, pulse, 1e-6, rc.threads);
    json rep = bloch::io::gradient_check_to_json(gc);
    rep["seed"] = run.options.seed;
    rep["pass"] = gc.max_rel_error < 1e-6;
    write(out, "gradcheck.json", bloch::io::dump(rep));
    std::cout << "gradient check: max relative error " << bloch::io::num(gc.max_rel_error) << "\n";
    return 0;
  }

  const auto res = bloch::grape::grape_optimize(prob, run.options);
  const auto rob = bloch::grape::robustness_report(res.pulse, prob, rc.threads);
  const auto ta = bloch::grape::ensemble_trajectories(prob, prob.a, res.pulse, rc.threads);
  const auto tb = prob.include_b ? bloch::grape::ensemble_trajectories(prob, prob.b, res.pulse, rc.threads)
                                 : std::vector<bloch::Trajectory>{};

  write(out, "pulse.json", bloch::io::dump(bloch::io::pulse_to_json(res.pulse)));
  std::ostringstream pc, hc, rcsv, fc;
  bloch::io::write_pulse_csv(pc, res.pulse);
  bloch::io::write_history_csv(hc, res.history);
  bloch::io::write_robustness_csv(rcsv, rob);
  bloch::io::write_fig6_csv(fc, prob, res.pulse, ta, tb);
  write(out, "pulse.csv", pc.str());
  write(out, "history.csv", hc.str());
  write(out, "robustness.csv", rcsv.str());
  write(out, "trajectories.csv", fc.str());

  json rep;
  rep["cost_kind"] = bloch::grape::cost_name(prob.cost);
  rep["cost"] = res.cost;
  rep["iterations"] = res.history.empty() ? 0 : res.history.back().iteration;
  rep["stop_reason"] = bloch::grape::stop_reason_name(res.reason);
  rep["converged"] = res.converged();
  rep["warning"] = !res.converged();
  if (!res.diagnostic.empty()) rep["diagnostic"] = res.diagnostic;
  rep["seed"] = res.seed;
  rep["restart_costs"] = res.restart_costs;
  rep[prob.a.name] = bloch::io::summary_to_json(rob.a);
  if (prob.include_b) rep[prob.b.name] = bloch::io::summary_to_json(rob.b);
  write(out, "report.json", bloch::io::dump(rep));

  std::cout << "final C = " << bloch::io::num(res.cost) << " (" << bloch::grape::stop_reason_name(res.reason) << ")\n"
            << prob.a.name << ": mean M_z " << bloch::io::num(rob.a.mean_z) << ", mean |M| "
            << bloch::io::num(rob.a.mean_norm) << "\n";
  if (prob.include_b) {
    std::cout << prob.b.name << ": mean |M| " << bloch::io::num(rob.b.mean_norm) << ", std |M| "
            << bloch::io::num(rob.b.std_norm) << "\n";
  }
  if (!res.converged()) std::cerr << "warning: " << res.diagnostic << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blochctl: Bloch-equation optimal control toolkit"};
  app.require_subcommand(1);
  RunConfig rc;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", rc.config, "JSON config file");
    sub->add_option("--out", rc.out, "output directory");
    sub->add_option("--threads", rc.threads, "worker threads")->check(CLI::PositiveNumber);
  };
  auto* sim = app.add_subcommand("simulate", "propagate a pulse over an offset ensemble");
  auto* sat = app.add_subcommand("saturate", "time-optimal saturation sequence");
  auto* snr = app.add_subcommand("snr", "Q surface and maximizer");
  auto* grp = app.add_subcommand("grape", "contrast pulse optimization");
  for (auto* s : {sim, sat, snr, grp}) add_common(s);
  snr->add_option("--preset", rc.preset, "ernst-fig4");
  snr->add_option("--resolution", rc.resolution, "grid nodes per axis (>= 32)");
  grp->add_option("--preset", rc.preset, "rat-brain-muscle");
  grp->add_option("--seed", rc.seed, "random seed of the initial pulses");
  grp->add_flag("--gradcheck", rc.gradcheck, "compare the gradient with central differences and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (sim->parsed()) return cmd_simulate(rc);
    if (sat->parsed()) return cmd_saturate(rc);
    if (snr->parsed()) return cmd_snr(rc);
    return cmd_grape(rc);
  } catch (const bloch::InvalidParameter& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const bloch::DegenerateParameters& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const bloch::NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}
