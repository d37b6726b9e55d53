#pragma once

#include <cmath>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "heatflow/convergence_lab.hpp"
#include "heatflow/flow_engine.hpp"
#include "heatflow/rng.hpp"

namespace heatflow {

using Json = nlohmann::json;

enum class MapRecipe { SinePerturbation, PerturbedGeodesicPath, WindingLoop, Constant };

inline std::string recipe_name(MapRecipe r) {
  switch (r) {
    case MapRecipe::SinePerturbation: return "sine_perturbation";
    case MapRecipe::PerturbedGeodesicPath: return "perturbed_geodesic_path";
    case MapRecipe::WindingLoop: return "winding_loop";
    case MapRecipe::Constant: return "constant";
  }
  return "?";
}

/// Initial-map construction: one analytic recipe from the fixed catalog plus
/// an optional seeded smooth perturbation of prescribed sup-norm amplitude.
struct InitialMapConfig {
  MapRecipe recipe = MapRecipe::Constant;
  double amplitude = 0.0;       // recipe amplitude (sine_perturbation)
  int mode = 1;                 // sine mode count along axis 0
  int component = 0;            // target component carrying the recipe shape
  Vec base;                     // base chart point (constant / sine offset)
  Vec endpoint_a, endpoint_b;   // geodesic path endpoints
  int winding = 1;              // winding number (winding_loop)
  double perturb_amplitude = 0.0;
  int perturb_modes = 4;
};

struct AnalysisConfig {
  int eig_count = 4;
  double eig_tol = 1e-8;
  bool gap_track = true;
  int gap_track_stride = 10;
  bool identity_check = true;
  double identity_threshold = 1e-2;
  // The identity threshold applies from this sample on: initial data with
  // harmonic tails carries transients no uniform sampling of an explicit
  // scheme can resolve, and they die within a few samples.
  int identity_burn_in = 20;
  bool rate_check = true;
  double rate_tol_rel = 0.01;
  WindowPolicy window;
  int snapshot_file_stride = 1;  // write every k-th sample snapshot to disk
};

struct Scenario {
  std::string name = "scenario";
  TargetManifold target;
  DomainGrid grid;
  InitialMapConfig initial;
  FlowConfig flow;
  AnalysisConfig analysis;
  std::uint64_t seed = 1;
  std::string output_dir;  // optional; CLI may override
};

namespace detail {

inline void reject_unknown(const Json& j, const char* where,
                           std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed)
      if (it.key() == a) {
        ok = true;
        break;
      }
    if (!ok)
      throw ValidationError(std::string(where) + "." + it.key(),
                            "unknown key");
  }
}

inline double get_num(const Json& j, const char* where, const char* key,
                      double dflt, bool required = false) {
  if (!j.contains(key)) {
    if (required)
      throw ValidationError(std::string(where) + "." + key, "missing");
    return dflt;
  }
  if (!j[key].is_number())
    throw ValidationError(std::string(where) + "." + key, "must be a number");
  return j[key].get<double>();
}

inline int get_int(const Json& j, const char* where, const char* key, int dflt,
                   bool required = false) {
  if (!j.contains(key)) {
    if (required)
      throw ValidationError(std::string(where) + "." + key, "missing");
    return dflt;
  }
  if (!j[key].is_number_integer())
    throw ValidationError(std::string(where) + "." + key,
                          "must be an integer");
  return j[key].get<int>();
}

inline bool get_bool(const Json& j, const char* where, const char* key,
                     bool dflt) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_boolean())
    throw ValidationError(std::string(where) + "." + key, "must be a boolean");
  return j[key].get<bool>();
}

inline std::string get_str(const Json& j, const char* where, const char* key,
                           const std::string& dflt, bool required = false) {
  if (!j.contains(key)) {
    if (required)
      throw ValidationError(std::string(where) + "." + key, "missing");
    return dflt;
  }
  if (!j[key].is_string())
    throw ValidationError(std::string(where) + "." + key, "must be a string");
  return j[key].get<std::string>();
}

inline Vec get_vec(const Json& j, const char* where, const char* key, int dim) {
  if (!j.contains(key) || !j[key].is_array())
    throw ValidationError(std::string(where) + "." + key,
                          "must be an array of numbers");
  const auto& arr = j[key];
  if (dim >= 0 && static_cast<int>(arr.size()) != dim)
    throw ValidationError(std::string(where) + "." + key,
                          "wrong dimension");
  Vec v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number())
      throw ValidationError(std::string(where) + "." + key,
                            "must be an array of numbers");
    v[static_cast<long>(i)] = arr[i].get<double>();
  }
  return v;
}

}  // namespace detail

inline TargetManifold parse_target(const Json& j) {
  detail::reject_unknown(j, "target",
                         {"kind", "dim", "curvature_scale", "chart_guard",
                          "torus_period"});
  const std::string kind = detail::get_str(j, "target", "kind", "", true);
  const int dim = detail::get_int(j, "target", "dim", 2);
  if (dim < 1 || dim > 8)
    throw ValidationError("target.dim", "must lie in [1, 8]");
  if (kind == "euclidean") return TargetManifold::euclidean(dim);
  if (kind == "hyperbolic_half_space") {
    if (dim < 2)
      throw ValidationError("target.dim", "half-space needs dim >= 2");
    return TargetManifold::hyperbolic_half_space(
        dim, detail::get_num(j, "target", "curvature_scale", 1.0),
        detail::get_num(j, "target", "chart_guard", 1e-6));
  }
  if (kind == "flat_torus")
    return TargetManifold::flat_torus(
        dim, detail::get_num(j, "target", "torus_period", 2.0 * M_PI));
  throw ValidationError("target.kind", "unknown kind '" + kind + "'");
}

inline DomainGrid parse_grid(const Json& j) {
  detail::reject_unknown(
      j, "grid", {"kind", "length", "lengths", "nodes", "inverse_metric"});
  const std::string kind = detail::get_str(j, "grid", "kind", "", true);
  DomainGrid g;
  if (kind == "circle" || kind == "interval") {
    const double L = detail::get_num(j, "grid", "length", 0.0, true);
    const int N = detail::get_int(j, "grid", "nodes", 0, true);
    g = (kind == "circle") ? DomainGrid::circle(L, N)
                           : DomainGrid::interval(L, N);
  } else if (kind == "torus2" || kind == "rectangle") {
    const Vec L = detail::get_vec(j, "grid", "lengths", 2);
    if (!j.contains("nodes") || !j["nodes"].is_array() || j["nodes"].size() != 2)
      throw ValidationError("grid.nodes", "must be an array of two integers");
    const int n0 = j["nodes"][0].get<int>();
    const int n1 = j["nodes"][1].get<int>();
    g = (kind == "torus2") ? DomainGrid::torus2(L[0], L[1], n0, n1)
                           : DomainGrid::rectangle(L[0], L[1], n0, n1);
  } else {
    throw ValidationError("grid.kind", "unknown kind '" + kind + "'");
  }
  if (j.contains("inverse_metric")) {
    const Vec gm = detail::get_vec(j, "grid", "inverse_metric", g.ndim);
    for (int i = 0; i < g.ndim; ++i) g.inv_metric[i] = gm[i];
    g.check();
  }
  return g;
}

inline InitialMapConfig parse_initial_map(const Json& j, const TargetManifold& t) {
  detail::reject_unknown(j, "initial_map",
                         {"recipe", "amplitude", "mode", "component", "base",
                          "endpoints", "winding", "perturbation"});
  InitialMapConfig c;
  const std::string r = detail::get_str(j, "initial_map", "recipe", "", true);
  if (r == "sine_perturbation") c.recipe = MapRecipe::SinePerturbation;
  else if (r == "perturbed_geodesic_path") c.recipe = MapRecipe::PerturbedGeodesicPath;
  else if (r == "winding_loop") c.recipe = MapRecipe::WindingLoop;
  else if (r == "constant") c.recipe = MapRecipe::Constant;
  else throw ValidationError("initial_map.recipe", "unknown recipe '" + r + "'");

  c.amplitude = detail::get_num(j, "initial_map", "amplitude", 0.0);
  c.mode = detail::get_int(j, "initial_map", "mode", 1);
  c.component = detail::get_int(j, "initial_map", "component", 0);
  if (c.component < 0 || c.component >= t.dim)
    throw ValidationError("initial_map.component", "out of range");
  c.winding = detail::get_int(j, "initial_map", "winding", 1);

  if (j.contains("base")) c.base = detail::get_vec(j, "initial_map", "base", t.dim);
  else {
    c.base = Vec::Zero(t.dim);
    if (t.kind == TargetKind::HyperbolicHalfSpace) c.base[t.dim - 1] = 1.0;
  }

  if (c.recipe == MapRecipe::PerturbedGeodesicPath) {
    if (!j.contains("endpoints") || !j["endpoints"].is_array() ||
        j["endpoints"].size() != 2)
      throw ValidationError("initial_map.endpoints",
                            "must be an array of two chart points");
    Json pair = j["endpoints"];
    Json wrap;
    wrap["a"] = pair[0];
    wrap["b"] = pair[1];
    c.endpoint_a = detail::get_vec(wrap, "initial_map.endpoints", "a", t.dim);
    c.endpoint_b = detail::get_vec(wrap, "initial_map.endpoints", "b", t.dim);
  }

  if (j.contains("perturbation")) {
    const Json& p = j["perturbation"];
    detail::reject_unknown(p, "initial_map.perturbation", {"amplitude", "modes"});
    c.perturb_amplitude =
        detail::get_num(p, "initial_map.perturbation", "amplitude", 0.0);
    c.perturb_modes = detail::get_int(p, "initial_map.perturbation", "modes", 4);
    if (c.perturb_modes < 1)
      throw ValidationError("initial_map.perturbation.modes", "must be >= 1");
  }
  return c;
}

inline FlowConfig parse_flow(const Json& j, const TargetManifold& t) {
  detail::reject_unknown(j, "flow",
                         {"dt", "t_end", "stepper", "snapshot_stride",
                          "stop_tolerance", "cfl_safety"});
  FlowConfig f;
  f.stepper = t.flat() ? Stepper::CoordinateRK4 : Stepper::GeodesicEuler;
  f.dt = detail::get_num(j, "flow", "dt", 0.0);
  f.t_end = detail::get_num(j, "flow", "t_end", 100.0);
  f.snapshot_stride = detail::get_int(j, "flow", "snapshot_stride", 100);
  f.stop_tolerance = detail::get_num(j, "flow", "stop_tolerance", 1e-10);
  f.cfl_safety = detail::get_num(j, "flow", "cfl_safety", 0.2);
  if (j.contains("stepper")) {
    const std::string s = detail::get_str(j, "flow", "stepper", "");
    if (s == "coordinate_euler") f.stepper = Stepper::CoordinateEuler;
    else if (s == "coordinate_rk4") f.stepper = Stepper::CoordinateRK4;
    else if (s == "geodesic_euler") f.stepper = Stepper::GeodesicEuler;
    else throw ValidationError("flow.stepper", "unknown stepper '" + s + "'");
  }
  return f;
}

inline AnalysisConfig parse_analysis(const Json& j) {
  detail::reject_unknown(
      j, "analysis",
      {"eig_count", "eig_tol", "gap_track", "gap_track_stride",
       "identity_check", "identity_threshold", "identity_burn_in",
       "rate_check", "rate_tol_rel", "fit_window_lo", "fit_window_hi",
       "fit_min_samples", "snapshot_file_stride"});
  AnalysisConfig a;
  a.eig_count = detail::get_int(j, "analysis", "eig_count", 4);
  a.eig_tol = detail::get_num(j, "analysis", "eig_tol", 1e-8);
  a.gap_track = detail::get_bool(j, "analysis", "gap_track", true);
  a.gap_track_stride = detail::get_int(j, "analysis", "gap_track_stride", 10);
  a.identity_check = detail::get_bool(j, "analysis", "identity_check", true);
  a.identity_threshold =
      detail::get_num(j, "analysis", "identity_threshold", 1e-2);
  a.identity_burn_in = detail::get_int(j, "analysis", "identity_burn_in", 20);
  if (a.identity_burn_in < 0)
    throw ValidationError("analysis.identity_burn_in", "must be >= 0");
  a.rate_check = detail::get_bool(j, "analysis", "rate_check", true);
  a.rate_tol_rel = detail::get_num(j, "analysis", "rate_tol_rel", 0.01);
  a.window.lo_frac = detail::get_num(j, "analysis", "fit_window_lo", 1e-8);
  a.window.hi_frac = detail::get_num(j, "analysis", "fit_window_hi", 1e-3);
  a.window.min_samples = detail::get_int(j, "analysis", "fit_min_samples", 20);
  a.snapshot_file_stride =
      detail::get_int(j, "analysis", "snapshot_file_stride", 1);
  if (a.eig_count < 1) throw ValidationError("analysis.eig_count", "must be >= 1");
  if (a.snapshot_file_stride < 1)
    throw ValidationError("analysis.snapshot_file_stride", "must be >= 1");
  return a;
}

inline Scenario parse_scenario_json(const Json& j) {
  detail::reject_unknown(j, "scenario",
                         {"name", "target", "grid", "initial_map", "flow",
                          "analysis", "seed", "output_dir"});
  if (!j.contains("target") || !j.contains("grid") || !j.contains("initial_map"))
    throw ValidationError("scenario", "target, grid and initial_map are required");
  Scenario s;
  s.name = detail::get_str(j, "scenario", "name", "scenario");
  s.target = parse_target(j["target"]);
  s.grid = parse_grid(j["grid"]);
  s.initial = parse_initial_map(j["initial_map"], s.target);
  s.flow = parse_flow(j.contains("flow") ? j["flow"] : Json::object(), s.target);
  s.analysis = j.contains("analysis") ? parse_analysis(j["analysis"])
                                      : AnalysisConfig{};
  if (j.contains("seed")) {
    const Json& sj = j["seed"];
    if (!sj.is_number_integer() && !sj.is_number_unsigned())
      throw ValidationError("seed", "must be a non-negative integer");
    if (sj.is_number_integer() && sj.get<long long>() < 0)
      throw ValidationError("seed", "must be a non-negative integer");
    s.seed = sj.get<std::uint64_t>();
  }
  s.output_dir = detail::get_str(j, "scenario", "output_dir", "");

  // recipe/grid/target compatibility and the explicit stability guard
  if (s.initial.recipe == MapRecipe::WindingLoop) {
    if (s.target.kind != TargetKind::FlatTorusChart)
      throw ValidationError("initial_map.recipe",
                            "winding_loop requires a flat_torus target");
    if (!s.grid.periodic())
      throw ValidationError("initial_map.recipe",
                            "winding_loop requires a periodic grid");
  }
  if (s.initial.recipe == MapRecipe::PerturbedGeodesicPath && s.grid.periodic())
    throw ValidationError("initial_map.recipe",
                          "perturbed_geodesic_path requires a Dirichlet grid");
  s.flow.validate(s.grid);
  return s;
}

inline Scenario parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("config must be a JSON object");
  return parse_scenario_json(j);
}

/// Resolved scenario back to canonical JSON (defaults applied); also the
/// input of the config hash embedded in every output file.
inline Json scenario_to_json(const Scenario& s) {
  Json j;
  j["name"] = s.name;
  Json t;
  t["kind"] = target_kind_name(s.target.kind);
  t["dim"] = s.target.dim;
  if (s.target.kind == TargetKind::HyperbolicHalfSpace) {
    t["curvature_scale"] = s.target.curvature_scale;
    t["chart_guard"] = s.target.chart_guard;
  }
  if (s.target.kind == TargetKind::FlatTorusChart)
    t["torus_period"] = s.target.torus_period;
  j["target"] = t;
  Json g;
  g["kind"] = grid_kind_name(s.grid.kind);
  if (s.grid.ndim == 1) {
    g["length"] = s.grid.length[0];
    g["nodes"] = s.grid.nodes[0];
    g["inverse_metric"] = {s.grid.inv_metric[0]};
  } else {
    g["lengths"] = {s.grid.length[0], s.grid.length[1]};
    g["nodes"] = {s.grid.nodes[0], s.grid.nodes[1]};
    g["inverse_metric"] = {s.grid.inv_metric[0], s.grid.inv_metric[1]};
  }
  j["grid"] = g;
  Json im;
  im["recipe"] = recipe_name(s.initial.recipe);
  im["amplitude"] = s.initial.amplitude;
  im["mode"] = s.initial.mode;
  im["component"] = s.initial.component;
  im["base"] = std::vector<double>(s.initial.base.data(),
                                   s.initial.base.data() + s.initial.base.size());
  if (s.initial.recipe == MapRecipe::PerturbedGeodesicPath) {
    im["endpoints"] = {std::vector<double>(s.initial.endpoint_a.data(),
                                           s.initial.endpoint_a.data() +
                                               s.initial.endpoint_a.size()),
                       std::vector<double>(s.initial.endpoint_b.data(),
                                           s.initial.endpoint_b.data() +
                                               s.initial.endpoint_b.size())};
  }
  if (s.initial.recipe == MapRecipe::WindingLoop)
    im["winding"] = s.initial.winding;
  Json pt;
  pt["amplitude"] = s.initial.perturb_amplitude;
  pt["modes"] = s.initial.perturb_modes;
  im["perturbation"] = pt;
  j["initial_map"] = im;
  Json fl;
  fl["dt"] = s.flow.resolved_dt(s.grid);
  fl["t_end"] = s.flow.t_end;
  fl["stepper"] = stepper_name(s.flow.stepper);
  fl["snapshot_stride"] = s.flow.snapshot_stride;
  fl["stop_tolerance"] = s.flow.stop_tolerance;
  fl["cfl_safety"] = s.flow.cfl_safety;
  j["flow"] = fl;
  Json an;
  an["eig_count"] = s.analysis.eig_count;
  an["eig_tol"] = s.analysis.eig_tol;
  an["gap_track"] = s.analysis.gap_track;
  an["gap_track_stride"] = s.analysis.gap_track_stride;
  an["identity_check"] = s.analysis.identity_check;
  an["identity_threshold"] = s.analysis.identity_threshold;
  an["identity_burn_in"] = s.analysis.identity_burn_in;
  an["rate_check"] = s.analysis.rate_check;
  an["rate_tol_rel"] = s.analysis.rate_tol_rel;
  an["fit_window_lo"] = s.analysis.window.lo_frac;
  an["fit_window_hi"] = s.analysis.window.hi_frac;
  an["fit_min_samples"] = s.analysis.window.min_samples;
  an["snapshot_file_stride"] = s.analysis.snapshot_file_stride;
  j["analysis"] = an;
  j["seed"] = s.seed;
  if (!s.output_dir.empty()) j["output_dir"] = s.output_dir;
  return j;
}

/// Seeded smooth perturbation field, sup-normalized to `amplitude`:
/// sum_k c_k/k^2 times Dirichlet sine or randomly-phased periodic modes.
inline Eigen::MatrixXd perturbation_field(const DomainGrid& g, int target_dim,
                                          double amplitude, int modes,
                                          std::uint64_t seed) {
  const int N = g.node_count();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(N, target_dim);
  if (amplitude == 0.0) return p;
  for (int a = 0; a < target_dim; ++a) {
    for (int k = 1; k <= modes; ++k) {
      SplitMix64 rng(mix_seed(seed, 1000003ull * a + k));
      const double c = rng.symmetric() / (k * k);
      std::array<double, 2> phase{0.0, 0.0};
      for (int ax = 0; ax < g.ndim; ++ax)
        phase[ax] = g.periodic() ? 2.0 * M_PI * rng.uniform() : 0.0;
      for (int j = 0; j < N; ++j) {
        const Vec x = g.coords(j);
        double shape = 1.0;
        for (int ax = 0; ax < g.ndim; ++ax) {
          const double L = g.length[ax];
          shape *= g.periodic()
                       ? std::sin(2.0 * M_PI * k * x[ax] / L + phase[ax])
                       : std::sin(M_PI * k * x[ax] / L);
        }
        p(j, a) += c * shape;
      }
    }
  }
  const double sup = p.cwiseAbs().maxCoeff();
  if (sup > 0.0) p *= amplitude / sup;
  return p;
}

/// Build the initial map of a scenario from its catalog recipe.
inline DiscreteMap build_initial_map(const Scenario& s) {
  const DomainGrid& g = s.grid;
  const TargetManifold& t = s.target;
  const int N = g.node_count();
  Eigen::MatrixXd v(N, t.dim);
  for (int j = 0; j < N; ++j) v.row(j) = s.initial.base.transpose();

  switch (s.initial.recipe) {
    case MapRecipe::Constant:
      break;
    case MapRecipe::SinePerturbation: {
      for (int j = 0; j < N; ++j) {
        const Vec x = g.coords(j);
        const double L = g.length[0];
        const double arg = g.periodic() ? 2.0 * M_PI * s.initial.mode * x[0] / L
                                        : M_PI * s.initial.mode * x[0] / L;
        v(j, s.initial.component) += s.initial.amplitude * std::sin(arg);
      }
      break;
    }
    case MapRecipe::PerturbedGeodesicPath: {
      if (g.ndim != 1)
        throw ValidationError("initial_map.recipe",
                              "geodesic path needs a 1-d domain");
      for (int j = 0; j < N; ++j) {
        const double sfrac = g.coords(j)[0] / g.length[0];
        v.row(j) = ((1.0 - sfrac) * s.initial.endpoint_a +
                    sfrac * s.initial.endpoint_b)
                       .transpose();
      }
      break;
    }
    case MapRecipe::WindingLoop: {
      for (int j = 0; j < N; ++j) {
        const double frac = g.coords(j)[0] / g.length[0];
        v(j, s.initial.component) +=
            s.initial.winding * t.torus_period * frac;
      }
      break;
    }
  }

  Eigen::MatrixXd p = perturbation_field(g, t.dim, s.initial.perturb_amplitude,
                                         s.initial.perturb_modes, s.seed);
  if (!g.periodic()) {
    for (int j = 0; j < N; ++j)
      if (g.boundary(j)) p.row(j).setZero();
  }
  return DiscreteMap(g, t, v + p);
}

}  // namespace heatflow
