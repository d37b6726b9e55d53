#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "heatflow/scenario.hpp"

namespace heatflow {

namespace fs = std::filesystem;

/// Full-precision, locale-independent decimal formatting (%.17g round-trips
/// doubles exactly).
inline std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string config_hash(const Scenario& s) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(scenario_to_json(s).dump())));
  return buf;
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw HeatflowError("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------
// trajectory CSV

inline std::string trajectory_csv(const FlowTrajectory& traj,
                                  const std::string& hash, std::uint64_t seed) {
  std::ostringstream os;
  os << "# heatflow-trajectory config_hash=" << hash << " seed=" << seed << "\n";
  os << "t,energy,tension_l2,lambda1\n";
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const auto& s = traj.samples[k];
    os << fmt_double(s.t) << ',' << fmt_double(s.energy) << ','
       << fmt_double(s.tension_l2) << ',';
    if (!std::isnan(traj.lambda1[k])) os << fmt_double(traj.lambda1[k]);
    os << '\n';
  }
  return os.str();
}

struct TrajectoryFile {
  std::vector<double> t, energy, tension_l2, lambda1;  // lambda1 NaN if blank
};

inline TrajectoryFile read_trajectory_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw HeatflowError("cannot read " + path.string());
  TrajectoryFile tf;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 't') continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    while (cells.size() < 4) cells.push_back("");
    tf.t.push_back(std::stod(cells[0]));
    tf.energy.push_back(std::stod(cells[1]));
    tf.tension_l2.push_back(std::stod(cells[2]));
    tf.lambda1.push_back(cells[3].empty()
                             ? std::numeric_limits<double>::quiet_NaN()
                             : std::stod(cells[3]));
  }
  return tf;
}

// ---------------------------------------------------------------------------
// snapshot CSV (self-describing: grid/target metadata in the comment line)

inline Json target_meta(const TargetManifold& t) {
  Json j;
  j["kind"] = target_kind_name(t.kind);
  j["dim"] = t.dim;
  j["curvature_scale"] = t.curvature_scale;
  j["chart_guard"] = t.chart_guard;
  j["torus_period"] = t.torus_period;
  return j;
}

inline Json grid_meta(const DomainGrid& g) {
  Json j;
  j["kind"] = grid_kind_name(g.kind);
  j["lengths"] = std::vector<double>(g.length.begin(), g.length.begin() + g.ndim);
  j["nodes"] = std::vector<int>(g.nodes.begin(), g.nodes.begin() + g.ndim);
  j["inverse_metric"] =
      std::vector<double>(g.inv_metric.begin(), g.inv_metric.begin() + g.ndim);
  return j;
}

inline std::string snapshot_csv(const DiscreteMap& f, int sample_index, double t,
                                const std::string& hash, std::uint64_t seed) {
  Json meta;
  meta["config_hash"] = hash;
  meta["seed"] = seed;
  meta["sample_index"] = sample_index;
  meta["t"] = t;
  meta["target"] = target_meta(f.target);
  meta["grid"] = grid_meta(f.grid);
  std::ostringstream os;
  os << "# heatflow-snapshot " << meta.dump() << "\n";
  for (int i = 0; i < f.grid.ndim; ++i) os << 'x' << i << ',';
  for (int a = 0; a < f.target.dim; ++a)
    os << 'f' << a << (a + 1 < f.target.dim ? "," : "\n");
  for (int j = 0; j < f.grid.node_count(); ++j) {
    const Vec x = f.grid.coords(j);
    for (int i = 0; i < f.grid.ndim; ++i) os << fmt_double(x[i]) << ',';
    for (int a = 0; a < f.target.dim; ++a)
      os << fmt_double(f.values(j, a)) << (a + 1 < f.target.dim ? "," : "\n");
  }
  return os.str();
}

inline TargetManifold target_from_meta(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const int dim = j.at("dim").get<int>();
  if (kind == "euclidean") return TargetManifold::euclidean(dim);
  if (kind == "hyperbolic_half_space")
    return TargetManifold::hyperbolic_half_space(
        dim, j.at("curvature_scale").get<double>(),
        j.at("chart_guard").get<double>());
  if (kind == "flat_torus")
    return TargetManifold::flat_torus(dim, j.at("torus_period").get<double>());
  throw ParseError("snapshot metadata: unknown target kind");
}

inline DomainGrid grid_from_meta(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const auto L = j.at("lengths").get<std::vector<double>>();
  const auto N = j.at("nodes").get<std::vector<int>>();
  DomainGrid g;
  if (kind == "circle") g = DomainGrid::circle(L.at(0), N.at(0));
  else if (kind == "interval") g = DomainGrid::interval(L.at(0), N.at(0));
  else if (kind == "torus2") g = DomainGrid::torus2(L.at(0), L.at(1), N.at(0), N.at(1));
  else if (kind == "rectangle")
    g = DomainGrid::rectangle(L.at(0), L.at(1), N.at(0), N.at(1));
  else throw ParseError("snapshot metadata: unknown grid kind");
  const auto gm = j.at("inverse_metric").get<std::vector<double>>();
  for (int i = 0; i < g.ndim; ++i) g.inv_metric[i] = gm.at(i);
  return g;
}

struct SnapshotFile {
  std::shared_ptr<const DiscreteMap> map;
  double t = 0.0;
  int sample_index = 0;
  std::string config_hash;
  std::uint64_t seed = 0;
};

inline SnapshotFile read_snapshot_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw HeatflowError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("# heatflow-snapshot ", 0) != 0)
    throw ParseError("not a heatflow snapshot file: " + path.string());
  Json meta;
  try {
    meta = Json::parse(line.substr(std::string("# heatflow-snapshot ").size()));
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("snapshot metadata: ") + e.what());
  }
  SnapshotFile sf;
  sf.t = meta.at("t").get<double>();
  sf.sample_index = meta.at("sample_index").get<int>();
  sf.config_hash = meta.value("config_hash", "");
  sf.seed = meta.value("seed", 0ull);
  const TargetManifold target = target_from_meta(meta.at("target"));
  const DomainGrid grid = grid_from_meta(meta.at("grid"));
  std::getline(in, line);  // header row
  Eigen::MatrixXd v(grid.node_count(), target.dim);
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (row >= grid.node_count()) throw ParseError("snapshot has too many rows");
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(std::stod(cell));
    if (static_cast<int>(cells.size()) != grid.ndim + target.dim)
      throw ParseError("snapshot row has wrong arity");
    for (int a = 0; a < target.dim; ++a) v(row, a) = cells[grid.ndim + a];
    ++row;
  }
  if (row != grid.node_count()) throw ParseError("snapshot has too few rows");
  sf.map = std::make_shared<const DiscreteMap>(grid, target, std::move(v));
  return sf;
}

// ---------------------------------------------------------------------------
// spectrum / rate report JSON

inline Json spectrum_json(const JacobiSystem& sys,
                          const std::vector<EigenPair>& eigs,
                          const std::string& hash, std::uint64_t seed) {
  const double eps = kernel_threshold(sys);
  Json j;
  std::vector<double> lambda, residuals;
  for (const auto& e : eigs) {
    lambda.push_back(e.lambda);
    residuals.push_back(e.residual);
  }
  j["lambda"] = lambda;
  j["residuals"] = residuals;
  int kd = 0;
  for (const auto& e : eigs)
    if (e.lambda < eps) ++kd;
  j["degenerate"] = !eigs.empty() && eigs.front().lambda < eps;
  j["kernel_dim"] = kd;
  j["kernel_threshold"] = eps;
  j["config_hash"] = hash;
  j["seed"] = seed;
  return j;
}

inline Json rate_report_json(const RateReport& r, const std::string& hash,
                             std::uint64_t seed) {
  Json j;
  j["b_fit"] = r.b_fit;
  j["fit_window"] = {r.fit_t_begin, r.fit_t_end};
  j["fit_residual"] = r.fit_residual;
  j["fit_samples"] = r.fit_count;
  j["lambda1_final"] = r.lambda1_final;
  j["b_guaranteed"] = r.b_guaranteed;
  j["energy_rate"] = r.energy_rate;
  j["energy_fit_residual"] = r.energy_fit_residual;
  j["degenerate"] = r.degenerate;
  j["kernel_dim"] = r.kernel_dim;
  j["energy_monotone"] = r.energy_monotone;
  j["worst_energy_rise"] = r.worst_energy_rise;
  j["envelope_ok"] = r.envelope_ok;
  j["envelope_margin"] = r.envelope_margin;
  if (std::isfinite(r.gap_tail_min)) j["gap_tail_min"] = r.gap_tail_min;
  j["verdict"] = r.verdict;
  j["config_hash"] = hash;
  j["seed"] = seed;
  return j;
}

inline Json error_json(const std::string& type, const std::string& message) {
  Json j;
  j["error"]["type"] = type;
  j["error"]["message"] = message;
  return j;
}

// ---------------------------------------------------------------------------
// scenario runner

struct RunOutcome {
  int exit_code = 0;
  fs::path out_dir;
  RateReport report;
  bool report_valid = false;
  double max_identity_residual = std::numeric_limits<double>::quiet_NaN();
  std::string summary;
};

/// Execute a scenario end to end and write its artifact set:
/// trajectory.csv, snapshots/, spectrum.json, rate_report.json,
/// identity_residuals.csv, scenario.json, plots.txt, summary.txt.
inline RunOutcome run_scenario(const Scenario& scenario, const fs::path& out_dir) {
  RunOutcome rc;
  rc.out_dir = out_dir;
  fs::create_directories(out_dir / "snapshots");
  const std::string hash = config_hash(scenario);

  write_text_file(out_dir / "scenario.json", scenario_to_json(scenario).dump(2) + "\n");

  DiscreteMap f0 = build_initial_map(scenario);
  FlowTrajectory traj = run(f0, scenario.flow);

  std::vector<GapSample> gaps;
  if (scenario.analysis.gap_track)
    gaps = gap_track(traj, scenario.analysis.gap_track_stride,
                     scenario.analysis.eig_tol, scenario.seed);

  write_text_file(out_dir / "trajectory.csv",
                  trajectory_csv(traj, hash, scenario.seed));
  for (std::size_t k = 0; k < traj.snapshots.size();
       k += static_cast<std::size_t>(scenario.analysis.snapshot_file_stride)) {
    if (!traj.snapshots[k]) continue;
    char name[40];
    std::snprintf(name, sizeof(name), "snapshot_%06zu.csv", k);
    write_text_file(out_dir / "snapshots" / name,
                    snapshot_csv(*traj.snapshots[k], static_cast<int>(k),
                                 traj.samples[k].t, hash, scenario.seed));
  }
  write_text_file(out_dir / "final_map.csv",
                  snapshot_csv(*traj.final_map,
                               static_cast<int>(traj.samples.size()),
                               traj.final_time, hash, scenario.seed));

  const JacobiSystem final_sys = assemble_system(traj.final_map);
  const auto final_eigs =
      lowest_eigs(final_sys, scenario.analysis.eig_count,
                  scenario.analysis.eig_tol, 10000, scenario.seed);
  write_text_file(out_dir / "spectrum.json",
                  spectrum_json(final_sys, final_eigs, hash, scenario.seed)
                          .dump(2) +
                      "\n");

  std::ostringstream summary;
  summary << "scenario " << scenario.name << " (config " << hash << ", seed "
          << scenario.seed << ")\n";
  summary << "  flow: " << (traj.converged ? "converged" : "NOT converged")
          << " at t=" << fmt_double(traj.final_time)
          << ", ||tau||=" << fmt_double(traj.final_tension_l2)
          << ", E=" << fmt_double(traj.final_energy) << "\n";
  summary << "  spectrum: lambda1=" << fmt_double(final_eigs.front().lambda)
          << " (kernel threshold " << fmt_double(kernel_threshold(final_sys))
          << ")\n";

  bool all_ok = true;

  if (!traj.energy_warnings.empty()) {
    all_ok = false;
    summary << "  WARNING: NonMonotoneEnergy at " << traj.energy_warnings.size()
            << " samples\n";
  }

  if (scenario.analysis.identity_check) {
    try {
      const auto residuals = check_evolution_identity(traj);
      const double gate = identity_noise_gate(traj);
      std::ostringstream idcsv;
      idcsv << "# heatflow-identity config_hash=" << hash << " seed="
            << scenario.seed << "\n";
      idcsv << "t,lhs,rhs,residual\n";
      double worst_all = 0.0, worst = 0.0;
      for (std::size_t i = 0; i < residuals.size(); ++i) {
        const auto& r = residuals[i];
        idcsv << fmt_double(r.t) << ',' << fmt_double(r.lhs) << ','
              << fmt_double(r.rhs) << ',' << fmt_double(r.residual) << '\n';
        worst_all = std::max(worst_all, r.residual);
        if (static_cast<int>(i) + 1 >= scenario.analysis.identity_burn_in &&
            r.tension_l2 >= gate)
          worst = std::max(worst, r.residual);
      }
      write_text_file(out_dir / "identity_residuals.csv", idcsv.str());
      rc.max_identity_residual = worst;
      const bool ok = worst <= scenario.analysis.identity_threshold;
      summary << "  evolution identity: max residual " << fmt_double(worst)
              << " past burn-in and above the tension noise gate "
              << fmt_double(gate) << " (" << fmt_double(worst_all)
              << " over all samples)" << (ok ? " PASS" : " FAIL") << "\n";
      all_ok = all_ok && ok;
    } catch (const InsufficientSnapshots& e) {
      summary << "  evolution identity: skipped (" << e.what() << ")\n";
    }
  }

  if (scenario.analysis.rate_check) {
    if (!traj.converged) {
      summary << "  rate check: FAIL (flow did not converge)\n";
      all_ok = false;
    } else {
      rc.report = build_rate_report(traj, final_eigs,
                                    kernel_threshold(final_sys),
                                    scenario.analysis.window,
                                    scenario.analysis.rate_tol_rel);
      rc.report_valid = true;
      write_text_file(out_dir / "rate_report.json",
                      rate_report_json(rc.report, hash, scenario.seed).dump(2) +
                          "\n");
      summary << "  rate report: verdict " << rc.report.verdict
              << " (b_fit=" << fmt_double(rc.report.b_fit)
              << ", b_guaranteed=" << fmt_double(rc.report.b_guaranteed)
              << ", lambda1=" << fmt_double(rc.report.lambda1_final)
              << ", energy_rate=" << fmt_double(rc.report.energy_rate) << ")\n";
      if (rc.report.verdict == "fail") all_ok = false;
      if (!rc.report.degenerate && !rc.report.envelope_ok) {
        summary << "  WARNING: Gronwall envelope exceeded (margin "
                << fmt_double(rc.report.envelope_margin) << ")\n";
        all_ok = false;
      }
    }
  }

  std::ostringstream plots;
  plots << "# heatflow-plots config_hash=" << hash << " seed=" << scenario.seed
        << "\n";
  plots << "plot trajectory.csv t tension_l2 logy\n";
  plots << "plot trajectory.csv t energy linear\n";
  if (scenario.analysis.gap_track)
    plots << "plot trajectory.csv t lambda1 linear\n";
  if (scenario.analysis.identity_check)
    plots << "plot identity_residuals.csv t residual logy\n";
  write_text_file(out_dir / "plots.txt", plots.str());

  summary << "  result: " << (all_ok ? "PASS" : "FAIL") << "\n";
  rc.summary = summary.str();
  write_text_file(out_dir / "summary.txt", rc.summary);
  rc.exit_code = all_ok ? 0 : 1;
  return rc;
}

}  // namespace heatflow
