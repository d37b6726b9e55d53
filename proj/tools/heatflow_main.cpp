// heatflow: scenario-driven runner for harmonic-map heat flow experiments.
//
// Subcommands:
//   run <config.json>          integrate a scenario, write its artifact set
//   spectrum <snapshot.csv>    low spectrum of the Jacobi operator of a map
//   verify identity <trajdir>  recompute the evolution-identity residuals
//   verify rate <trajdir>      recompute the rate report from disk
//   sweep <config.json>        grid/step refinement study
//
// Exit codes: 0 pass, 1 check failure, 2 usage/config error, 3 numeric failure.

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include "heatflow/heatflow.hpp"

namespace hf = heatflow;
namespace fs = std::filesystem;

namespace {

fs::path resolve_out_dir(const hf::Scenario& s, const std::string& out_flag) {
  if (!out_flag.empty()) return fs::path(out_flag);
  if (const char* env = std::getenv("HEATFLOW_OUT"))
    return fs::path(env) / s.name;
  if (!s.output_dir.empty()) return fs::path(s.output_dir);
  return fs::path("out") / s.name;
}

int fail_with(const std::string& type, const std::string& msg, int code) {
  std::cerr << hf::error_json(type, msg).dump(2) << std::endl;
  return code;
}

int run_command(const std::string& config_path, const std::string& out_flag,
                long seed_override) {
  hf::Scenario scenario = hf::parse_config(config_path);
  if (seed_override >= 0)
    scenario.seed = static_cast<std::uint64_t>(seed_override);
  const fs::path out = resolve_out_dir(scenario, out_flag);
  const hf::RunOutcome rc = hf::run_scenario(scenario, out);
  std::cout << rc.summary;
  std::cout << "artifacts: " << rc.out_dir.string() << std::endl;
  return rc.exit_code;
}

int spectrum_command(const std::string& snapshot_path, int k, double tol,
                     const std::string& out_flag, long seed_override) {
  const hf::SnapshotFile sf = hf::read_snapshot_csv(snapshot_path);
  const hf::JacobiSystem sys = hf::assemble_system(sf.map);
  const std::uint64_t seed =
      seed_override >= 0 ? static_cast<std::uint64_t>(seed_override) : sf.seed;
  const auto eigs = hf::lowest_eigs(sys, k, tol, 10000, seed);
  const hf::Json j = hf::spectrum_json(sys, eigs, sf.config_hash, seed);
  std::cout << j.dump(2) << std::endl;
  if (!out_flag.empty()) hf::write_text_file(out_flag, j.dump(2) + "\n");
  return 0;
}

hf::FlowTrajectory trajectory_from_dir(const fs::path& dir,
                                       const hf::Scenario& scenario) {
  const hf::TrajectoryFile tf = hf::read_trajectory_csv(dir / "trajectory.csv");
  hf::FlowTrajectory traj;
  traj.lambda1 = tf.lambda1;
  for (std::size_t k = 0; k < tf.t.size(); ++k)
    traj.samples.push_back({tf.t[k], tf.energy[k], tf.tension_l2[k]});
  traj.snapshots.assign(tf.t.size(), nullptr);
  for (std::size_t k = 0; k < tf.t.size(); ++k) {
    char name[40];
    std::snprintf(name, sizeof(name), "snapshot_%06zu.csv", k);
    const fs::path p = dir / "snapshots" / name;
    if (fs::exists(p)) traj.snapshots[k] = hf::read_snapshot_csv(p).map;
  }
  const hf::SnapshotFile fin = hf::read_snapshot_csv(dir / "final_map.csv");
  traj.final_map = fin.map;
  traj.final_time = fin.t;
  traj.final_tension_l2 = hf::tension_l2(*fin.map);
  traj.final_energy = hf::energy(*fin.map);
  traj.converged = traj.final_tension_l2 <= scenario.flow.stop_tolerance;
  traj.sample_spacing =
      traj.samples.size() > 1 ? traj.samples[1].t - traj.samples[0].t : 0.0;
  return traj;
}

int verify_identity_command(const std::string& dir_str) {
  const fs::path dir(dir_str);
  const hf::Scenario scenario =
      hf::parse_config((dir / "scenario.json").string());
  hf::FlowTrajectory full = trajectory_from_dir(dir, scenario);

  // compact to the samples whose snapshots were written (uniform stride)
  hf::FlowTrajectory traj;
  for (std::size_t k = 0; k < full.samples.size(); ++k) {
    if (!full.snapshots[k]) continue;
    traj.samples.push_back(full.samples[k]);
    traj.snapshots.push_back(full.snapshots[k]);
    traj.lambda1.push_back(full.lambda1[k]);
  }
  const double burn_t =
      full.samples.empty()
          ? 0.0
          : full.samples[std::min<std::size_t>(scenario.analysis.identity_burn_in,
                                               full.samples.size() - 1)]
                .t;

  const auto residuals = hf::check_evolution_identity(traj);
  const double gate = hf::identity_noise_gate(traj);
  std::cout << "t,lhs,rhs,residual\n";
  double worst = 0.0;
  for (const auto& r : residuals) {
    std::cout << hf::fmt_double(r.t) << ',' << hf::fmt_double(r.lhs) << ','
              << hf::fmt_double(r.rhs) << ',' << hf::fmt_double(r.residual)
              << '\n';
    if (r.t >= burn_t && r.tension_l2 >= gate)
      worst = std::max(worst, r.residual);
  }
  const bool ok = worst <= scenario.analysis.identity_threshold;
  std::cout << "max_residual=" << hf::fmt_double(worst) << " threshold="
            << hf::fmt_double(scenario.analysis.identity_threshold) << " "
            << (ok ? "PASS" : "FAIL") << std::endl;
  return ok ? 0 : 1;
}

int verify_rate_command(const std::string& dir_str) {
  const fs::path dir(dir_str);
  const hf::Scenario scenario =
      hf::parse_config((dir / "scenario.json").string());
  hf::FlowTrajectory traj = trajectory_from_dir(dir, scenario);
  const hf::JacobiSystem sys = hf::assemble_system(traj.final_map);
  const auto eigs = hf::lowest_eigs(sys, scenario.analysis.eig_count,
                                    scenario.analysis.eig_tol, 10000,
                                    scenario.seed);
  const hf::RateReport rep = hf::build_rate_report(
      traj, eigs, hf::kernel_threshold(sys), scenario.analysis.window,
      scenario.analysis.rate_tol_rel);
  std::cout << hf::rate_report_json(rep, hf::config_hash(scenario),
                                    scenario.seed)
                   .dump(2)
            << std::endl;
  return (rep.verdict == "fail") ? 1 : 0;
}

struct SweepRow {
  int level = 0;
  int nodes = 0;
  double h = 0.0;
  double dt = 0.0;
  double lambda1 = 0.0;
  double b_fit = 0.0;
  double max_identity_residual = 0.0;
};

hf::Scenario refine(const hf::Scenario& base, int level) {
  hf::Scenario s = base;
  const int factor = 1 << level;
  for (int i = 0; i < s.grid.ndim; ++i) {
    s.grid.nodes[i] = s.grid.periodic()
                          ? s.grid.nodes[i] * factor
                          : (s.grid.nodes[i] - 1) * factor + 1;
  }
  // dt follows the stability guard at each level; the sample spacing halves
  // per level so time-difference residuals refine alongside h.
  const double dt0 = base.flow.resolved_dt(base.grid);
  const double spacing0 = dt0 * base.flow.snapshot_stride;
  const double bound = hf::stability_bound(s.grid, s.flow.cfl_safety);
  const double spacing = spacing0 / factor;
  s.flow.snapshot_stride =
      std::max(1, static_cast<int>(std::ceil(spacing / bound - 1e-9)));
  s.flow.dt = spacing / s.flow.snapshot_stride;
  // keep the identity burn-in fixed in time, not in samples
  s.analysis.identity_burn_in = base.analysis.identity_burn_in * factor;
  s.name = base.name + "_L" + std::to_string(level);
  return s;
}

int sweep_command(const std::string& config_path, int levels, int jobs,
                  const std::string& out_flag) {
  const hf::Scenario base = hf::parse_config(config_path);
  const fs::path out_root =
      out_flag.empty() ? resolve_out_dir(base, "") / "sweep" : fs::path(out_flag);
  fs::create_directories(out_root);

  std::vector<SweepRow> rows(levels);
  std::atomic<int> next{0};
  std::mutex io_mutex;
  std::atomic<int> failures{0};
  auto worker = [&] {
    for (;;) {
      const int lvl = next.fetch_add(1);
      if (lvl >= levels) return;
      try {
        const hf::Scenario s = refine(base, lvl);
        const hf::RunOutcome rc =
            hf::run_scenario(s, out_root / ("level" + std::to_string(lvl)));
        SweepRow row;
        row.level = lvl;
        row.nodes = s.grid.nodes[0];
        row.h = s.grid.min_spacing();
        row.dt = s.flow.resolved_dt(s.grid);
        row.lambda1 = rc.report_valid ? rc.report.lambda1_final
                                      : std::numeric_limits<double>::quiet_NaN();
        row.b_fit = rc.report_valid ? rc.report.b_fit
                                    : std::numeric_limits<double>::quiet_NaN();
        row.max_identity_residual = rc.max_identity_residual;
        rows[lvl] = row;
        if (rc.exit_code != 0) failures.fetch_add(1);
        std::lock_guard<std::mutex> lock(io_mutex);
        std::cout << "level " << lvl << " done (N=" << row.nodes << ")\n";
      } catch (const std::exception& e) {
        failures.fetch_add(1);
        std::lock_guard<std::mutex> lock(io_mutex);
        std::cerr << "level " << lvl << " failed: " << e.what() << "\n";
      }
    }
  };
  std::vector<std::thread> pool;
  const int nthreads = std::max(1, std::min(jobs, levels));
  for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  std::ostringstream csv;
  csv << "level,nodes,h,dt,lambda1,b_fit,max_identity_residual\n";
  for (const auto& r : rows)
    csv << r.level << ',' << r.nodes << ',' << hf::fmt_double(r.h) << ','
        << hf::fmt_double(r.dt) << ',' << hf::fmt_double(r.lambda1) << ','
        << hf::fmt_double(r.b_fit) << ','
        << hf::fmt_double(r.max_identity_residual) << '\n';
  hf::write_text_file(out_root / "sweep.csv", csv.str());

  std::ostringstream orders;
  orders << "refinement orders (log2 ratios between consecutive levels)\n";
  for (int l = 0; l + 1 < levels; ++l) {
    const double rid =
        rows[l].max_identity_residual / rows[l + 1].max_identity_residual;
    orders << "level " << l << "->" << l + 1
           << ": identity_residual ratio=" << hf::fmt_double(rid)
           << " order=" << hf::fmt_double(std::log2(std::max(rid, 1e-300)))
           << "\n";
  }
  hf::write_text_file(out_root / "sweep_orders.txt", orders.str());
  std::cout << csv.str() << orders.str();
  return failures.load() == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"harmonic-map heat flow laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_flag, snapshot_path, traj_dir;
  long seed_override = -1;
  int k = 5, levels = 3, jobs = 1;
  double tol = 1e-8;

  auto* run_cmd = app.add_subcommand("run", "run a scenario config");
  run_cmd->add_option("config_file", config_path, "scenario JSON");
  run_cmd->add_option("--config", config_path, "scenario JSON (alternative)");
  run_cmd->add_option("--out", out_flag, "output directory");
  run_cmd->add_option("--seed", seed_override, "override the scenario seed");

  auto* spec_cmd = app.add_subcommand("spectrum", "Jacobi spectrum of a snapshot");
  spec_cmd->add_option("snapshot", snapshot_path, "snapshot CSV")->required();
  spec_cmd->add_option("--k", k, "number of eigenvalues");
  spec_cmd->add_option("--tol", tol, "eigensolver residual tolerance");
  spec_cmd->add_option("--out", out_flag, "also write the JSON here");
  spec_cmd->add_option("--seed", seed_override, "eigensolver start seed");

  auto* verify_cmd = app.add_subcommand("verify", "re-check stored artifacts");
  verify_cmd->require_subcommand(1);
  auto* vid = verify_cmd->add_subcommand("identity", "evolution identity residuals");
  vid->add_option("trajdir", traj_dir, "artifact directory")->required();
  auto* vrt = verify_cmd->add_subcommand("rate", "convergence rate report");
  vrt->add_option("trajdir", traj_dir, "artifact directory")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "refinement study");
  sweep_cmd->add_option("config_file", config_path, "scenario JSON");
  sweep_cmd->add_option("--config", config_path, "scenario JSON (alternative)");
  sweep_cmd->add_option("--levels", levels, "number of refinement levels");
  sweep_cmd->add_option("--jobs", jobs, "parallel workers");
  sweep_cmd->add_option("--out", out_flag, "output directory");

  CLI11_PARSE(app, argc, argv);

  if ((run_cmd->parsed() || sweep_cmd->parsed()) && config_path.empty())
    return fail_with("UsageError", "missing scenario config path", 2);

  try {
    if (run_cmd->parsed()) return run_command(config_path, out_flag, seed_override);
    if (spec_cmd->parsed())
      return spectrum_command(snapshot_path, k, tol, out_flag, seed_override);
    if (verify_cmd->parsed()) {
      if (vid->parsed()) return verify_identity_command(traj_dir);
      if (vrt->parsed()) return verify_rate_command(traj_dir);
    }
    if (sweep_cmd->parsed()) return sweep_command(config_path, levels, jobs, out_flag);
  } catch (const hf::ParseError& e) {
    return fail_with("ParseError", e.what(), 2);
  } catch (const hf::ValidationError& e) {
    return fail_with("ValidationError", e.what(), 2);
  } catch (const hf::ChartViolation& e) {
    return fail_with("ChartViolation", e.what(), 3);
  } catch (const hf::NoConvergence& e) {
    return fail_with("NoConvergence", e.what(), 3);
  } catch (const hf::HeatflowError& e) {
    return fail_with("HeatflowError", e.what(), 3);
  } catch (const std::exception& e) {
    return fail_with("InternalError", e.what(), 3);
  }
  return 2;
}
