#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "heatflow/map_calculus.hpp"

namespace heatflow {

enum class Stepper { CoordinateEuler, CoordinateRK4, GeodesicEuler };

inline std::string stepper_name(Stepper s) {
  switch (s) {
    case Stepper::CoordinateEuler: return "coordinate_euler";
    case Stepper::CoordinateRK4: return "coordinate_rk4";
    case Stepper::GeodesicEuler: return "geodesic_euler";
  }
  return "?";
}

/// Largest admissible explicit time step: cfl * h_min^2 / max_i g^{ii}.
inline double stability_bound(const DomainGrid& g, double cfl_safety) {
  double gmax = g.inv_metric[0];
  for (int i = 1; i < g.ndim; ++i) gmax = std::max(gmax, g.inv_metric[i]);
  const double h = g.min_spacing();
  return cfl_safety * h * h / gmax;
}

struct FlowConfig {
  double dt = 0.0;  // 0: derive from the stability bound
  double t_end = 100.0;
  Stepper stepper = Stepper::CoordinateRK4;
  int snapshot_stride = 100;
  double stop_tolerance = 1e-10;  // on ||tau||_{L^2}
  double cfl_safety = 0.2;
  bool store_snapshots = true;

  double resolved_dt(const DomainGrid& g) const {
    return dt > 0.0 ? dt : stability_bound(g, cfl_safety);
  }

  void validate(const DomainGrid& g) const {
    if (cfl_safety <= 0.0 || cfl_safety >= 1.0)
      throw ValidationError("cfl_safety", "must lie in (0,1)");
    if (t_end <= 0.0) throw ValidationError("t_end", "must be > 0");
    if (snapshot_stride < 1)
      throw ValidationError("snapshot_stride", "must be >= 1");
    if (stop_tolerance < 0.0)
      throw ValidationError("stop_tolerance", "must be >= 0");
    const double bound = stability_bound(g, cfl_safety);
    if (resolved_dt(g) > bound * (1.0 + 1e-12))
      throw ValidationError("dt", "exceeds stability bound");
  }
};

struct FlowSample {
  double t;
  double energy;
  double tension_l2;
};

/// Recorded time series of a flow run. Samples are taken every
/// snapshot_stride steps (uniform cadence); the final map is exposed
/// separately and may sit between sample times.
struct FlowTrajectory {
  std::vector<FlowSample> samples;
  std::vector<std::shared_ptr<const DiscreteMap>> snapshots;  // per sample
  std::vector<double> lambda1;  // NaN until gap tracking fills it in
  std::shared_ptr<const DiscreteMap> final_map;
  double final_time = 0.0;
  double final_tension_l2 = 0.0;
  double final_energy = 0.0;
  bool converged = false;
  std::vector<int> energy_warnings;  // samples where E rose beyond tolerance
  double sample_spacing = 0.0;

  double initial_energy() const {
    return samples.empty() ? 0.0 : samples.front().energy;
  }
};

namespace detail {

inline void check_step_guard(const DomainGrid& g, double dt, double cfl) {
  if (dt <= 0.0) throw StabilityGuard("time step must be positive");
  if (dt > stability_bound(g, cfl) * (1.0 + 1e-12))
    throw StabilityGuard("time step exceeds explicit stability bound");
}

inline DiscreteMap offset_map(const DiscreteMap& f, const Eigen::MatrixXd& dir,
                              double scale) {
  Eigen::MatrixXd v = f.values + scale * dir;
  for (int j = 0; j < f.grid.node_count(); ++j)
    if (f.grid.boundary(j)) v.row(j) = f.values.row(j);
  return DiscreteMap(f.grid, f.target, std::move(v));
}

/// Stage evaluation for multi-stage steppers: no full map construction, only
/// the chart guard that matters mid-step. Tension vanishes on the boundary,
/// so offsets never move Dirichlet rows.
inline Eigen::MatrixXd stage_tension(const DiscreteMap& f,
                                     const Eigen::MatrixXd& dir, double scale) {
  const Eigen::MatrixXd v = f.values + scale * dir;
  if (f.target.kind == TargetKind::HyperbolicHalfSpace &&
      v.col(f.target.dim - 1).minCoeff() < f.target.chart_guard)
    throw ChartViolation("integrator stage left the admissible chart region");
  return tension_values(f.grid, f.target, v);
}

}  // namespace detail

/// One explicit step of df/dt = tau(f). Dirichlet boundary nodes never move.
inline DiscreteMap step(const DiscreteMap& f, double dt, Stepper stepper,
                        double cfl_limit = 1.0) {
  detail::check_step_guard(f.grid, dt, cfl_limit);
  switch (stepper) {
    case Stepper::CoordinateEuler: {
      return detail::offset_map(f, tension_values(f), dt);
    }
    case Stepper::CoordinateRK4: {
      const Eigen::MatrixXd k1 = tension_values(f);
      const Eigen::MatrixXd k2 = detail::stage_tension(f, k1, dt / 2);
      const Eigen::MatrixXd k3 = detail::stage_tension(f, k2, dt / 2);
      const Eigen::MatrixXd k4 = detail::stage_tension(f, k3, dt);
      return detail::offset_map(f, k1 + 2.0 * k2 + 2.0 * k3 + k4, dt / 6.0);
    }
    case Stepper::GeodesicEuler: {
      const Eigen::MatrixXd tau = tension_values(f);
      Eigen::MatrixXd v = f.values;
      const int n = f.target.dim;
      double ybuf[8], tbuf[8], obuf[8];
      for (int j = 0; j < f.grid.node_count(); ++j) {
        if (f.grid.boundary(j)) continue;
        for (int a = 0; a < n; ++a) {
          ybuf[a] = f.values(j, a);
          tbuf[a] = tau(j, a);
        }
        if (f.target.flat()) {
          for (int a = 0; a < n; ++a) v(j, a) = ybuf[a] + dt * tbuf[a];
        } else {
          detail::exp_map_halfspace(f.target, ybuf, tbuf, dt, obuf);
          for (int a = 0; a < n; ++a) v(j, a) = obuf[a];
        }
      }
      return DiscreteMap(f.grid, f.target, std::move(v));
    }
  }
  throw HeatflowError("unknown stepper");
}

/// Integrate the flow until t_end or until ||tau||_{L^2} <= stop_tolerance.
inline FlowTrajectory run(const DiscreteMap& f0, const FlowConfig& config) {
  config.validate(f0.grid);
  const double dt = config.resolved_dt(f0.grid);

  FlowTrajectory traj;
  traj.sample_spacing = dt * config.snapshot_stride;

  auto current = std::make_shared<const DiscreteMap>(f0);
  double t = 0.0;
  double tau_l2 = tension_l2(*current);
  double E = energy(*current);
  const double E0 = E;
  const double tol_E = 1e-12 * std::abs(E0);

  auto record = [&](double time) {
    if (!traj.samples.empty()) {
      const double prev = traj.samples.back().energy;
      if (E > prev + tol_E)
        traj.energy_warnings.push_back(static_cast<int>(traj.samples.size()));
    }
    traj.samples.push_back({time, E, tau_l2});
    traj.snapshots.push_back(config.store_snapshots ? current : nullptr);
    traj.lambda1.push_back(std::numeric_limits<double>::quiet_NaN());
  };

  record(0.0);
  long step_count = 0;
  bool stopped = tau_l2 <= config.stop_tolerance;
  while (!stopped && t < config.t_end - 0.5 * dt) {
    current = std::make_shared<const DiscreteMap>(
        step(*current, dt, config.stepper, config.cfl_safety * (1.0 + 1e-12)));
    ++step_count;
    t = step_count * dt;
    const bool on_stride = (step_count % config.snapshot_stride) == 0;
    if (on_stride || t >= config.t_end - 0.5 * dt) {
      tau_l2 = tension_l2(*current);
      E = energy(*current);
      if (on_stride) record(t);
      if (tau_l2 <= config.stop_tolerance) stopped = true;
    } else if (step_count % 16 == 0) {
      // Cheap interim stop probe between samples.
      tau_l2 = tension_l2(*current);
      if (tau_l2 <= config.stop_tolerance) {
        E = energy(*current);
        stopped = true;
      }
    }
  }

  traj.final_map = current;
  traj.final_time = t;
  traj.final_tension_l2 = tension_l2(*current);
  traj.final_energy = energy(*current);
  traj.converged = traj.final_tension_l2 <= config.stop_tolerance;
  return traj;
}

}  // namespace heatflow
