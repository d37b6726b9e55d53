#include <catch2/catch.hpp>

#include <memory>

#include "heatflow/flow_engine.hpp"
#include "heatflow/rng.hpp"
#include "support/oracles.hpp"

using namespace heatflow;

namespace {

DiscreteMap circle_mode_map(int N, double amp, const TargetManifold& t) {
  const auto g = DomainGrid::circle(2.0 * M_PI, N);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(g.node_count(), t.dim);
  for (int j = 0; j < g.node_count(); ++j)
    v(j, 0) = amp * std::sin(g.coords(j)[0]);
  return DiscreteMap(g, t, v);
}

DiscreteMap perturbed_segment_map(int N, double amp) {
  const auto g = DomainGrid::interval(1.0, N);
  const auto t = TargetManifold::hyperbolic_half_space(2, 1.0);
  Eigen::MatrixXd v(g.node_count(), 2);
  for (int j = 0; j < g.node_count(); ++j) {
    const double s = g.coords(j)[0];
    const double bump = amp * std::sin(M_PI * s);
    v(j, 0) = -1.0 + 2.0 * s + bump;
    v(j, 1) = 1.0 + 0.5 * bump;
  }
  return DiscreteMap(g, t, v);
}

double rk4_factor(double z) {
  return 1.0 + z + z * z / 2.0 + z * z * z / 6.0 + z * z * z * z / 24.0;
}

}  // namespace

TEST_CASE("harmonic maps are fixed points of every stepper") {
  const auto g = DomainGrid::circle(2.0 * M_PI, 32);
  const auto t = TargetManifold::flat_torus(1);
  Eigen::MatrixXd v(g.node_count(), 1);
  for (int j = 0; j < g.node_count(); ++j) v(j, 0) = g.coords(j)[0];
  const DiscreteMap f(g, t, v);
  const double dt = 0.1 * stability_bound(g, 1.0);
  for (Stepper s : {Stepper::CoordinateEuler, Stepper::CoordinateRK4,
                    Stepper::GeodesicEuler}) {
    const DiscreteMap f1 = step(f, dt, s);
    REQUIRE((f1.values - f.values).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("flat-target Euler step equals the explicit linear heat update") {
  const auto g = DomainGrid::circle(2.0 * M_PI, 48);
  const auto t = TargetManifold::euclidean(2);
  const double h = g.spacing(0);
  Eigen::MatrixXd v(g.node_count(), 2);
  for (int j = 0; j < g.node_count(); ++j) {
    const double x = g.coords(j)[0];
    v.row(j) << 0.2 * std::sin(x) + 0.05 * std::cos(3 * x), 0.1 * std::sin(2 * x);
  }
  const DiscreteMap f(g, t, v);
  const double dt = 0.15 * h * h;
  const DiscreteMap f1 = step(f, dt, Stepper::CoordinateEuler);
  for (int j = 0; j < g.node_count(); ++j) {
    const int jp = g.neighbor(j, 0, 1), jm = g.neighbor(j, 0, -1);
    for (int a = 0; a < 2; ++a) {
      const double heat =
          v(j, a) + dt * (v(jp, a) - 2.0 * v(j, a) + v(jm, a)) / (h * h);
      REQUIRE(f1.values(j, a) == Approx(heat).margin(1e-14));
    }
  }
}

TEST_CASE("explicit Euler decays an eigenmode geometrically") {
  const int N = 64;
  const auto t = TargetManifold::euclidean(1);
  DiscreteMap f = circle_mode_map(N, 0.1, t);
  const double h = f.grid.spacing(0);
  const double dt = 0.2 * h * h;
  const double mu = 4.0 / (h * h) * std::pow(std::sin(M_PI / N), 2);
  const int steps = 1000;
  for (int k = 0; k < steps; ++k) f = step(f, dt, Stepper::CoordinateEuler);
  const double factor = std::pow(1.0 - dt * mu, steps);
  for (int j = 0; j < f.grid.node_count(); ++j)
    REQUIRE(f.values(j, 0) ==
            Approx(0.1 * factor * std::sin(f.grid.coords(j)[0])).margin(1e-11));
}

TEST_CASE("RK4 trajectory matches the discrete spectral closed form") {
  const int N = 64;
  const auto t = TargetManifold::euclidean(1);
  const DiscreteMap f0 = circle_mode_map(N, 0.1, t);
  const double h = f0.grid.spacing(0);
  const double mu = 4.0 / (h * h) * std::pow(std::sin(M_PI / N), 2);

  FlowConfig cfg;
  cfg.dt = 0.2 * h * h;
  cfg.t_end = 2.0;
  cfg.stepper = Stepper::CoordinateRK4;
  cfg.snapshot_stride = 50;
  cfg.stop_tolerance = 0.0;
  const FlowTrajectory traj = run(f0, cfg);
  REQUIRE(traj.samples.size() >= 10);

  // discrete L2 norms of the mode and its derivative on the circle
  const double l2_sin = std::sqrt(M_PI);
  const double deriv_factor = std::sin(h) / h;  // central difference of sin
  const double step_gain = rk4_factor(-cfg.dt * mu);
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const long nsteps = std::lround(traj.samples[k].t / cfg.dt);
    const double amp = 0.1 * std::pow(step_gain, nsteps);
    const double tension_expected = mu * amp * l2_sin;
    const double energy_expected =
        0.5 * amp * amp * deriv_factor * deriv_factor * M_PI;
    REQUIRE(traj.samples[k].tension_l2 ==
            Approx(tension_expected).epsilon(1e-9));
    REQUIRE(traj.samples[k].energy == Approx(energy_expected).epsilon(1e-9));
  }

  SECTION("RK4 tracks the exact exponential of the semi-discrete system") {
    for (std::size_t k = 0; k < traj.samples.size(); ++k) {
      const double amp_exact = 0.1 * std::exp(-mu * traj.samples[k].t);
      REQUIRE(traj.samples[k].tension_l2 ==
              Approx(mu * amp_exact * l2_sin).epsilon(1e-6));
    }
  }
}

TEST_CASE("long RK4 run lands on the constant map") {
  const int N = 64;
  const auto t = TargetManifold::euclidean(1);
  const DiscreteMap f0 = circle_mode_map(N, 0.1, t);
  FlowConfig cfg;
  cfg.dt = 0.2 * std::pow(f0.grid.spacing(0), 2);
  cfg.t_end = 40.0;
  cfg.stepper = Stepper::CoordinateRK4;
  cfg.snapshot_stride = 200;
  cfg.stop_tolerance = 1e-9;
  const FlowTrajectory traj = run(f0, cfg);
  REQUIRE(traj.converged);
  REQUIRE(traj.final_map->values.cwiseAbs().maxCoeff() < 1e-6);
  for (std::size_t k = 1; k < traj.samples.size(); ++k)
    REQUIRE(traj.samples[k].energy <=
            traj.samples[k - 1].energy + 1e-12 * traj.samples[0].energy);
  REQUIRE(traj.energy_warnings.empty());
}

TEST_CASE("harmonic start returns a single converged sample") {
  const auto g = DomainGrid::interval(1.0, 21);
  const auto t = TargetManifold::euclidean(2);
  Eigen::MatrixXd v(g.node_count(), 2);
  for (int j = 0; j < g.node_count(); ++j) {
    const double s = g.coords(j)[0];
    v.row(j) << s, 2.0 * s;  // straight line, harmonic with Dirichlet data
  }
  FlowConfig cfg;
  cfg.t_end = 1.0;
  cfg.snapshot_stride = 10;
  const FlowTrajectory traj = run(DiscreteMap(g, t, v), cfg);
  REQUIRE(traj.converged);
  REQUIRE(traj.samples.size() == 1);
  REQUIRE(traj.samples[0].tension_l2 <= cfg.stop_tolerance);
  REQUIRE(traj.final_time == 0.0);
}

TEST_CASE("hyperbolic Dirichlet flow converges to the geodesic") {
  const int N = 51;
  const DiscreteMap f0 = perturbed_segment_map(N, 0.1);
  const double E0 = energy(f0);

  FlowConfig cfg;
  cfg.stepper = Stepper::GeodesicEuler;
  cfg.t_end = 10.0;
  cfg.snapshot_stride = 100;
  cfg.stop_tolerance = 1e-10;
  const FlowTrajectory traj = run(f0, cfg);
  REQUIRE(traj.converged);
  REQUIRE(traj.final_energy < E0);

  // boundary values never moved
  REQUIRE(traj.final_map->values.row(0) == f0.values.row(0));
  REQUIRE(traj.final_map->values.row(N - 1) == f0.values.row(N - 1));

  // shooting oracle: the limit is the constant-speed geodesic through the
  // endpoints, up to the O(h^2) consistency of the discrete tension
  const auto t = f0.target;
  Vec p(2), q(2);
  p << -1.0, 1.0;
  q << 1.0, 1.0;
  const Vec v_shoot = oracles::shoot_geodesic(t, p, q);
  const double h = f0.grid.spacing(0);
  double worst = 0.0;
  for (int j = 0; j < N; ++j) {
    const Vec gamma = exp_map(t, p, v_shoot, f0.grid.coords(j)[0]);
    worst = std::max(worst, (traj.final_map->value_at(j) - gamma).norm());
  }
  REQUIRE(worst < 10.0 * h * h);

  SECTION("energy dissipation identity holds at sample midpoints") {
    // valid while ||tau|| dominates the O(h^2) mismatch between the node-sum
    // energy quadrature and the stencil tension; early fast harmonics skipped
    const double h = f0.grid.spacing(0);
    int checked = 0;
    for (std::size_t k = 1; k + 1 < traj.samples.size(); ++k) {
      if (traj.samples[k].t < 0.05) continue;
      if (traj.samples[k].tension_l2 < 150.0 * h * h) continue;
      const double tau_sq = std::pow(traj.samples[k].tension_l2, 2);
      const double dEdt =
          (traj.samples[k + 1].energy - traj.samples[k - 1].energy) /
          (traj.samples[k + 1].t - traj.samples[k - 1].t);
      REQUIRE(dEdt == Approx(-tau_sq).epsilon(0.05));
      ++checked;
    }
    REQUIRE(checked > 3);
  }
}

TEST_CASE("stability guard") {
  const auto g = DomainGrid::circle(2.0 * M_PI, 32);
  const auto t = TargetManifold::euclidean(1);
  const DiscreteMap f(g, t, Eigen::MatrixXd::Zero(g.node_count(), 1));
  const double bound = stability_bound(g, 1.0);
  REQUIRE_THROWS_AS(step(f, 1.5 * bound, Stepper::CoordinateEuler),
                    StabilityGuard);

  FlowConfig cfg;
  cfg.dt = 2.0 * stability_bound(g, cfg.cfl_safety);
  REQUIRE_THROWS_AS(cfg.validate(g), ValidationError);

  FlowConfig ok;
  ok.dt = stability_bound(g, ok.cfl_safety);  // exactly at the bound is fine
  REQUIRE_NOTHROW(ok.validate(g));
}

TEST_CASE("the chart-guard height minimum never decreases along the flow") {
  // At a spatial minimum of the half-space height the vertical tension is
  // non-negative, so admissible data cannot cross the guard under the
  // stability bound; the guard only trips on genuinely bad configurations.
  const DiscreteMap f0 = perturbed_segment_map(33, 0.1);
  FlowConfig cfg;
  cfg.stepper = Stepper::GeodesicEuler;
  cfg.t_end = 0.5;
  cfg.snapshot_stride = 50;
  cfg.stop_tolerance = 0.0;
  const FlowTrajectory traj = run(f0, cfg);
  const double min0 = f0.values.col(1).minCoeff();
  for (const auto& snap : traj.snapshots)
    REQUIRE(snap->values.col(1).minCoeff() >= min0 - 1e-12);
}
