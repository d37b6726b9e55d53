#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "heatflow/flow_engine.hpp"
#include "heatflow/jacobi_spectral.hpp"

namespace heatflow {

/// Decade-based fit window: samples with y in [lo_frac, hi_frac] * y(0).
/// If the series never decays into the band, the fit falls back to all
/// positive samples (constant data then yields rate zero).
struct WindowPolicy {
  double lo_frac = 1e-8;
  double hi_frac = 1e-3;
  int min_samples = 20;
};

struct FitResult {
  double rate = 0.0;       // -slope of the log-linear fit
  double intercept = 0.0;  // log y at t = 0
  double residual = 0.0;   // rms residual of log y over the window
  double t_begin = 0.0;
  double t_end = 0.0;
  int count = 0;
  bool used_fallback_window = false;
};

inline FitResult fit_decay_rate(const std::vector<double>& t,
                                const std::vector<double>& y,
                                const WindowPolicy& policy = {}) {
  if (t.size() != y.size() || t.empty())
    throw EmptyWindow("series empty or mismatched");
  const double y0 = y.front();
  std::vector<int> idx;
  if (y0 > 0.0) {
    for (std::size_t k = 0; k < y.size(); ++k)
      if (y[k] > 0.0 && y[k] >= policy.lo_frac * y0 && y[k] <= policy.hi_frac * y0)
        idx.push_back(static_cast<int>(k));
  }
  bool fallback = false;
  if (idx.size() < 2) {
    idx.clear();
    for (std::size_t k = 0; k < y.size(); ++k)
      if (y[k] > 0.0) idx.push_back(static_cast<int>(k));
    fallback = true;
  }
  if (idx.size() < 2) throw EmptyWindow("no positive samples to fit");

  double st = 0, sy = 0, stt = 0, sty = 0;
  for (int k : idx) {
    const double ly = std::log(y[k]);
    st += t[k];
    sy += ly;
    stt += t[k] * t[k];
    sty += t[k] * ly;
  }
  const double nn = static_cast<double>(idx.size());
  const double det = nn * stt - st * st;
  if (det == 0.0) throw EmptyWindow("degenerate fit window");
  const double slope = (nn * sty - st * sy) / det;
  const double intercept = (sy - slope * st) / nn;

  double rss = 0.0;
  for (int k : idx) {
    const double e = std::log(y[k]) - (intercept + slope * t[k]);
    rss += e * e;
  }
  FitResult fit;
  fit.rate = -slope;
  fit.intercept = intercept;
  fit.residual = std::sqrt(rss / nn);
  fit.t_begin = t[idx.front()];
  fit.t_end = t[idx.back()];
  fit.count = static_cast<int>(idx.size());
  fit.used_fallback_window = fallback;
  return fit;
}

struct IdentityResidual {
  double t = 0.0;
  double lhs = 0.0;       // central difference of (1/2)||tau||^2
  double rhs = 0.0;       // -<K_strong tau, tau>_M
  double residual = 0.0;  // |lhs - rhs| / max(||tau||^2, floor)
  double tension_l2 = 0.0;
};

/// Smallest ||tau|| whose square is resolvable above the roundoff floor of
/// the stencil tension evaluation (eps * |f| / h^2 per node). Residuals at
/// samples below this gate measure floating-point noise, not the identity.
inline double identity_noise_gate(const FlowTrajectory& traj) {
  double sup = 0.0;
  for (const auto& s : traj.snapshots)
    if (s) {
      sup = std::max(sup, s->values.cwiseAbs().maxCoeff());
      break;
    }
  if (traj.final_map)
    sup = std::max(sup, traj.final_map->values.cwiseAbs().maxCoeff());
  const DiscreteMap* any =
      traj.final_map ? traj.final_map.get()
                     : (traj.snapshots.empty() ? nullptr : traj.snapshots[0].get());
  if (!any) return 0.0;
  const double h = any->grid.min_spacing();
  return 1e5 * std::numeric_limits<double>::epsilon() * std::max(1.0, sup) /
         (h * h);
}

/// Lemma-style evolution identity along stored snapshots:
/// (1/2) d/dt ||tau||^2 = -<J tau, tau>, strong form on the left slot.
inline std::vector<IdentityResidual> check_evolution_identity(
    const FlowTrajectory& traj, double floor = 1e-24) {
  const auto& snaps = traj.snapshots;
  std::size_t usable = 0;
  while (usable < snaps.size() && snaps[usable]) ++usable;
  if (usable < 3)
    throw InsufficientSnapshots("need at least 3 consecutive stored snapshots");

  // uniform cadence required for the central difference
  for (std::size_t k = 1; k + 1 < usable; ++k) {
    const double d0 = traj.samples[k].t - traj.samples[k - 1].t;
    const double d1 = traj.samples[k + 1].t - traj.samples[k].t;
    if (std::abs(d1 - d0) > 1e-9 * d0) {
      usable = k + 1;
      break;
    }
  }
  if (usable < 3)
    throw InsufficientSnapshots("snapshot cadence is not uniform");

  std::vector<double> half_tau_sq(usable);
  std::vector<Eigen::VectorXd> tau_stacked(usable);
  for (std::size_t k = 0; k < usable; ++k) {
    const Eigen::MatrixXd tau = tension_values(*snaps[k]);
    tau_stacked[k] = stack_rows(tau);
    double acc = 0.0;
    const DiscreteMap& f = *snaps[k];
    for (int j = 0; j < f.grid.node_count(); ++j) {
      const double w = f.grid.weight(j);
      if (w == 0.0) continue;
      const Vec h = metric_diag_at(f.target, f.value_at(j));
      const Vec tv = tau.row(j).transpose();
      acc += w * tv.dot(h.cwiseProduct(tv));
    }
    half_tau_sq[k] = 0.5 * acc;
  }

  std::vector<IdentityResidual> out;
  for (std::size_t k = 1; k + 1 < usable; ++k) {
    const JacobiSystem sys = assemble_system(snaps[k]);
    const Eigen::VectorXd tau_int = sys.restrict_full(tau_stacked[k]);
    IdentityResidual r;
    r.t = traj.samples[k].t;
    r.lhs = (half_tau_sq[k + 1] - half_tau_sq[k - 1]) /
            (traj.samples[k + 1].t - traj.samples[k - 1].t);
    r.rhs = -(sys.K_strong * tau_int).dot(sys.M_diag.cwiseProduct(tau_int));
    r.residual = std::abs(r.lhs - r.rhs) /
                 std::max(2.0 * half_tau_sq[k], floor);
    r.tension_l2 = std::sqrt(2.0 * half_tau_sq[k]);
    out.push_back(r);
  }
  return out;
}

struct GapSample {
  int sample_index = 0;
  double t = 0.0;
  double lambda1 = 0.0;
};

/// lambda_1(J_{f_t}) along stored snapshots, every `stride` samples plus the
/// final stored sample. Consecutive eigensolves are warm-started.
inline std::vector<GapSample> gap_track(FlowTrajectory& traj, int stride,
                                        double eig_tol = 1e-8,
                                        std::uint64_t seed = 1u) {
  if (stride < 1) throw ValidationError("gap_track_stride", "must be >= 1");
  std::vector<GapSample> out;
  Eigen::VectorXd warm;
  bool have_warm = false;
  for (std::size_t k = 0; k < traj.snapshots.size();
       k += static_cast<std::size_t>(stride)) {
    if (!traj.snapshots[k]) break;
    const JacobiSystem sys = assemble_system(traj.snapshots[k]);
    const auto eigs = lowest_eigs(sys, 1, eig_tol, 10000, seed,
                                  have_warm ? &warm : nullptr);
    warm = eigs[0].section;
    have_warm = true;
    out.push_back({static_cast<int>(k), traj.samples[k].t, eigs[0].lambda});
    traj.lambda1[k] = eigs[0].lambda;
  }
  return out;
}

/// Summary of the convergence-rate verification along one trajectory.
struct RateReport {
  double b_fit = 0.0;             // fitted decay rate of ||tau||
  double fit_t_begin = 0.0, fit_t_end = 0.0;
  double fit_residual = 0.0;
  int fit_count = 0;
  double lambda1_final = 0.0;     // spectral gap at the numerical limit map
  double b_guaranteed = 0.0;           // lambda1_final / 2, the guaranteed rate
  double energy_rate = 0.0;       // fitted decay rate of |E - E_final|
  double energy_fit_residual = 0.0;
  bool degenerate = false;
  int kernel_dim = 0;
  bool energy_monotone = true;
  double worst_energy_rise = 0.0;
  bool envelope_ok = true;        // Gronwall envelope at rate b_guaranteed
  double envelope_margin = 0.0;   // max y / bound ratio over the window
  double gap_tail_min = std::numeric_limits<double>::quiet_NaN();
  std::string verdict;            // "pass", "fail", or "degenerate"
};

/// Assemble the rate report from a converged trajectory and the spectrum of
/// its final map. Degenerate limits produce an informational report.
inline RateReport build_rate_report(const FlowTrajectory& traj,
                                    const std::vector<EigenPair>& final_eigs,
                                    double kernel_eps,
                                    const WindowPolicy& policy = {},
                                    double rate_tol_rel = 0.01) {
  if (!traj.converged)
    throw NotConverged("trajectory did not reach the stop tolerance");
  if (final_eigs.empty()) throw ValidationError("spectrum", "empty");

  RateReport rep;
  std::vector<double> t, tau, de;
  for (const auto& s : traj.samples) {
    t.push_back(s.t);
    tau.push_back(s.tension_l2);
    de.push_back(s.energy - traj.final_energy);
  }

  const FitResult tf = fit_decay_rate(t, tau, policy);
  rep.b_fit = tf.rate;
  rep.fit_t_begin = tf.t_begin;
  rep.fit_t_end = tf.t_end;
  rep.fit_residual = tf.residual;
  rep.fit_count = tf.count;

  rep.lambda1_final = final_eigs.front().lambda;
  rep.b_guaranteed = 0.5 * rep.lambda1_final;
  rep.kernel_dim = 0;
  for (const auto& e : final_eigs)
    if (e.lambda < kernel_eps) ++rep.kernel_dim;
  rep.degenerate = rep.lambda1_final < kernel_eps;

  try {
    const FitResult ef = fit_decay_rate(t, de, policy);
    rep.energy_rate = ef.rate;
    rep.energy_fit_residual = ef.residual;
  } catch (const EmptyWindow&) {
    rep.energy_rate = std::numeric_limits<double>::quiet_NaN();
  }

  const double tol_E = 1e-12 * std::abs(traj.initial_energy());
  for (std::size_t k = 1; k < traj.samples.size(); ++k) {
    const double rise = traj.samples[k].energy - traj.samples[k - 1].energy;
    rep.worst_energy_rise = std::max(rep.worst_energy_rise, rise);
    if (rise > tol_E) rep.energy_monotone = false;
  }

  // Gronwall envelope ||tau(t)|| <= (1 + tol) ||tau(t_a)|| exp(-b_guaranteed (t - t_a))
  // over the fit window, checked when the limit is non-degenerate.
  if (!rep.degenerate) {
    double t_a = rep.fit_t_begin, y_a = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k)
      if (t[k] >= t_a) {
        t_a = t[k];
        y_a = tau[k];
        break;
      }
    double worst = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (t[k] < t_a || t[k] > rep.fit_t_end || y_a <= 0.0) continue;
      const double bound = y_a * std::exp(-rep.b_guaranteed * (t[k] - t_a));
      worst = std::max(worst, tau[k] / bound);
    }
    rep.envelope_margin = worst;
    rep.envelope_ok = worst <= 1.05;
  }

  // lambda_1 tail from gap tracking, where available inside the fit window.
  double tail_min = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < traj.lambda1.size(); ++k) {
    if (std::isnan(traj.lambda1[k])) continue;
    if (traj.samples[k].t < rep.fit_t_begin) continue;
    tail_min = std::min(tail_min, traj.lambda1[k]);
  }
  if (std::isfinite(tail_min)) rep.gap_tail_min = tail_min;

  if (rep.degenerate) {
    rep.verdict = "degenerate";
  } else {
    // verdict is the guaranteed spectral-gap bound only; monotonicity and the
    // Gronwall envelope are reported alongside
    const double tol_rate = rate_tol_rel * rep.b_guaranteed;
    const bool pass_tau = rep.b_fit >= rep.b_guaranteed - tol_rate;
    const bool pass_energy =
        std::isnan(rep.energy_rate) ||
        rep.energy_rate >= 2.0 * rep.b_guaranteed - tol_rate;
    rep.verdict = (pass_tau && pass_energy) ? "pass" : "fail";
  }
  return rep;
}

}  // namespace heatflow
