#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "heatflow/errors.hpp"

namespace heatflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class TargetKind { Euclidean, HyperbolicHalfSpace, FlatTorusChart };

/// A complete Riemannian target described in one global chart. All shipped
/// kinds have diagonal chart metrics; the half-space model carries constant
/// sectional curvature -curvature_scale, the flat kinds are curvature zero.
struct TargetManifold {
  TargetKind kind = TargetKind::Euclidean;
  int dim = 2;
  double curvature_scale = 1.0;  // kappa > 0, hyperbolic only
  double chart_guard = 1e-6;     // admissibility floor for the half-space height
  double torus_period = 2.0 * M_PI;

  static constexpr int kMaxDim = 8;

  static TargetManifold euclidean(int n) {
    TargetManifold t;
    t.kind = TargetKind::Euclidean;
    t.dim = check_dim(n);
    return t;
  }

  static TargetManifold hyperbolic_half_space(int n, double kappa,
                                              double guard = 1e-6) {
    if (kappa <= 0.0) throw ValidationError("curvature_scale", "must be > 0");
    TargetManifold t;
    t.kind = TargetKind::HyperbolicHalfSpace;
    t.dim = check_dim(n);
    t.curvature_scale = kappa;
    t.chart_guard = guard;
    return t;
  }

  static TargetManifold flat_torus(int n, double period = 2.0 * M_PI) {
    TargetManifold t;
    t.kind = TargetKind::FlatTorusChart;
    t.dim = check_dim(n);
    t.torus_period = period;
    return t;
  }

  static int check_dim(int n) {
    if (n < 1 || n > kMaxDim)
      throw ValidationError("dim", "chart dimension must lie in [1, 8]");
    return n;
  }

  bool flat() const { return kind != TargetKind::HyperbolicHalfSpace; }

  bool admissible(const Vec& y) const {
    if (y.size() != dim) return false;
    if (!y.allFinite()) return false;
    if (kind == TargetKind::HyperbolicHalfSpace)
      return y[dim - 1] >= chart_guard;
    return true;
  }

  void require_admissible(const Vec& y) const {
    if (!admissible(y))
      throw ChartViolation("chart point outside admissible region");
  }

  /// Principal-value representative of a chart-coordinate difference; the
  /// torus chart wraps with period torus_period, other charts do not.
  double wrap_delta(double d) const {
    if (kind != TargetKind::FlatTorusChart) return d;
    return d - torus_period * std::round(d / torus_period);
  }

  /// Componentwise wrapped difference to - from.
  Vec chart_delta(const Vec& from, const Vec& to) const {
    Vec d = to - from;
    if (kind == TargetKind::FlatTorusChart)
      for (int a = 0; a < d.size(); ++a) d[a] = wrap_delta(d[a]);
    return d;
  }
};

/// Diagonal of the chart metric h at y (all shipped metrics are diagonal).
inline Vec metric_diag_at(const TargetManifold& t, const Vec& y) {
  t.require_admissible(y);
  Vec d = Vec::Ones(t.dim);
  if (t.kind == TargetKind::HyperbolicHalfSpace) {
    const double yn = y[t.dim - 1];
    d *= 1.0 / (t.curvature_scale * yn * yn);
  }
  return d;
}

/// Full metric matrix h_{alpha beta}(y).
inline Mat metric_at(const TargetManifold& t, const Vec& y) {
  return metric_diag_at(t, y).asDiagonal();
}

/// Christoffel symbols: gamma-indexed list of symmetric matrices
/// G[gamma](alpha, beta).
inline std::vector<Mat> christoffels_at(const TargetManifold& t, const Vec& y) {
  t.require_admissible(y);
  const int n = t.dim;
  std::vector<Mat> G(n, Mat::Zero(n, n));
  if (t.kind == TargetKind::HyperbolicHalfSpace) {
    // Half-space model: Gamma^g_{ab} = -(d^g_a d_{bn} + d^g_b d_{an} - d_{ab} d_{gn}) / y_n.
    const double inv_y = 1.0 / y[n - 1];
    const int last = n - 1;
    for (int g = 0; g < n; ++g)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          double v = 0.0;
          if (g == a && b == last) v -= 1.0;
          if (g == b && a == last) v -= 1.0;
          if (a == b && g == last) v += 1.0;
          G[g](a, b) = v * inv_y;
        }
  }
  return G;
}

/// Chart derivatives of the Christoffel symbols:
/// dG[mu][gamma](alpha, beta) = d Gamma^gamma_{alpha beta} / d y^mu.
inline std::vector<std::vector<Mat>> christoffel_grad_at(const TargetManifold& t,
                                                         const Vec& y) {
  t.require_admissible(y);
  const int n = t.dim;
  std::vector<std::vector<Mat>> dG(n, std::vector<Mat>(n, Mat::Zero(n, n)));
  if (t.kind == TargetKind::HyperbolicHalfSpace) {
    // Only the last coordinate enters; d(1/y)/dy = -1/y^2 flips the sign.
    const int last = n - 1;
    const double inv_y2 = 1.0 / (y[last] * y[last]);
    for (int g = 0; g < n; ++g)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          double v = 0.0;
          if (g == a && b == last) v += 1.0;
          if (g == b && a == last) v += 1.0;
          if (a == b && g == last) v -= 1.0;
          dG[last][g](a, b) = v * inv_y2;
        }
  }
  return dG;
}

/// Christoffel contraction Gamma^g_{ab} d^a d^b as a closed form, written on
/// raw buffers for the flow's inner loops (no allocation). `out` may not
/// alias `d`.
inline void christoffel_quadratic(const TargetManifold& t, const double* y,
                                  const double* d, double* out) {
  const int n = t.dim;
  if (t.kind != TargetKind::HyperbolicHalfSpace) {
    for (int a = 0; a < n; ++a) out[a] = 0.0;
    return;
  }
  const double inv_y = 1.0 / y[n - 1];
  double dd = 0.0;
  for (int a = 0; a < n; ++a) dd += d[a] * d[a];
  const double dn = d[n - 1];
  for (int a = 0; a < n - 1; ++a) out[a] = -2.0 * d[a] * dn * inv_y;
  out[n - 1] = (dd - 2.0 * dn * dn) * inv_y;
}

/// Scalar factor of the (conformal) chart metric: h_{ab} = factor * delta_ab.
inline double metric_factor(const TargetManifold& t, const double* y) {
  if (t.kind != TargetKind::HyperbolicHalfSpace) return 1.0;
  const double yn = y[t.dim - 1];
  return 1.0 / (t.curvature_scale * yn * yn);
}

/// Riemann tensor coefficients with the convention
/// R(X,Y)Z = \nabla_X \nabla_Y Z - \nabla_Y \nabla_X Z - \nabla_{[X,Y]} Z,
/// stored as R[delta](alpha, beta, gamma) via coeff(delta, alpha, beta, gamma):
/// (R(X,Y)Z)^delta = coeff * X^alpha Y^beta Z^gamma.
struct CurvatureTensor {
  int n = 0;
  std::vector<double> a;  // n^4 entries
  double operator()(int d, int al, int be, int ga) const {
    return a[((d * n + al) * n + be) * n + ga];
  }
  double& at(int d, int al, int be, int ga) {
    return a[((d * n + al) * n + be) * n + ga];
  }
};

inline CurvatureTensor curvature_at(const TargetManifold& t, const Vec& y) {
  t.require_admissible(y);
  const int n = t.dim;
  CurvatureTensor R;
  R.n = n;
  R.a.assign(static_cast<std::size_t>(n) * n * n * n, 0.0);
  if (t.kind == TargetKind::HyperbolicHalfSpace) {
    // Constant curvature c = -kappa: R(X,Y)Z = c (h(Y,Z) X - h(X,Z) Y).
    const double c = -t.curvature_scale;
    const Vec h = metric_diag_at(t, y);
    for (int d = 0; d < n; ++d)
      for (int al = 0; al < n; ++al)
        for (int be = 0; be < n; ++be)
          for (int ga = 0; ga < n; ++ga) {
            double v = 0.0;
            if (d == al && be == ga) v += c * h[be];
            if (d == be && al == ga) v -= c * h[al];
            R.at(d, al, be, ga) = v;
          }
  }
  return R;
}

/// R(s, w)w evaluated from the constant-curvature closed form.
inline Vec riemann_apply(const TargetManifold& t, const Vec& y, const Vec& s,
                         const Vec& w) {
  t.require_admissible(y);
  if (t.flat()) return Vec::Zero(t.dim);
  const Vec h = metric_diag_at(t, y);
  const double ww = w.dot(h.cwiseProduct(w));
  const double sw = s.dot(h.cwiseProduct(w));
  return -t.curvature_scale * (ww * s - sw * w);
}

/// Sectional curvature of the plane spanned by s, w.
inline double sectional_curvature(const TargetManifold& t, const Vec& y,
                                  const Vec& s, const Vec& w) {
  const Vec h = metric_diag_at(t, y);
  const Vec rsw = riemann_apply(t, y, s, w);
  const double num = rsw.dot(h.cwiseProduct(s));
  const double ss = s.dot(h.cwiseProduct(s));
  const double ww = w.dot(h.cwiseProduct(w));
  const double sw = s.dot(h.cwiseProduct(w));
  const double den = ss * ww - sw * sw;
  if (den <= 0.0) throw HeatflowError("degenerate plane for sectional curvature");
  return num / den;
}

/// Geodesic point gamma(t) with gamma(0) = y, gamma'(0) = v, where gamma
/// solves the affine geodesic equation of the chart connection. Closed forms:
/// straight lines for the flat kinds, vertical rays and semicircles for the
/// half-space model (the geodesic equation does not see the constant metric
/// scale, so the formulas are independent of curvature_scale).
namespace detail {

/// Allocation-free geodesic step on the half-space chart (raw buffers).
///
/// With nu = |v| (chart norm), s = nu * time / y_n(0) and
/// denom = ((nu - b) e^s + (nu + b) e^{-s}) / 2, the geodesic is
///   x(t) = x(0) + v_h * y_n(0) * sinh(s) / denom,
///   y_n(t) = y_n(0) * nu / denom.
/// This covers vertical rays and semicircles in one cancellation-free
/// expression (both denominator terms are non-negative), so the step stays
/// accurate to a few ulps even for nearly vertical or tiny velocities.
inline void exp_map_halfspace(const TargetManifold& t, const double* y,
                              const double* v, double time, double* out) {
  const int n = t.dim;
  const double y0 = y[n - 1];
  double a2 = 0.0;
  for (int i = 0; i < n - 1; ++i) a2 += v[i] * v[i];
  const double b = v[n - 1];
  const double nu = std::sqrt(a2 + b * b);
  if (nu == 0.0) {
    for (int i = 0; i < n; ++i) out[i] = y[i];
    return;
  }
  const double s = nu * time / y0;
  if (std::abs(s) > 700.0)
    throw ChartViolation("geodesic step exceeds representable range");
  const double ep = std::exp(s), em = std::exp(-s);
  const double denom = 0.5 * ((nu - b) * ep + (nu + b) * em);
  const double sinh_s = 0.5 * (ep - em);
  const double scale = y0 * sinh_s / denom;
  for (int i = 0; i < n - 1; ++i) out[i] = y[i] + scale * v[i];
  out[n - 1] = y0 * nu / denom;
  if (!(out[n - 1] >= t.chart_guard) || !std::isfinite(out[n - 1]))
    throw ChartViolation("geodesic exits admissible chart region");
}

}  // namespace detail

inline Vec exp_map(const TargetManifold& t, const Vec& y, const Vec& v,
                   double time) {
  t.require_admissible(y);
  if (v.size() != t.dim) throw ShapeMismatch("velocity dimension mismatch");
  if (t.flat()) return y + time * v;
  Vec out(t.dim);
  detail::exp_map_halfspace(t, y.data(), v.data(), time, out.data());
  return out;
}

/// Riemannian distance between chart points.
inline double distance(const TargetManifold& t, const Vec& y, const Vec& z) {
  t.require_admissible(y);
  t.require_admissible(z);
  switch (t.kind) {
    case TargetKind::Euclidean:
      return (z - y).norm();
    case TargetKind::FlatTorusChart:
      return t.chart_delta(y, z).norm();
    case TargetKind::HyperbolicHalfSpace: {
      const int n = t.dim;
      const double q = (z - y).squaredNorm() / (2.0 * y[n - 1] * z[n - 1]);
      return std::acosh(1.0 + q) / std::sqrt(t.curvature_scale);
    }
  }
  return 0.0;
}

inline std::string target_kind_name(TargetKind k) {
  switch (k) {
    case TargetKind::Euclidean: return "euclidean";
    case TargetKind::HyperbolicHalfSpace: return "hyperbolic_half_space";
    case TargetKind::FlatTorusChart: return "flat_torus";
  }
  return "?";
}

}  // namespace heatflow
