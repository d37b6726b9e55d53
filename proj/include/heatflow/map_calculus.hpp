#pragma once

#include <cmath>
#include <memory>
#include <utility>

#include <Eigen/Dense>

#include "heatflow/domain_grid.hpp"
#include "heatflow/errors.hpp"
#include "heatflow/target_geometry.hpp"

namespace heatflow {

/// Chart coordinates of a map f : M -> N sampled at grid nodes.
///
/// values(j, a) is component a of f at node j. On periodic grids into
/// non-periodic charts the sampled values must close up across the seam;
/// construction rejects maps whose seam jump is far out of scale with the
/// interior node-to-node steps (e.g. a winding loop into a Euclidean chart).
struct DiscreteMap {
  DomainGrid grid;
  TargetManifold target;
  Eigen::MatrixXd values;

  DiscreteMap(DomainGrid g, TargetManifold t, Eigen::MatrixXd v)
      : grid(std::move(g)), target(std::move(t)), values(std::move(v)) {
    if (values.rows() != grid.node_count() || values.cols() != target.dim)
      throw ShapeMismatch("map values do not match grid/target dimensions");
    if (!values.allFinite())
      throw ChartViolation("map value outside admissible chart region");
    if (target.kind == TargetKind::HyperbolicHalfSpace &&
        values.col(target.dim - 1).minCoeff() < target.chart_guard)
      throw ChartViolation("map value outside admissible chart region");
    if (grid.periodic() && target.kind != TargetKind::FlatTorusChart)
      check_seam_continuity();
  }

  Vec value_at(int node) const { return values.row(node).transpose(); }

 private:
  void check_seam_continuity() const {
    for (int axis = 0; axis < grid.ndim; ++axis) {
      const int N = grid.nodes[axis];
      double max_interior = 0.0, seam = 0.0;
      for (int j = 0; j < grid.node_count(); ++j) {
        const auto mi = grid.multi_index(j);
        const int jp = grid.neighbor(j, axis, 1);
        const double step = (values.row(jp) - values.row(j)).norm();
        if (mi[axis] == N - 1)
          seam = std::max(seam, step);
        else
          max_interior = std::max(max_interior, step);
      }
      const double floor = 1e-9 * (1.0 + values.cwiseAbs().maxCoeff());
      if (seam > 8.0 * max_interior + floor)
        throw ValidationError("values",
                              "map does not close up across the periodic seam");
    }
  }
};

/// Discretized section of f*TN: one coefficient vector per node, expressed
/// in the chart coordinate frame at f(x). Vanishes on Dirichlet boundary
/// nodes by construction.
struct Section {
  std::shared_ptr<const DiscreteMap> base;
  Eigen::VectorXd coeffs;  // stacked node-major: coeffs[node * n + a]

  Section(std::shared_ptr<const DiscreteMap> b, Eigen::VectorXd c)
      : base(std::move(b)), coeffs(std::move(c)) {
    const int n = base->target.dim;
    if (coeffs.size() != static_cast<long>(base->grid.node_count()) * n)
      throw ShapeMismatch("section coefficients do not match base map");
    for (int j = 0; j < base->grid.node_count(); ++j)
      if (base->grid.boundary(j)) coeffs.segment(j * n, n).setZero();
  }

  Vec at(int node) const {
    const int n = base->target.dim;
    return coeffs.segment(node * n, n);
  }
};

namespace detail {

/// Wrapped componentwise step value v[nb][a] - v[node][a], oriented so the
/// result is a forward (dir > 0) or backward (dir < 0) difference numerator.
inline double map_step1(const TargetManifold& t, const Eigen::MatrixXd& v,
                        int node, int nb, int a, int dir) {
  const double d = t.wrap_delta(v(nb, a) - v(node, a));
  return dir > 0 ? d : -d;
}

}  // namespace detail

/// d f / d x_axis at every node: central differences built from wrapped
/// neighbor steps, one-sided second-order stencils at Dirichlet boundaries.
/// The raw overload evaluates unvalidated value matrices (integrator stages).
inline Eigen::MatrixXd map_partial(const DomainGrid& g, const TargetManifold& t,
                                   const Eigen::MatrixXd& v, int axis) {
  const double h = g.spacing(axis);
  const int N = g.node_count();
  const int n = t.dim;
  Eigen::MatrixXd out(N, n);
  for (int j = 0; j < N; ++j) {
    const int jp = g.neighbor(j, axis, 1);
    const int jm = g.neighbor(j, axis, -1);
    if (jp >= 0 && jm >= 0) {
      for (int a = 0; a < n; ++a)
        out(j, a) = (detail::map_step1(t, v, j, jp, a, 1) +
                     detail::map_step1(t, v, j, jm, a, -1)) /
                    (2.0 * h);
    } else {
      // one-sided steps already carry derivative orientation
      const int dir = (jm < 0) ? 1 : -1;
      const int j1 = g.neighbor(j, axis, dir);
      const int j2 = g.neighbor(j1, axis, dir);
      for (int a = 0; a < n; ++a) {
        const double d1 = detail::map_step1(t, v, j, j1, a, dir);
        const double d2 = d1 + detail::map_step1(t, v, j1, j2, a, dir);
        out(j, a) = (4.0 * d1 - d2) / (2.0 * h);
      }
    }
  }
  return out;
}

inline Eigen::MatrixXd map_partial(const DiscreteMap& f, int axis) {
  return map_partial(f.grid, f.target, f.values, axis);
}

/// d^2 f / d x_axis^2 at every node (3-point stencil from wrapped steps).
inline Eigen::MatrixXd map_second(const DomainGrid& g, const TargetManifold& t,
                                  const Eigen::MatrixXd& v, int axis) {
  const double h = g.spacing(axis);
  const int N = g.node_count();
  const int n = t.dim;
  Eigen::MatrixXd out(N, n);
  for (int j = 0; j < N; ++j) {
    const int jp = g.neighbor(j, axis, 1);
    const int jm = g.neighbor(j, axis, -1);
    if (jp >= 0 && jm >= 0) {
      for (int a = 0; a < n; ++a)
        out(j, a) = (detail::map_step1(t, v, j, jp, a, 1) -
                     detail::map_step1(t, v, j, jm, a, -1)) /
                    (h * h);
    } else {
      const int dir = (jm < 0) ? 1 : -1;
      const int j1 = g.neighbor(j, axis, dir);
      const int j2 = g.neighbor(j1, axis, dir);
      const int j3 = g.neighbor(j2, axis, dir);
      for (int a = 0; a < n; ++a) {
        const double d1 = detail::map_step1(t, v, j, j1, a, dir);
        const double d2 = detail::map_step1(t, v, j1, j2, a, dir);
        const double d3 = detail::map_step1(t, v, j2, j3, a, dir);
        out(j, a) = dir * (-2.0 * d1 + 3.0 * d2 - d3) / (h * h);
      }
    }
  }
  return out;
}

inline Eigen::MatrixXd map_second(const DiscreteMap& f, int axis) {
  return map_second(f.grid, f.target, f.values, axis);
}

/// Tension field values tau^g = g^{ii} (d^2_ii f^g + Gamma^g_{ab}(f) d_i f^a d_i f^b)
/// at interior nodes; zero on Dirichlet boundary nodes.
inline Eigen::MatrixXd tension_values(const DomainGrid& g,
                                      const TargetManifold& t,
                                      const Eigen::MatrixXd& v) {
  const int N = g.node_count();
  const int n = t.dim;
  Eigen::MatrixXd tau = Eigen::MatrixXd::Zero(N, n);
  const bool flat = t.flat();
  std::vector<Eigen::MatrixXd> df(flat ? 0 : g.ndim);
  double ybuf[8], dbuf[8], qbuf[8];
  for (int i = 0; i < g.ndim; ++i) {
    if (!flat) df[i] = map_partial(g, t, v, i);
    const Eigen::MatrixXd d2f = map_second(g, t, v, i);
    const double gi = g.inv_metric[i];
    for (int j = 0; j < N; ++j) {
      if (g.boundary(j)) continue;
      for (int a = 0; a < n; ++a) tau(j, a) += gi * d2f(j, a);
      if (!flat) {
        for (int a = 0; a < n; ++a) {
          ybuf[a] = v(j, a);
          dbuf[a] = df[i](j, a);
        }
        christoffel_quadratic(t, ybuf, dbuf, qbuf);
        for (int a = 0; a < n; ++a) tau(j, a) += gi * qbuf[a];
      }
    }
  }
  return tau;
}

inline Eigen::MatrixXd tension_values(const DiscreteMap& f) {
  return tension_values(f.grid, f.target, f.values);
}

inline Eigen::VectorXd stack_rows(const Eigen::MatrixXd& m) {
  Eigen::VectorXd v(m.size());
  for (int j = 0; j < m.rows(); ++j)
    v.segment(j * m.cols(), m.cols()) = m.row(j).transpose();
  return v;
}

inline Eigen::MatrixXd unstack_rows(const Eigen::VectorXd& v, int cols) {
  Eigen::MatrixXd m(v.size() / cols, cols);
  for (int j = 0; j < m.rows(); ++j)
    m.row(j) = v.segment(j * cols, cols).transpose();
  return m;
}

/// Tension field as a Section over f.
inline Section tension(const std::shared_ptr<const DiscreteMap>& f) {
  return Section(f, stack_rows(tension_values(*f)));
}

/// Dirichlet energy via the weighted node-sum quadrature.
inline double energy(const DiscreteMap& f) {
  const DomainGrid& g = f.grid;
  const int n = f.target.dim;
  double E = 0.0;
  std::vector<Eigen::MatrixXd> df(g.ndim);
  for (int i = 0; i < g.ndim; ++i) df[i] = map_partial(f, i);
  double ybuf[8];
  for (int j = 0; j < g.node_count(); ++j) {
    const double w = g.weight(j);
    if (w == 0.0) continue;
    for (int a = 0; a < n; ++a) ybuf[a] = f.values(j, a);
    const double hfac = metric_factor(f.target, ybuf);
    double dens = 0.0;
    for (int i = 0; i < g.ndim; ++i) {
      double dd = 0.0;
      for (int a = 0; a < n; ++a) dd += df[i](j, a) * df[i](j, a);
      dens += g.inv_metric[i] * hfac * dd;
    }
    E += 0.5 * w * dens;
  }
  return E;
}

/// L^2 inner product of sections over the same base map.
inline double l2_inner(const Section& s, const Section& sp) {
  if (s.base != sp.base) throw BaseMismatch("sections over different base maps");
  const DiscreteMap& f = *s.base;
  double acc = 0.0;
  for (int j = 0; j < f.grid.node_count(); ++j) {
    const double w = f.grid.weight(j);
    if (w == 0.0) continue;
    const Vec h = metric_diag_at(f.target, f.value_at(j));
    acc += w * s.at(j).dot(h.cwiseProduct(sp.at(j)));
  }
  return acc;
}

inline double l2_norm(const Section& s) { return std::sqrt(l2_inner(s, s)); }

/// ||tau(f)||_{L^2} without materializing a Section.
inline double tension_l2(const DiscreteMap& f) {
  const Eigen::MatrixXd tau = tension_values(f);
  const int n = f.target.dim;
  double acc = 0.0;
  double ybuf[8];
  for (int j = 0; j < f.grid.node_count(); ++j) {
    const double w = f.grid.weight(j);
    if (w == 0.0) continue;
    for (int a = 0; a < n; ++a) ybuf[a] = f.values(j, a);
    const double hfac = metric_factor(f.target, ybuf);
    double tt = 0.0;
    for (int a = 0; a < n; ++a) tt += tau(j, a) * tau(j, a);
    acc += w * hfac * tt;
  }
  return std::sqrt(acc);
}

}  // namespace heatflow
