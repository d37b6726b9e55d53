#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "heatflow/errors.hpp"

namespace heatflow {

enum class GridKind { Circle, Torus2, Interval, Rectangle };

/// Uniform discretization of a compact flat domain. Periodic kinds close up,
/// Dirichlet kinds carry fixed boundary nodes with zero quadrature weight.
struct DomainGrid {
  GridKind kind = GridKind::Circle;
  int ndim = 1;
  std::array<double, 2> length{2.0 * M_PI, 0.0};
  std::array<int, 2> nodes{64, 0};
  std::array<double, 2> inv_metric{1.0, 1.0};  // constant diagonal g^{ii}

  static DomainGrid circle(double L, int N) {
    DomainGrid g;
    g.kind = GridKind::Circle;
    g.ndim = 1;
    g.length = {L, 0.0};
    g.nodes = {N, 0};
    g.check();
    return g;
  }

  static DomainGrid torus2(double L1, double L2, int N1, int N2) {
    DomainGrid g;
    g.kind = GridKind::Torus2;
    g.ndim = 2;
    g.length = {L1, L2};
    g.nodes = {N1, N2};
    g.check();
    return g;
  }

  static DomainGrid interval(double L, int N) {
    DomainGrid g;
    g.kind = GridKind::Interval;
    g.ndim = 1;
    g.length = {L, 0.0};
    g.nodes = {N, 0};
    g.check();
    return g;
  }

  static DomainGrid rectangle(double L1, double L2, int N1, int N2) {
    DomainGrid g;
    g.kind = GridKind::Rectangle;
    g.ndim = 2;
    g.length = {L1, L2};
    g.nodes = {N1, N2};
    g.check();
    return g;
  }

  void check() const {
    for (int i = 0; i < ndim; ++i) {
      if (length[i] <= 0.0) throw ValidationError("length", "must be > 0");
      if (nodes[i] < (periodic() ? 3 : 4))
        throw ValidationError("nodes", "grid too small");
      if (inv_metric[i] <= 0.0)
        throw ValidationError("inverse_metric", "must be > 0");
    }
  }

  bool periodic() const {
    return kind == GridKind::Circle || kind == GridKind::Torus2;
  }

  double spacing(int axis) const {
    return periodic() ? length[axis] / nodes[axis]
                      : length[axis] / (nodes[axis] - 1);
  }

  double min_spacing() const {
    double h = spacing(0);
    for (int i = 1; i < ndim; ++i) h = std::min(h, spacing(i));
    return h;
  }

  int node_count() const {
    int c = 1;
    for (int i = 0; i < ndim; ++i) c *= nodes[i];
    return c;
  }

  int index(int i0, int i1 = 0) const { return i0 + nodes[0] * i1; }

  std::array<int, 2> multi_index(int node) const {
    return {node % nodes[0], ndim == 2 ? node / nodes[0] : 0};
  }

  Eigen::VectorXd coords(int node) const {
    const auto mi = multi_index(node);
    Eigen::VectorXd x(ndim);
    for (int i = 0; i < ndim; ++i) x[i] = mi[i] * spacing(i);
    return x;
  }

  bool boundary(int node) const {
    if (periodic()) return false;
    const auto mi = multi_index(node);
    for (int i = 0; i < ndim; ++i)
      if (mi[i] == 0 || mi[i] == nodes[i] - 1) return true;
    return false;
  }

  double cell_volume() const {
    double v = 1.0;
    for (int i = 0; i < ndim; ++i) v *= spacing(i);
    return v;
  }

  double weight(int node) const { return boundary(node) ? 0.0 : cell_volume(); }

  double total_volume() const {
    double v = 0.0;
    const int N = node_count();
    for (int j = 0; j < N; ++j) v += weight(j);
    return v;
  }

  /// Index of the neighbor `steps` nodes along `axis`; -1 past a Dirichlet
  /// boundary.
  int neighbor(int node, int axis, int steps) const {
    auto mi = multi_index(node);
    int i = mi[axis] + steps;
    if (periodic()) {
      const int N = nodes[axis];
      i = ((i % N) + N) % N;
    } else if (i < 0 || i >= nodes[axis]) {
      return -1;
    }
    mi[axis] = i;
    return index(mi[0], mi[1]);
  }
};

namespace detail {
inline void check_field(const DomainGrid& g, const Eigen::VectorXd& f) {
  if (f.size() != g.node_count())
    throw ShapeMismatch("field length does not match grid");
}
}  // namespace detail

/// Central first difference along an axis; periodic wraparound, one-sided
/// second-order stencils at Dirichlet boundary nodes.
inline Eigen::VectorXd first_diff(const DomainGrid& g, const Eigen::VectorXd& f,
                                  int axis) {
  detail::check_field(g, f);
  const double h = g.spacing(axis);
  const int N = g.node_count();
  Eigen::VectorXd out(N);
  for (int j = 0; j < N; ++j) {
    const int jp = g.neighbor(j, axis, 1);
    const int jm = g.neighbor(j, axis, -1);
    if (jp >= 0 && jm >= 0) {
      out[j] = (f[jp] - f[jm]) / (2.0 * h);
    } else if (jm < 0) {
      const int j1 = g.neighbor(j, axis, 1);
      const int j2 = g.neighbor(j, axis, 2);
      out[j] = (-3.0 * f[j] + 4.0 * f[j1] - f[j2]) / (2.0 * h);
    } else {
      const int j1 = g.neighbor(j, axis, -1);
      const int j2 = g.neighbor(j, axis, -2);
      out[j] = (3.0 * f[j] - 4.0 * f[j1] + f[j2]) / (2.0 * h);
    }
  }
  return out;
}

/// Second difference: 3-point stencil on the diagonal, nested central
/// differences for mixed axes, one-sided at Dirichlet boundary nodes.
inline Eigen::VectorXd second_diff(const DomainGrid& g, const Eigen::VectorXd& f,
                                   int axis_i, int axis_j) {
  detail::check_field(g, f);
  if (axis_i != axis_j) return first_diff(g, first_diff(g, f, axis_j), axis_i);
  const double h = g.spacing(axis_i);
  const int N = g.node_count();
  Eigen::VectorXd out(N);
  for (int j = 0; j < N; ++j) {
    const int jp = g.neighbor(j, axis_i, 1);
    const int jm = g.neighbor(j, axis_i, -1);
    if (jp >= 0 && jm >= 0) {
      out[j] = (f[jp] - 2.0 * f[j] + f[jm]) / (h * h);
    } else {
      const int dir = (jm < 0) ? 1 : -1;
      const int j1 = g.neighbor(j, axis_i, dir);
      const int j2 = g.neighbor(j, axis_i, 2 * dir);
      const int j3 = g.neighbor(j, axis_i, 3 * dir);
      out[j] = (2.0 * f[j] - 5.0 * f[j1] + 4.0 * f[j2] - f[j3]) / (h * h);
    }
  }
  return out;
}

/// k smallest eigenvalues of the scalar grid Laplacian -g^{ii} d^2/dx_i^2,
/// from the closed-form per-axis spectra.
inline std::vector<double> domain_laplacian_eigs(const DomainGrid& g, int k) {
  if (k < 1 || k > g.node_count())
    throw ValidationError("k", "eigenvalue count out of range");
  std::vector<std::vector<double>> axis_eigs(g.ndim);
  for (int i = 0; i < g.ndim; ++i) {
    const double h = g.spacing(i);
    const int N = g.nodes[i];
    std::vector<double>& mu = axis_eigs[i];
    if (g.periodic()) {
      for (int m = 0; m < N; ++m) {
        const double s = std::sin(M_PI * m / N);
        mu.push_back(g.inv_metric[i] * 4.0 / (h * h) * s * s);
      }
    } else {
      for (int m = 1; m <= N - 2; ++m) {
        const double s = std::sin(M_PI * m / (2.0 * (N - 1)));
        mu.push_back(g.inv_metric[i] * 4.0 / (h * h) * s * s);
      }
    }
  }
  std::vector<double> all;
  if (g.ndim == 1) {
    all = axis_eigs[0];
  } else {
    all.reserve(axis_eigs[0].size() * axis_eigs[1].size());
    for (double a : axis_eigs[0])
      for (double b : axis_eigs[1]) all.push_back(a + b);
  }
  std::sort(all.begin(), all.end());
  if (static_cast<std::size_t>(k) > all.size())
    throw ValidationError("k", "more eigenvalues than interior modes");
  all.resize(k);
  return all;
}

inline std::string grid_kind_name(GridKind k) {
  switch (k) {
    case GridKind::Circle: return "circle";
    case GridKind::Torus2: return "torus2";
    case GridKind::Interval: return "interval";
    case GridKind::Rectangle: return "rectangle";
  }
  return "?";
}

}  // namespace heatflow
