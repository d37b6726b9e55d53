#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "heatflow/map_calculus.hpp"
#include "heatflow/rng.hpp"

namespace heatflow {

using SparseMat = Eigen::SparseMatrix<double>;

/// Pointwise coefficient fields of the Jacobi operator written as a general
/// second-order system A d^2 s + B d s + C s (diagonal domain metric, so only
/// the principal axis blocks A^{ii} = -g^{ii} I are nonzero).
struct CoefficientFields {
  int target_dim = 0;
  std::vector<double> principal;             // per axis: A^{ii} scalar = -g^{ii}
  std::vector<std::vector<Mat>> first_order; // [axis][node]: B^{i}(x), n x n
  std::vector<Mat> zeroth_order;             // [node]: C(x), n x n
  std::vector<Mat> curvature_potential;      // [node]: -tr_g R(., df)df block
};

/// Sparse realization of the Jacobi operator of a map: strong form K_strong,
/// weak form Q (exactly symmetric), and mass matrix M (block diagonal
/// h(f(x)) * weight(x)). All matrices act on interior degrees of freedom,
/// stacked node-major with n components per node.
struct JacobiSystem {
  std::shared_ptr<const DiscreteMap> base;
  int target_dim = 0;
  std::vector<int> interior_nodes;       // interior index -> grid node
  std::vector<int> interior_of_node;     // grid node -> interior index or -1
  Eigen::VectorXd frame_scale;           // per DOF: sqrt(h_aa(f(x)))
  Eigen::VectorXd weight;                // per DOF: grid weight of the node
  SparseMat Q;        // weak form, chart frame
  SparseMat K_strong; // strong form, chart frame
  Eigen::VectorXd M_diag;  // mass matrix diagonal, chart frame
  SparseMat Q_hat;    // weak form in the orthonormalized fiber frame
  double q_scale = 0.0;    // mean |diag Q|, reference scale for thresholds

  int dofs() const { return static_cast<int>(interior_nodes.size()) * target_dim; }

  /// Restrict a full stacked section to interior DOFs.
  Eigen::VectorXd restrict_full(const Eigen::VectorXd& full) const {
    Eigen::VectorXd out(dofs());
    const int n = target_dim;
    for (std::size_t k = 0; k < interior_nodes.size(); ++k)
      out.segment(k * n, n) = full.segment(interior_nodes[k] * n, n);
    return out;
  }

  /// Extend interior DOFs to a full stacked section (zero on the boundary).
  Eigen::VectorXd extend_interior(const Eigen::VectorXd& v) const {
    Eigen::VectorXd full =
        Eigen::VectorXd::Zero(static_cast<long>(base->grid.node_count()) * target_dim);
    const int n = target_dim;
    for (std::size_t k = 0; k < interior_nodes.size(); ++k)
      full.segment(interior_nodes[k] * n, n) = v.segment(k * n, n);
    return full;
  }
};

namespace detail {

/// Per-edge discrete connection data for one axis.
struct EdgeData {
  int a = -1, b = -1;   // endpoint grid nodes
  Mat p_hat;            // skew connection coefficient in the orthonormal frame
};

inline Vec frame_scale_at(const TargetManifold& t, const Vec& y) {
  return metric_diag_at(t, y).cwiseSqrt();
}

/// Edge connection: chart Christoffels contracted with the edge-centered map
/// derivative, transported to the per-node orthonormal frame and
/// skew-symmetrized (discrete metric compatibility made exact).
inline Mat edge_connection(const DiscreteMap& f, int a, int b, double h) {
  const int n = f.target.dim;
  if (f.target.flat()) return Mat::Zero(n, n);
  const Vec ya = f.value_at(a);
  const Vec yb = f.value_at(b);
  const Vec delta = f.target.chart_delta(ya, yb);
  const Vec df = delta / h;
  const Vec ymid = ya + 0.5 * delta;
  const auto G = christoffels_at(f.target, ymid);
  Mat P(n, n);
  for (int g = 0; g < n; ++g)
    for (int al = 0; al < n; ++al) P(g, al) = G[g].row(al).dot(df);
  const Vec ra = frame_scale_at(f.target, ya);
  const Vec rb = frame_scale_at(f.target, yb);
  const Vec rm = 0.5 * (ra + rb);
  Mat Phat(n, n);
  for (int g = 0; g < n; ++g)
    for (int al = 0; al < n; ++al) {
      double v = rm[g] * P(g, al) / rm[al];
      if (g == al) v += rm[al] * (1.0 / rb[al] - 1.0 / ra[al]) / h;
      Phat(g, al) = v;
    }
  return 0.5 * (Phat - Phat.transpose());
}

/// Diagonal-scaled copy of a symmetric sparse matrix: out_ij = a_ij * s_i * t_j
/// with the products formed so that exact symmetry is preserved when s == t.
inline SparseMat scale_sparse(const SparseMat& A, const Eigen::VectorXd& s,
                              const Eigen::VectorXd& t) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(A.nonZeros());
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMat::InnerIterator it(A, k); it; ++it)
      trip.emplace_back(it.row(), it.col(), it.value() * (s[it.row()] * t[it.col()]));
  SparseMat out(A.rows(), A.cols());
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

}  // namespace detail

/// Textbook-form coefficient fields of the Jacobi operator at interior nodes,
/// from the closed-form chart geometry and the discrete map derivatives.
inline CoefficientFields assemble_coefficients(const DiscreteMap& f) {
  const DomainGrid& g = f.grid;
  const TargetManifold& T = f.target;
  const int n = T.dim;
  const int N = g.node_count();

  CoefficientFields cf;
  cf.target_dim = n;
  cf.principal.resize(g.ndim);
  for (int i = 0; i < g.ndim; ++i) cf.principal[i] = -g.inv_metric[i];
  cf.first_order.assign(g.ndim, std::vector<Mat>(N, Mat::Zero(n, n)));
  cf.zeroth_order.assign(N, Mat::Zero(n, n));
  cf.curvature_potential.assign(N, Mat::Zero(n, n));

  std::vector<Eigen::MatrixXd> df(g.ndim), d2f(g.ndim);
  for (int i = 0; i < g.ndim; ++i) {
    df[i] = map_partial(f, i);
    d2f[i] = map_second(f, i);
  }

  for (int x = 0; x < N; ++x) {
    if (g.boundary(x)) continue;
    const Vec y = f.value_at(x);
    const auto G = T.flat() ? std::vector<Mat>() : christoffels_at(T, y);
    const auto dG = T.flat() ? std::vector<std::vector<Mat>>()
                             : christoffel_grad_at(T, y);
    for (int i = 0; i < g.ndim; ++i) {
      const Vec d = df[i].row(x).transpose();
      const Vec d2 = d2f[i].row(x).transpose();
      Mat P = Mat::Zero(n, n);
      if (!T.flat())
        for (int ga = 0; ga < n; ++ga)
          for (int al = 0; al < n; ++al) P(ga, al) = G[ga].row(al).dot(d);
      cf.first_order[i][x] = -2.0 * g.inv_metric[i] * P;

      Mat dP = Mat::Zero(n, n);  // d_i of Gamma(f) df_i, chain rule + map curvature
      if (!T.flat())
        for (int ga = 0; ga < n; ++ga)
          for (int al = 0; al < n; ++al) {
            double v = G[ga].row(al).dot(d2);
            for (int mu = 0; mu < n; ++mu)
              v += d[mu] * dG[mu][ga].row(al).dot(d);
            dP(ga, al) = v;
          }

      Mat Rterm = Mat::Zero(n, n);
      if (!T.flat())
        for (int al = 0; al < n; ++al)
          Rterm.col(al) = riemann_apply(T, y, Vec::Unit(n, al), d);

      cf.zeroth_order[x] -= g.inv_metric[i] * (dP + P * P + Rterm);
      cf.curvature_potential[x] -= g.inv_metric[i] * Rterm;
    }
  }
  return cf;
}

/// Assemble the Jacobi system of a map. The weak form is built from the
/// second-variation integrand with edge-staggered covariant differences; the
/// strong form is built by the covariant divergence stencil over the same
/// edge data, so the two assemblies satisfy Q = M K_strong up to roundoff at
/// harmonic maps (and the weak form is exactly symmetric by construction).
inline JacobiSystem assemble_system(std::shared_ptr<const DiscreteMap> fp) {
  const DiscreteMap& f = *fp;
  const DomainGrid& g = f.grid;
  const TargetManifold& T = f.target;
  const int n = T.dim;
  const int N = g.node_count();

  JacobiSystem sys;
  sys.base = fp;
  sys.target_dim = n;
  sys.interior_of_node.assign(N, -1);
  for (int j = 0; j < N; ++j)
    if (!g.boundary(j)) {
      sys.interior_of_node[j] = static_cast<int>(sys.interior_nodes.size());
      sys.interior_nodes.push_back(j);
    }
  const int ni = static_cast<int>(sys.interior_nodes.size());
  const int m = ni * n;

  sys.frame_scale.resize(m);
  sys.weight.resize(m);
  for (int k = 0; k < ni; ++k) {
    const int node = sys.interior_nodes[k];
    const Vec r = detail::frame_scale_at(T, f.value_at(node));
    for (int a = 0; a < n; ++a) {
      sys.frame_scale[k * n + a] = r[a];
      sys.weight[k * n + a] = g.weight(node);
    }
  }

  const double vol = g.cell_volume();

  // Edge sweep: collect the skew connection per edge, accumulate the weak
  // form as sum_e w_e |D s|_e^2 and the strong form by the divergence stencil.
  std::vector<std::vector<detail::EdgeData>> edges(g.ndim);
  for (int axis = 0; axis < g.ndim; ++axis) {
    const double h = g.spacing(axis);
    for (int a_node = 0; a_node < N; ++a_node) {
      const int b_node = g.neighbor(a_node, axis, 1);
      if (b_node < 0) continue;
      detail::EdgeData e;
      e.a = a_node;
      e.b = b_node;
      e.p_hat = detail::edge_connection(f, a_node, b_node, h);
      edges[axis].push_back(std::move(e));
    }
  }

  // Curvature blocks at interior nodes (orthonormal frame): for NPC targets
  // these are positive semidefinite, kappa (|w|^2 I - w w^T) per axis.
  std::vector<Eigen::MatrixXd> df(g.ndim);
  for (int i = 0; i < g.ndim; ++i) df[i] = map_partial(f, i);
  std::vector<Mat> curv_weak(ni, Mat::Zero(n, n));
  std::vector<Mat> curv_strong(ni, Mat::Zero(n, n));
  for (int k = 0; k < ni; ++k) {
    const int node = sys.interior_nodes[k];
    if (T.flat()) continue;
    const Vec y = f.value_at(node);
    const Vec r = detail::frame_scale_at(T, y);
    for (int i = 0; i < g.ndim; ++i) {
      const Vec w_chart = df[i].row(node).transpose();
      const Vec w_hat = r.cwiseProduct(w_chart);
      // quadratic-form route (manifestly symmetric constant-curvature block)
      curv_weak[k] += g.inv_metric[i] * T.curvature_scale *
                      (w_hat.squaredNorm() * Mat::Identity(n, n) -
                       w_hat * w_hat.transpose());
      // operator route through the curvature tensor contraction
      for (int al = 0; al < n; ++al) {
        Vec s_chart = Vec::Zero(n);
        s_chart[al] = 1.0 / r[al];
        const Vec v = riemann_apply(T, y, s_chart, w_chart);
        curv_strong[k].col(al) -= g.inv_metric[i] * r.cwiseProduct(v);
      }
    }
  }

  // Weak form Q_hat.
  std::vector<Eigen::Triplet<double>> qt;
  std::vector<Mat> diag_blocks(ni, Mat::Zero(n, n));
  auto add_block = [&](int ka, int kb, const Mat& blk) {
    if (ka < 0 || kb < 0) return;
    if (ka == kb) {
      diag_blocks[ka] += blk;
      return;
    }
    for (int r_ = 0; r_ < n; ++r_)
      for (int c_ = 0; c_ < n; ++c_) {
        qt.emplace_back(ka * n + r_, kb * n + c_, blk(r_, c_));
        qt.emplace_back(kb * n + c_, ka * n + r_, blk(r_, c_));
      }
  };
  for (int axis = 0; axis < g.ndim; ++axis) {
    const double h = g.spacing(axis);
    const double omega = g.inv_metric[axis] * vol;
    for (const auto& e : edges[axis]) {
      const Mat Ja = -Mat::Identity(n, n) / h + 0.5 * e.p_hat;
      const Mat Jb = Mat::Identity(n, n) / h + 0.5 * e.p_hat;
      const int ka = sys.interior_of_node[e.a];
      const int kb = sys.interior_of_node[e.b];
      if (ka >= 0) diag_blocks[ka] += omega * (Ja.transpose() * Ja);
      if (kb >= 0) diag_blocks[kb] += omega * (Jb.transpose() * Jb);
      add_block(ka, kb, omega * (Ja.transpose() * Jb));
    }
  }
  for (int k = 0; k < ni; ++k) {
    const int node = sys.interior_nodes[k];
    diag_blocks[k] += g.weight(node) * curv_weak[k];
    for (int r_ = 0; r_ < n; ++r_)
      for (int c_ = 0; c_ < n; ++c_)
        qt.emplace_back(k * n + r_, k * n + c_, diag_blocks[k](r_, c_));
  }
  sys.Q_hat.resize(m, m);
  sys.Q_hat.setFromTriplets(qt.begin(), qt.end());

  // Strong form K_hat by the covariant divergence stencil.
  std::vector<Eigen::Triplet<double>> kt;
  auto add_k = [&](int krow, int node_col, const Mat& blk) {
    const int kcol = sys.interior_of_node[node_col];
    if (kcol < 0) return;
    for (int r_ = 0; r_ < n; ++r_)
      for (int c_ = 0; c_ < n; ++c_)
        if (blk(r_, c_) != 0.0)
          kt.emplace_back(krow * n + r_, kcol * n + c_, blk(r_, c_));
  };
  for (int axis = 0; axis < g.ndim; ++axis) {
    const double h = g.spacing(axis);
    const double gi = g.inv_metric[axis];
    // edge lookup per node: e_minus = (x - h, x), e_plus = (x, x + h)
    std::vector<int> plus_edge(N, -1), minus_edge(N, -1);
    for (std::size_t idx = 0; idx < edges[axis].size(); ++idx) {
      plus_edge[edges[axis][idx].a] = static_cast<int>(idx);
      minus_edge[edges[axis][idx].b] = static_cast<int>(idx);
    }
    for (int k = 0; k < ni; ++k) {
      const int x = sys.interior_nodes[k];
      const auto& ep = edges[axis][plus_edge[x]];
      const auto& em = edges[axis][minus_edge[x]];
      const Mat Apx = -Mat::Identity(n, n) / h + 0.5 * ep.p_hat;  // L+ on s_x
      const Mat App = Mat::Identity(n, n) / h + 0.5 * ep.p_hat;   // L+ on s_{x+}
      const Mat Amm = -Mat::Identity(n, n) / h + 0.5 * em.p_hat;  // L- on s_{x-}
      const Mat Amx = Mat::Identity(n, n) / h + 0.5 * em.p_hat;   // L- on s_x
      add_k(k, x, gi * (-(Apx - Amx) / h - 0.5 * (ep.p_hat * Apx + em.p_hat * Amx)));
      add_k(k, ep.b, gi * (-App / h - 0.5 * (ep.p_hat * App)));
      add_k(k, em.a, gi * (Amm / h - 0.5 * (em.p_hat * Amm)));
    }
  }
  for (int k = 0; k < ni; ++k) add_k(k, sys.interior_nodes[k], curv_strong[k]);
  SparseMat K_hat(m, m);
  K_hat.setFromTriplets(kt.begin(), kt.end());

  // Chart-frame exposures: Q = R Q_hat R, K = R^{-1} K_hat R, M = diag(w r^2).
  const Eigen::VectorXd r = sys.frame_scale;
  const Eigen::VectorXd rinv = r.cwiseInverse();
  sys.Q = detail::scale_sparse(sys.Q_hat, r, r);
  sys.K_strong = detail::scale_sparse(K_hat, rinv, r);
  sys.M_diag = sys.weight.cwiseProduct(r.cwiseProduct(r));

  double acc = 0.0;
  for (int i = 0; i < m; ++i) acc += std::abs(sys.Q.coeff(i, i));
  sys.q_scale = m > 0 ? acc / m : 0.0;
  return sys;
}

/// Quadratic form s^T Q s' evaluated with symmetric pairing, so that
/// swapping the arguments returns the bitwise-identical value.
inline double jacobi_quadratic_form(const JacobiSystem& sys,
                                    const Eigen::VectorXd& s,
                                    const Eigen::VectorXd& sp) {
  double acc = 0.0;
  for (int k = 0; k < sys.Q.outerSize(); ++k)
    for (SparseMat::InnerIterator it(sys.Q, k); it; ++it) {
      if (it.row() == it.col())
        acc += it.value() * (s[it.row()] * sp[it.col()]);
      else if (it.row() < it.col())
        acc += it.value() *
               (s[it.row()] * sp[it.col()] + s[it.col()] * sp[it.row()]);
    }
  return acc;
}

/// Rayleigh quotient (s^T Q s) / (s^T M s) of a section over the system's map.
inline double rayleigh(const JacobiSystem& sys, const Section& s) {
  if (s.base != sys.base) throw BaseMismatch("section over a different map");
  const Eigen::VectorXd v = sys.restrict_full(s.coeffs);
  const double den = v.dot(sys.M_diag.cwiseProduct(v));
  if (den <= 0.0) throw ZeroSection("rayleigh quotient of the zero section");
  return jacobi_quadratic_form(sys, v, v) / den;
}

struct EigenPair {
  double lambda = 0.0;
  Eigen::VectorXd section;  // full stacked chart coefficients, zero boundary
  double residual = 0.0;    // ||Q v - lambda M v|| / ||v|| on interior DOFs
};

namespace detail {

/// Jacobi-preconditioned CG on the deflated, Tikhonov-shifted operator
/// P (B + sigma I) P with P the projector off the converged eigenvectors.
inline Eigen::VectorXd deflated_pcg(const SparseMat& B, double sigma,
                                    const std::vector<Eigen::VectorXd>& defl,
                                    const Eigen::VectorXd& rhs, double rtol,
                                    int maxit) {
  const int m = static_cast<int>(rhs.size());
  Eigen::VectorXd dinv(m);
  for (int i = 0; i < m; ++i) {
    const double d = B.coeff(i, i) + sigma;
    dinv[i] = d > 0.0 ? 1.0 / d : 1.0;
  }
  auto project = [&](Eigen::VectorXd& v) {
    for (const auto& u : defl) v -= u.dot(v) * u;
  };
  auto apply = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd w = B * v + sigma * v;
    project(w);
    return w;
  };
  Eigen::VectorXd b = rhs;
  project(b);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd rres = b;
  Eigen::VectorXd z = dinv.asDiagonal() * rres;
  project(z);
  Eigen::VectorXd p = z;
  double rz = rres.dot(z);
  const double b_norm = b.norm();
  if (b_norm == 0.0) return x;
  double best = rres.norm();
  Eigen::VectorXd best_x = x;
  for (int it = 0; it < maxit; ++it) {
    const Eigen::VectorXd Ap = apply(p);
    const double pAp = p.dot(Ap);
    if (pAp <= 0.0) break;  // deflated operator lost definiteness; stop
    const double alpha = rz / pAp;
    x += alpha * p;
    rres -= alpha * Ap;
    const double rn = rres.norm();
    if (rn < best) {
      best = rn;
      best_x = x;
    }
    if (rn <= rtol * b_norm) return x;
    z = dinv.asDiagonal() * rres;
    project(z);
    const double rz_new = rres.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  return best_x;
}

}  // namespace detail

/// k smallest eigenpairs of (Q, M): shift-free inverse power iteration with
/// deflation against converged vectors, inner solves by monitored CG, seeded
/// deterministic start vectors. Convergence is declared on the chart-frame
/// residual ||Q v - lambda M v|| <= tol * ||v||.
inline std::vector<EigenPair> lowest_eigs(const JacobiSystem& sys, int k,
                                          double tol = 1e-8,
                                          int max_outer = 10000,
                                          std::uint64_t seed = 1u,
                                          const Eigen::VectorXd* warm_start = nullptr) {
  if (k < 1) throw ValidationError("k", "must request at least one eigenpair");
  const int m = sys.dofs();
  if (k > m) throw ValidationError("k", "more eigenpairs than DOFs");

  // Ordinary symmetric problem B = W^{-1/2} Q_hat W^{-1/2}; eigenvalues agree
  // with the generalized chart-frame pair (Q, M).
  const Eigen::VectorXd wsqrt_inv = sys.weight.cwiseSqrt().cwiseInverse();
  const SparseMat B = detail::scale_sparse(sys.Q_hat, wsqrt_inv, wsqrt_inv);
  double scale_b = 0.0;
  for (int i = 0; i < m; ++i) scale_b += std::abs(B.coeff(i, i));
  scale_b = m > 0 ? scale_b / m : 1.0;
  const double sigma = 1e-13 * scale_b;  // keeps inner solves regular on kernels

  // chart-frame transforms: v_chart = R^{-1} W^{-1/2} u
  const Eigen::VectorXd to_chart =
      sys.frame_scale.cwiseInverse().cwiseProduct(wsqrt_inv);

  std::vector<EigenPair> out;
  std::vector<Eigen::VectorXd> converged;
  SplitMix64 rng(mix_seed(seed, 0xE16E5));

  for (int idx = 0; idx < k; ++idx) {
    Eigen::VectorXd u(m);
    if (idx == 0 && warm_start != nullptr) {
      // warm start arrives as full chart coefficients: u = W^{1/2} R v
      const Eigen::VectorXd v_int = sys.restrict_full(*warm_start);
      u = v_int.cwiseQuotient(to_chart);
    } else {
      for (int i = 0; i < m; ++i) u[i] = rng.symmetric();
    }
    for (const auto& c : converged) u -= c.dot(u) * c;
    if (u.norm() == 0.0) u = Eigen::VectorXd::Unit(m, idx % m);
    u.normalize();

    // Deflation propagates the error of earlier pairs into the attainable
    // residual of later ones, so each pair is driven well below the
    // requested tolerance; a stagnation guard accepts the best iterate once
    // it already meets the user tolerance.
    const double tol_tight = 0.02 * tol;
    double theta = 0.0;
    double best_res = std::numeric_limits<double>::infinity();
    Eigen::VectorXd u_best = u;
    int stagnant = 0;
    double inner_rtol = 1e-4;
    bool done = false;
    for (int it = 0; it < max_outer && !done; ++it) {
      Eigen::VectorXd z =
          detail::deflated_pcg(B, sigma, converged, u, inner_rtol, 40 * m + 200);
      for (const auto& c : converged) z -= c.dot(z) * c;
      const double zn = z.norm();
      if (zn == 0.0) break;
      u = z / zn;
      const Eigen::VectorXd Bu = B * u;
      theta = u.dot(Bu);
      // residual in the advertised chart-frame normalization
      const Eigen::VectorXd v = to_chart.cwiseProduct(u);
      const double res =
          (sys.Q * v - theta * sys.M_diag.cwiseProduct(v)).norm() / v.norm();
      if (res < best_res) {
        best_res = res;
        u_best = u;
        stagnant = 0;
      } else {
        ++stagnant;
      }
      if (res <= tol_tight) done = true;
      if (stagnant >= 50 && best_res <= tol) done = true;
      // inexact inverse iteration: tighten inner solves as the pair settles
      const double rho = (Bu - theta * u).norm() / scale_b;
      inner_rtol = std::max(1e-14, std::min(1e-4, 0.03 * rho));
    }
    if (!done && best_res > tol)
      throw NoConvergence("eigenpair " + std::to_string(idx) +
                              " did not meet the residual tolerance",
                          best_res);
    u = u_best;
    theta = u.dot(B * u);
    converged.push_back(u);

    EigenPair p;
    p.lambda = theta;
    Eigen::VectorXd v = to_chart.cwiseProduct(u);
    // deterministic sign: largest-magnitude component positive
    int arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    p.residual = (sys.Q * v - theta * sys.M_diag.cwiseProduct(v)).norm() / v.norm();
    p.section = sys.extend_interior(v);
    out.push_back(std::move(p));
  }
  std::sort(out.begin(), out.end(),
            [](const EigenPair& a, const EigenPair& b) { return a.lambda < b.lambda; });
  return out;
}

/// Kernel threshold: eigenvalues below eps_ker count as kernel, and flag the
/// base map as a degenerate critical point.
inline double kernel_threshold(const JacobiSystem& sys) {
  return 1e-6 * sys.q_scale;
}

/// ||Q s - M K_strong s|| / ||s|| on interior DOFs (weak/strong cross-check).
inline double weak_strong_residual(const JacobiSystem& sys,
                                   const Eigen::VectorXd& interior) {
  const Eigen::VectorXd lhs = sys.Q * interior;
  const Eigen::VectorXd rhs =
      sys.M_diag.cwiseProduct(sys.K_strong * interior);
  return (lhs - rhs).norm() / interior.norm();
}

}  // namespace heatflow
