#include <catch2/catch.hpp>

#include "heatflow/rng.hpp"
#include "heatflow/target_geometry.hpp"
#include "support/oracles.hpp"

using namespace heatflow;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec random_halfspace_point(SplitMix64& rng, int n) {
  Vec y(n);
  for (int i = 0; i < n - 1; ++i) y[i] = 3.0 * rng.symmetric();
  y[n - 1] = 0.2 + 2.5 * rng.uniform();
  return y;
}

}  // namespace

TEST_CASE("metric closed forms") {
  const auto eu = TargetManifold::euclidean(2);
  REQUIRE(metric_at(eu, vec2(3.0, -1.0)).isIdentity(0.0));

  const auto h2 = TargetManifold::hyperbolic_half_space(2, 1.0);
  REQUIRE(metric_at(h2, vec2(0.0, 1.0)).isApprox(Mat::Identity(2, 2), 1e-15));
  const Mat m2 = metric_at(h2, vec2(0.0, 2.0));
  REQUIRE(m2(0, 0) == Approx(0.25).epsilon(1e-15));
  REQUIRE(m2(1, 1) == Approx(0.25).epsilon(1e-15));
  REQUIRE(m2(0, 1) == 0.0);

  SECTION("SPD at random admissible points") {
    SplitMix64 rng(7);
    for (int k = 0; k < 50; ++k) {
      const Vec y = random_halfspace_point(rng, 3);
      const Mat m = metric_at(TargetManifold::hyperbolic_half_space(3, 2.0), y);
      REQUIRE((m - m.transpose()).norm() == 0.0);
      Eigen::SelfAdjointEigenSolver<Mat> es(m);
      REQUIRE(es.eigenvalues().minCoeff() > 0.0);
    }
  }

  SECTION("chart guard") {
    REQUIRE_THROWS_AS(metric_at(h2, vec2(0.0, 1e-9)), ChartViolation);
  }
}

TEST_CASE("christoffel closed forms match the half-plane formulas") {
  const auto eu = TargetManifold::euclidean(3);
  for (const auto& G : christoffels_at(eu, Vec::Zero(3)))
    REQUIRE(G.norm() == 0.0);
  const auto tor = TargetManifold::flat_torus(2);
  for (const auto& G : christoffels_at(tor, vec2(11.0, -4.0)))
    REQUIRE(G.norm() == 0.0);

  const auto h2 = TargetManifold::hyperbolic_half_space(2, 1.0);
  const auto G = christoffels_at(h2, vec2(0.0, 1.0));
  REQUIRE(G[0](0, 1) == Approx(-1.0));
  REQUIRE(G[0](1, 0) == Approx(-1.0));
  REQUIRE(G[1](0, 0) == Approx(1.0));
  REQUIRE(G[1](1, 1) == Approx(-1.0));
  REQUIRE(G[0](0, 0) == 0.0);
  REQUIRE(G[0](1, 1) == 0.0);
  REQUIRE(G[1](0, 1) == 0.0);
  REQUIRE(G[1](1, 0) == 0.0);
}

TEST_CASE("christoffels agree with the Koszul finite-difference oracle at O(step^2)") {
  SplitMix64 rng(13);
  for (double kappa : {1.0, 4.0}) {
    const auto t = TargetManifold::hyperbolic_half_space(2, kappa);
    for (int rep = 0; rep < 5; ++rep) {
      const Vec y = random_halfspace_point(rng, 2);
      const auto exact = christoffels_at(t, y);
      auto err = [&](double step) {
        const auto fd = oracles::koszul_christoffels(t, y, step);
        double e = 0.0;
        for (int g = 0; g < 2; ++g) e = std::max(e, (fd[g] - exact[g]).norm());
        return e;
      };
      const double e1 = err(1e-2), e2 = err(5e-3);
      REQUIRE(e1 < 0.1);
      // halving the step should shrink the error about 4x
      REQUIRE(e2 < e1 / 3.0 + 1e-12);
    }
  }
}

TEST_CASE("christoffel symmetry in the lower indices") {
  SplitMix64 rng(17);
  const auto t = TargetManifold::hyperbolic_half_space(3, 2.0);
  for (int rep = 0; rep < 20; ++rep) {
    const Vec y = random_halfspace_point(rng, 3);
    for (const auto& G : christoffels_at(t, y))
      REQUIRE((G - G.transpose()).norm() == 0.0);
  }
}

TEST_CASE("christoffel gradients match finite differences") {
  const auto t = TargetManifold::hyperbolic_half_space(2, 1.0);
  const Vec y = vec2(0.4, 1.3);
  const auto dG = christoffel_grad_at(t, y);
  const double step = 1e-5;
  for (int mu = 0; mu < 2; ++mu) {
    Vec yp = y, ym = y;
    yp[mu] += step;
    ym[mu] -= step;
    const auto Gp = christoffels_at(t, yp);
    const auto Gm = christoffels_at(t, ym);
    for (int g = 0; g < 2; ++g) {
      const Mat fd = (Gp[g] - Gm[g]) / (2.0 * step);
      REQUIRE((fd - dG[mu][g]).norm() < 1e-8);
    }
  }
}

TEST_CASE("curvature: flat kinds vanish, hyperbolic kinds have sec = -kappa") {
  const auto eu = TargetManifold::euclidean(2);
  REQUIRE(riemann_apply(eu, vec2(1.0, 1.0), vec2(1.0, 0.0), vec2(0.0, 1.0)).norm() ==
          0.0);

  const auto h2 = TargetManifold::hyperbolic_half_space(2, 1.0);
  REQUIRE(sectional_curvature(h2, vec2(0.0, 1.0), vec2(1.0, 0.0), vec2(0.0, 1.0)) ==
          Approx(-1.0).epsilon(1e-12));
  const auto h2k4 = TargetManifold::hyperbolic_half_space(2, 4.0);
  REQUIRE(sectional_curvature(h2k4, vec2(0.0, 1.0), vec2(1.0, 0.0), vec2(0.0, 1.0)) ==
          Approx(-4.0).epsilon(1e-12));

  SECTION("sectional curvature is constant over points and planes") {
    SplitMix64 rng(23);
    const auto t = TargetManifold::hyperbolic_half_space(3, 2.5);
    for (int rep = 0; rep < 30; ++rep) {
      const Vec y = random_halfspace_point(rng, 3);
      Vec s(3), w(3);
      for (int i = 0; i < 3; ++i) {
        s[i] = rng.symmetric();
        w[i] = rng.symmetric();
      }
      REQUIRE(sectional_curvature(t, y, s, w) == Approx(-2.5).epsilon(1e-9));
    }
  }
}

TEST_CASE("curvature tensor coefficients match the finite-difference commutator") {
  const auto t = TargetManifold::hyperbolic_half_space(2, 1.0);
  const Vec y = vec2(0.3, 0.8);
  const auto R = curvature_at(t, y);
  for (int d = 0; d < 2; ++d)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int g = 0; g < 2; ++g) {
          const double fd = oracles::fd_curvature_coeff(t, y, d, a, b, g, 1e-4);
          REQUIRE(R(d, a, b, g) == Approx(fd).margin(1e-6));
        }

  SECTION("riemann_apply is the tensor contraction") {
    SplitMix64 rng(29);
    for (int rep = 0; rep < 10; ++rep) {
      const Vec yy = random_halfspace_point(rng, 2);
      Vec s(2), w(2);
      for (int i = 0; i < 2; ++i) {
        s[i] = rng.symmetric();
        w[i] = rng.symmetric();
      }
      const auto Ry = curvature_at(t, yy);
      Vec via_tensor = Vec::Zero(2);
      for (int d = 0; d < 2; ++d)
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            for (int g = 0; g < 2; ++g)
              via_tensor[d] += Ry(d, a, b, g) * s[a] * w[b] * w[g];
      REQUIRE((via_tensor - riemann_apply(t, yy, s, w)).norm() < 1e-12);
    }
  }
}

TEST_CASE("non-positive curvature sign condition on random planes") {
  SplitMix64 rng(31);
  for (double kappa : {0.5, 1.0, 4.0}) {
    const auto t = TargetManifold::hyperbolic_half_space(3, kappa);
    for (int rep = 0; rep < 200; ++rep) {
      const Vec y = random_halfspace_point(rng, 3);
      Vec s(3), w(3);
      for (int i = 0; i < 3; ++i) {
        s[i] = rng.symmetric();
        w[i] = rng.symmetric();
      }
      const Vec h = metric_diag_at(t, y);
      const double inner = riemann_apply(t, y, s, w).dot(h.cwiseProduct(s));
      REQUIRE(inner <= 1e-9);
    }
  }
}

TEST_CASE("exp_map closed forms") {
  const auto eu = TargetManifold::euclidean(2);
  REQUIRE((exp_map(eu, vec2(1.0, 2.0), vec2(3.0, 4.0), 1.0) - vec2(4.0, 6.0)).norm() ==
          0.0);

  const auto h2 = TargetManifold::hyperbolic_half_space(2, 1.0);
  for (double t : {0.25, 1.0, 2.0}) {
    const Vec vert = exp_map(h2, vec2(0.0, 1.0), vec2(0.0, 1.0), t);
    REQUIRE(vert[0] == 0.0);
    REQUIRE(vert[1] == Approx(std::exp(t)).epsilon(1e-13));

    const Vec circ = exp_map(h2, vec2(0.0, 1.0), vec2(1.0, 0.0), t);
    REQUIRE(circ[0] == Approx(std::tanh(t)).epsilon(1e-13));
    REQUIRE(circ[1] == Approx(1.0 / std::cosh(t)).epsilon(1e-13));
  }
}

TEST_CASE("exp_map matches geodesic ODE integration to 1e-8 on [0,2]") {
  SplitMix64 rng(37);
  for (double kappa : {1.0, 4.0}) {
    const auto t = TargetManifold::hyperbolic_half_space(2, kappa);
    for (int rep = 0; rep < 8; ++rep) {
      const Vec y = random_halfspace_point(rng, 2);
      Vec v(2);
      v << rng.symmetric(), rng.symmetric();
      for (double tt : {0.5, 1.0, 2.0}) {
        const Vec closed = exp_map(t, y, v, tt);
        const Vec ode = oracles::geodesic_rk4(t, y, v, tt, 4000);
        REQUIRE((closed - ode).norm() < 1e-8);
      }
    }
  }
}

TEST_CASE("exp_map reversal returns to the start") {
  SplitMix64 rng(41);
  const auto t = TargetManifold::hyperbolic_half_space(2, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    const Vec y = random_halfspace_point(rng, 2);
    Vec v(2);
    v << rng.symmetric(), rng.symmetric();
    const double tt = 0.3 + rng.uniform();
    const Vec mid = exp_map(t, y, v, tt);
    // velocity at the far end by differentiating the closed form numerically
    const double eps = 1e-6;
    const Vec va = exp_map(t, y, v, tt + eps);
    const Vec vb = exp_map(t, y, v, tt - eps);
    const Vec vel_end = (va - vb) / (2.0 * eps);
    const Vec back = exp_map(t, mid, -vel_end, tt);
    REQUIRE((back - y).norm() < 1e-6);
  }
}

TEST_CASE("geodesic speed is metrically constant along exp_map") {
  const auto t = TargetManifold::hyperbolic_half_space(2, 2.0);
  const Vec y = vec2(0.2, 0.7);
  const Vec v = vec2(0.9, -0.4);
  auto speed_at = [&](double tt) {
    const double eps = 1e-6;
    const Vec a = exp_map(t, y, v, tt + eps);
    const Vec b = exp_map(t, y, v, tt - eps);
    const Vec vel = (a - b) / (2.0 * eps);
    const Vec h = metric_diag_at(t, exp_map(t, y, v, tt));
    return std::sqrt(vel.dot(h.cwiseProduct(vel)));
  };
  const double s0 = speed_at(0.0);
  for (double tt : {0.5, 1.0, 1.7})
    REQUIRE(speed_at(tt) == Approx(s0).epsilon(1e-7));
}

TEST_CASE("exp_map raises ChartViolation when the geodesic exits the chart") {
  const auto t = TargetManifold::hyperbolic_half_space(2, 1.0, 0.5);
  REQUIRE_THROWS_AS(exp_map(t, vec2(0.0, 1.0), vec2(0.0, -1.0), 2.0),
                    ChartViolation);
}

TEST_CASE("distance closed forms") {
  const auto eu = TargetManifold::euclidean(2);
  REQUIRE(distance(eu, vec2(0.0, 0.0), vec2(3.0, 4.0)) == Approx(5.0));

  const auto h2 = TargetManifold::hyperbolic_half_space(2, 1.0);
  REQUIRE(distance(h2, vec2(-1.0, 1.0), vec2(1.0, 1.0)) ==
          Approx(std::acosh(3.0)).epsilon(1e-13));
  const auto h2k4 = TargetManifold::hyperbolic_half_space(2, 4.0);
  REQUIRE(distance(h2k4, vec2(-1.0, 1.0), vec2(1.0, 1.0)) ==
          Approx(std::acosh(3.0) / 2.0).epsilon(1e-13));

  SECTION("distance along exp_map equals hyperbolic speed times time") {
    const Vec y = vec2(0.0, 1.0);
    const Vec v = vec2(1.0, 0.5);
    const Vec h = metric_diag_at(h2, y);
    const double speed = std::sqrt(v.dot(h.cwiseProduct(v)));
    for (double tt : {0.3, 1.1}) {
      const Vec z = exp_map(h2, y, v, tt);
      REQUIRE(distance(h2, y, z) == Approx(speed * tt).epsilon(1e-10));
    }
  }

  const auto tor = TargetManifold::flat_torus(1);
  Vec a(1), b(1);
  a << 0.1;
  b << 2.0 * M_PI - 0.1;
  REQUIRE(distance(tor, a, b) == Approx(0.2).epsilon(1e-12));
}
