#include <catch2/catch.hpp>

#include <memory>

#include "heatflow/map_calculus.hpp"
#include "heatflow/rng.hpp"
#include "support/oracles.hpp"

using namespace heatflow;

namespace {

std::shared_ptr<const DiscreteMap> circle_sine_map(int N, double amp) {
  const auto g = DomainGrid::circle(2.0 * M_PI, N);
  const auto t = TargetManifold::euclidean(1);
  Eigen::MatrixXd v(g.node_count(), 1);
  for (int j = 0; j < g.node_count(); ++j) v(j, 0) = amp * std::sin(g.coords(j)[0]);
  return std::make_shared<const DiscreteMap>(g, t, v);
}

/// Samples of the vertical geodesic x = 0, y = exp(l s) on [0,1].
std::shared_ptr<const DiscreteMap> vertical_geodesic_map(int N, double ell) {
  const auto g = DomainGrid::interval(1.0, N);
  const auto t = TargetManifold::hyperbolic_half_space(2, 1.0);
  Eigen::MatrixXd v(g.node_count(), 2);
  for (int j = 0; j < g.node_count(); ++j) {
    v(j, 0) = 0.0;
    v(j, 1) = std::exp(ell * g.coords(j)[0]);
  }
  return std::make_shared<const DiscreteMap>(g, t, v);
}

}  // namespace

TEST_CASE("map construction contracts") {
  SECTION("winding into a Euclidean chart is rejected at construction") {
    const auto g = DomainGrid::circle(2.0 * M_PI, 64);
    const auto t = TargetManifold::euclidean(1);
    Eigen::MatrixXd v(g.node_count(), 1);
    for (int j = 0; j < g.node_count(); ++j) v(j, 0) = g.coords(j)[0];
    REQUIRE_THROWS_AS(DiscreteMap(g, t, v), ValidationError);
  }

  SECTION("the same winding into the torus chart is fine") {
    const auto g = DomainGrid::circle(2.0 * M_PI, 64);
    const auto t = TargetManifold::flat_torus(1);
    Eigen::MatrixXd v(g.node_count(), 1);
    for (int j = 0; j < g.node_count(); ++j) v(j, 0) = g.coords(j)[0];
    REQUIRE_NOTHROW(DiscreteMap(g, t, v));
  }

  SECTION("inadmissible values are rejected") {
    const auto g = DomainGrid::interval(1.0, 8);
    const auto t = TargetManifold::hyperbolic_half_space(2, 1.0);
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(8, 2);  // height 0 < chart guard
    REQUIRE_THROWS_AS(DiscreteMap(g, t, v), ChartViolation);
  }
}

TEST_CASE("tension examples") {
  SECTION("flat target: tension is the componentwise second derivative") {
    const auto f = circle_sine_map(256, 1.0);
    const double h = f->grid.spacing(0);
    const Eigen::MatrixXd tau = tension_values(*f);
    double worst = 0.0;
    for (int j = 0; j < f->grid.node_count(); ++j)
      worst = std::max(worst,
                       std::abs(tau(j, 0) + std::sin(f->grid.coords(j)[0])));
    REQUIRE(worst < h * h);
  }

  SECTION("constant maps are harmonic") {
    const auto g = DomainGrid::interval(1.0, 33);
    const auto t = TargetManifold::hyperbolic_half_space(2, 1.0);
    Eigen::MatrixXd v(g.node_count(), 2);
    for (int j = 0; j < g.node_count(); ++j) v.row(j) << 0.3, 2.0;
    REQUIRE(tension_values(DiscreteMap(g, t, v)).norm() == 0.0);
  }

  SECTION("exp_map-sampled geodesics have tension O(h^2), refining at 2nd order") {
    auto sup_tension = [](int N) {
      const auto f = vertical_geodesic_map(N, 1.3);
      const Eigen::MatrixXd tau = tension_values(*f);
      double worst = 0.0;
      for (int j = 0; j < f->grid.node_count(); ++j)
        worst = std::max(worst, tau.row(j).norm());
      return worst;
    };
    const double e1 = sup_tension(51), e2 = sup_tension(101);
    REQUIRE(e1 < 2e-3);
    REQUIRE(e2 < e1 / 3.0);
  }

  SECTION("winding loop into the torus is harmonic despite the seam") {
    const auto g = DomainGrid::circle(2.0 * M_PI, 64);
    const auto t = TargetManifold::flat_torus(1);
    Eigen::MatrixXd v(g.node_count(), 1);
    for (int j = 0; j < g.node_count(); ++j) v(j, 0) = g.coords(j)[0];
    const DiscreteMap f(g, t, v);
    REQUIRE(tension_values(f).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("energy examples") {
  SECTION("constant map has zero energy") {
    const auto g = DomainGrid::circle(2.0 * M_PI, 64);
    const auto t = TargetManifold::euclidean(2);
    Eigen::MatrixXd v = Eigen::MatrixXd::Constant(g.node_count(), 2, 1.5);
    REQUIRE(energy(DiscreteMap(g, t, v)) == 0.0);
  }

  SECTION("unit loop in the plane has energy pi up to O(h^2)") {
    const auto g = DomainGrid::circle(2.0 * M_PI, 256);
    const auto t = TargetManifold::euclidean(2);
    Eigen::MatrixXd v(g.node_count(), 2);
    for (int j = 0; j < g.node_count(); ++j) {
      const double x = g.coords(j)[0];
      v.row(j) << std::cos(x), std::sin(x);
    }
    const double h = g.spacing(0);
    REQUIRE(energy(DiscreteMap(g, t, v)) == Approx(M_PI).margin(M_PI * h * h));
  }

  SECTION("energy is nonnegative and zero only for locally constant maps") {
    const auto f = circle_sine_map(64, 0.3);
    REQUIRE(energy(*f) > 0.0);
  }
}

TEST_CASE("L2 inner product") {
  const auto f = circle_sine_map(256, 1.0);
  const int N = f->grid.node_count();

  SECTION("zero section has zero norm") {
    const Section z(f, Eigen::VectorXd::Zero(N));
    REQUIRE(l2_norm(z) == 0.0);
  }

  SECTION("||sin||^2 = pi up to O(h^2) on the unit circle bundle") {
    Eigen::VectorXd c(N);
    for (int j = 0; j < N; ++j) c[j] = std::sin(f->grid.coords(j)[0]);
    const Section s(f, c);
    REQUIRE(l2_inner(s, s) == Approx(M_PI).epsilon(1e-4));
  }

  SECTION("disjoint supports are orthogonal") {
    const auto g = DomainGrid::interval(1.0, 33);
    const auto t = TargetManifold::hyperbolic_half_space(2, 1.0);
    Eigen::MatrixXd v(g.node_count(), 2);
    for (int j = 0; j < g.node_count(); ++j) v.row(j) << 0.0, 1.0;
    auto base = std::make_shared<const DiscreteMap>(g, t, v);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(2 * g.node_count());
    Eigen::VectorXd b = Eigen::VectorXd::Zero(2 * g.node_count());
    a[2 * 5] = 1.0;
    b[2 * 20 + 1] = 2.0;
    REQUIRE(l2_inner(Section(base, a), Section(base, b)) == 0.0);
  }

  SECTION("symmetric and bilinear to machine precision") {
    SplitMix64 rng(61);
    Eigen::VectorXd a(N), b(N);
    for (int j = 0; j < N; ++j) {
      a[j] = rng.symmetric();
      b[j] = rng.symmetric();
    }
    const Section sa(f, a), sb(f, b), sab(f, a + 2.0 * b);
    REQUIRE(l2_inner(sa, sb) == Approx(l2_inner(sb, sa)).margin(1e-15));
    REQUIRE(l2_inner(sab, sb) ==
            Approx(l2_inner(sa, sb) + 2.0 * l2_inner(sb, sb)).margin(1e-12));
    REQUIRE(l2_inner(sa, sa) >= 0.0);
  }

  SECTION("sections over different bases are rejected") {
    const auto f2 = circle_sine_map(256, 1.0);
    const Section s1(f, Eigen::VectorXd::Zero(N));
    const Section s2(f2, Eigen::VectorXd::Zero(N));
    REQUIRE_THROWS_AS(l2_inner(s1, s2), BaseMismatch);
  }

  SECTION("Dirichlet boundary coefficients are forced to zero") {
    const auto g = DomainGrid::interval(1.0, 9);
    const auto t = TargetManifold::euclidean(1);
    auto base = std::make_shared<const DiscreteMap>(
        g, t, Eigen::MatrixXd::Zero(g.node_count(), 1));
    const Section s(base, Eigen::VectorXd::Ones(g.node_count()));
    REQUIRE(s.at(0)[0] == 0.0);
    REQUIRE(s.at(8)[0] == 0.0);
    REQUIRE(s.at(4)[0] == 1.0);
  }
}
