#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "tubelab/errors.hpp"
#include "tubelab/fiber.hpp"

using namespace tubelab;

TEST_SUITE("fiber") {
  TEST_CASE("interval ground state converges at second order") {
    const double exact = oracle::pi * oracle::pi / 4;
    std::vector<double> err;
    for (int n : {63, 127, 255}) err.push_back(fiber_spectrum(1, 2, make_fiber_grid(1, n)).eigenvalues(0) - exact);
    CHECK(std::abs(err.back()) < 1e-4);
    CHECK(oracle::richardson_order(err[0], err[1], err[2]) == doctest::Approx(2.0).epsilon(0.1));
    // second-order centred differences underestimate a concave eigenfunction's energy
    CHECK(err.back() < 0);
  }

  TEST_CASE("disk ground state matches the first Bessel zero") {
    const double j01 = oracle::bessel_zero(0, 1);
    CHECK(j01 == doctest::Approx(2.404825557695773).epsilon(1e-12));
    const auto s = fiber_spectrum(2, 2, make_fiber_grid(2, 127, 32));
    CHECK(std::abs(s.eigenvalues(0) - j01 * j01) < 1e-3);
  }

  TEST_CASE("analytic disk spectrum: sorted Bessel zeros with multiplicity") {
    std::vector<double> ref;
    for (int m = 0; m <= 6; ++m)
      for (int n = 1; n <= 3; ++n) {
        const double j = oracle::bessel_zero(m, n);
        ref.push_back(j * j);
        if (m > 0) ref.push_back(j * j);
      }
    std::sort(ref.begin(), ref.end());
    const Vec a = analytic_eigenvalues(2, 12);
    for (int k = 0; k < 12; ++k) CHECK(a(k) == doctest::Approx(ref[k]).epsilon(1e-10));
    const Vec a1 = analytic_eigenvalues(1, 3);
    CHECK(a1(2) == doctest::Approx(9 * oracle::pi * oracle::pi / 4));
    // large requests stay cheap and ordered
    const Vec big = analytic_eigenvalues(2, 3000);
    for (int k = 1; k < 3000; ++k) CHECK_LE(big(k - 1), big(k));
  }

  TEST_CASE("fiber weights are control volumes of the unit ball") {
    const auto g1 = make_fiber_grid(1, 31);
    CHECK(g1.total_weight() == doctest::Approx(2.0).epsilon(1e-14));
    const auto g2 = make_fiber_grid(2, 31, 32);
    CHECK(g2.total_weight() == doctest::Approx(oracle::pi).epsilon(1e-13));
    CHECK(g2.size() == 1 + 31 * 32);
  }

  TEST_CASE("eigenvectors are orthonormal in the fiber quadrature") {
    for (int q : {1, 2}) {
      const auto g = make_fiber_grid(q, 31, 16);
      const auto s = fiber_spectrum(q, 6, g, false);
      const Mat G = s.eigenvectors.transpose() * g.weights.asDiagonal() * s.eigenvectors;
      CHECK((G - Mat::Identity(G.rows(), G.cols())).norm() < 1e-12);
      const SpMat K = fiber_stiffness(g);
      for (int k = 0; k < s.mode_count(); ++k) {
        const Vec r = K * s.eigenvectors.col(k) - s.eigenvalues(k) * g.weights.cwiseProduct(s.eigenvectors.col(k));
        CHECK(r.norm() < 1e-9 * s.eigenvalues(k));
      }
    }
  }

  TEST_CASE("interval modes have exact parity") {
    const auto g = make_fiber_grid(1, 31);
    const auto s = fiber_spectrum(1, 4, g);
    for (int k = 0; k < 4; ++k) {
      const Vec v = s.eigenvectors.col(k);
      const double sign = k % 2 ? -1.0 : 1.0;
      for (int i = 0; i < v.size(); ++i) CHECK(v(i) == sign * v(v.size() - 1 - i));
    }
    CHECK(s.eigenvectors.col(0).minCoeff() > 0);
  }

  TEST_CASE("disk multiplets: one radial mode, then the m = 1 doublet") {
    const auto s = fiber_spectrum(2, 3, make_fiber_grid(2, 31, 32));
    REQUIRE(s.multiplets.size() >= 2);
    CHECK(s.multiplets[0] == std::make_pair(0, 1));
    CHECK(s.multiplets[1] == std::make_pair(1, 3));
    CHECK(s.angular_order[0] == 0);
    CHECK(s.angular_order[1] == 1);
    CHECK(s.eigenvalues(2) == doctest::Approx(s.eigenvalues(1)).epsilon(1e-10));
  }

  TEST_CASE("coarse grids refuse modes they cannot resolve") {
    CHECK_THROWS_AS(fiber_spectrum(1, 6, make_fiber_grid(1, 7)), ResolutionError);
    CHECK_NOTHROW(fiber_spectrum(1, 6, make_fiber_grid(1, 7), false));
    CHECK_THROWS_AS(fiber_spectrum(1, 9, make_fiber_grid(1, 7), false), ResolutionError);
  }

  TEST_CASE("rotation field differentiates in the angle and kills radial functions") {
    const auto g = make_fiber_grid(2, 15, 64);
    const auto Z = rotation_fields(g);
    REQUIRE(Z.size() == 1);
    Vec w1(g.size()), w2(g.size()), radial(g.size());
    for (int i = 0; i < g.size(); ++i) {
      w1(i) = g.points[i](0);
      w2(i) = g.points[i](1);
      radial(i) = 1 - g.points[i].squaredNorm();
    }
    CHECK((Z[0] * radial).norm() < 1e-12);
    // d/dphi (r cos phi) = -r sin phi, up to the sin(dphi)/dphi central-difference factor
    const double c = std::sin(g.dphi()) / g.dphi();
    CHECK((Z[0] * w1 + c * w2).norm() < 1e-12);
    // antisymmetric in the fiber quadrature
    const Mat WZ = Mat(g.weights.asDiagonal()) * Mat(Z[0]);
    CHECK((WZ + WZ.transpose()).norm() < 1e-12);
    CHECK(rotation_fields(make_fiber_grid(1, 7)).empty());
  }

  TEST_CASE("fiberwise projections") {
    const auto s = fiber_spectrum(1, 3, make_fiber_grid(1, 15));
    Vec base(4);
    base << 1, -2, 0.5, 3;
    const Vec f = tensor_field(s, 0, base);
    CHECK((extract_fb(s, f) - base).norm() < 1e-13);
    CHECK((project_E0(s, f) - f).norm() < 1e-13);
    const Vec odd = tensor_field(s, 1, base);
    CHECK(extract_fb(s, odd).norm() == 0.0);
    CHECK((project_multiplet(s, 1, odd + f) - odd).norm() < 1e-13);
    CHECK_THROWS_AS(extract_fb(s, Vec::Ones(16)), InvalidArgument);
  }
}
