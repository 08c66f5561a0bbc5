#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tubelab/errors.hpp"
#include "tubelab/geometry.hpp"

using namespace tubelab;

namespace {
TubePoint at(double x, std::initializer_list<double> w, double eps) {
  TubePoint p;
  p.x = x;
  p.w = Vec(static_cast<int>(w.size()));
  int i = 0;
  for (double v : w) p.w(i++) = v;
  p.eps = eps;
  return p;
}
}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("circle potential: closed form and finite differences agree with the polar formula") {
    for (double R : {1.0, 2.5}) {
      SubmanifoldModel m(CircleInPlane{R});
      for (double w : {-0.8, -0.3, 0.0, 0.4, 0.9})
        for (double eps : {0.2, 0.05}) {
          const double r = R + eps * w;
          CHECK(potential_U(m, at(0.7, {w}, eps)) == doctest::Approx(oracle::circle_potential(r)).epsilon(1e-14));
          CHECK(potential_U_fd(m, at(0.7, {w}, eps)) ==
                doctest::Approx(oracle::circle_potential(r)).epsilon(1e-5));
        }
    }
  }

  TEST_CASE("untwisted space curve behaves like a planar circle of radius 1/kappa") {
    const double kappa = 0.5;
    SubmanifoldModel m(CurveInSpace::constant(kappa, 0.0));
    CHECK(m.codim() == 2);
    CHECK(m.period() == doctest::Approx(2 * oracle::pi / kappa));
    for (double w1 : {-0.7, 0.0, 0.6})
      for (double w2 : {-0.5, 0.3}) {
        const double eps = 0.3;
        const auto p = at(1.1, {w1, w2}, eps);
        // the principal normal points to the centre, so the distance to it is
        // 1/kappa - v1
        const double r = 1 / kappa - eps * w1;
        CHECK(density_rho(m, p) == doctest::Approx(kappa * r).epsilon(1e-13));
        CHECK(potential_U(m, p) == doctest::Approx(-0.25 * kappa * kappa / std::pow(kappa * r, 2)).epsilon(1e-5));
      }
  }

  TEST_CASE("torsion leaves the density alone but enters the potential") {
    SubmanifoldModel flat(CurveInSpace::constant(0.5, 0.0));
    SubmanifoldModel helix(CurveInSpace::constant(0.5, 0.4));
    const auto p = at(0.3, {0.5, 0.7}, 0.3);
    CHECK(density_rho(helix, p) == doctest::Approx(density_rho(flat, p)).epsilon(1e-14));
    CHECK(std::abs(potential_U(helix, p) - potential_U(flat, p)) > 1e-4);
  }

  TEST_CASE("Sasaki cometric is the rescaled identity") {
    SubmanifoldModel m(CurveInSpace::constant(0.7, 0.2));
    const auto G = cometric(m, at(0.0, {0.3, -0.2}, 0.1), MetricKind::Sasaki);
    CHECK((G.horizontal - Mat::Identity(1, 1)).norm() == 0.0);
    CHECK((G.vertical - Mat::Identity(2, 2) * 100.0).norm() < 1e-12);
    CHECK(G.cross.norm() == 0.0);
  }

  TEST_CASE("induced cometric on the circle scales the base direction by rho^-2") {
    SubmanifoldModel m(CircleInPlane{1.0});
    for (double w : {-0.5, 0.5}) {
      const auto G = cometric(m, at(0.0, {w}, 0.2), MetricKind::Induced);
      CHECK(G.horizontal(0, 0) == doctest::Approx(1 / std::pow(1 + 0.2 * w, 2)));
      CHECK(G.vertical(0, 0) == doctest::Approx(25.0));
    }
  }

  TEST_CASE("focal radius is enforced") {
    SubmanifoldModel m(CircleInPlane{1.0});
    CHECK_THROWS_AS(density_rho(m, at(0.0, {-1.0}, 1.0)), FocalRadiusExceeded);
    CHECK(m.focal_radius() == 1.0);
    SubmanifoldModel c(CurveInSpace::constant(2.0, 0.0));
    CHECK(c.focal_radius() == doctest::Approx(0.5));
  }

  TEST_CASE("synthetic curvature tensor carries the algebraic symmetries") {
    auto s = SyntheticFiberModel::make(0, 2, {{1, 2, 1, 2, 1.5}});
    CHECK(s.symmetry_defect() == 0.0);
    CHECK(s.at(0, 1, 0, 1) == 1.5);
    CHECK(s.at(1, 0, 1, 0) == 1.5);
    CHECK(s.at(0, 1, 1, 0) == -1.5);
    CHECK(s.at(1, 0, 0, 1) == -1.5);
    CHECK(s.at(0, 0, 1, 1) == 0.0);
  }

  TEST_CASE("synthetic Jacobi map is I + R_W / 6 in the normal block") {
    SubmanifoldModel m(SyntheticFiberModel::make(0, 2, {{1, 2, 1, 2, 1.0}}));
    Vec W(2);
    W << 0.6, 0.0;
    const Mat A = jacobi_endomorphism(m, 0.0, W, 0.5);
    // R(w, V)w for w = (0.3, 0): only the V = e2 direction feels curvature
    CHECK(A(0, 0) == doctest::Approx(1.0));
    CHECK(std::abs(A(1, 1) - 1.0) == doctest::Approx(0.09 / 6));
    CHECK(jacobi_expansion(m, 0.0, W, 0.5).isApprox(A));
  }

  TEST_CASE("Fermi coordinates invert the embedding") {
    SubmanifoldModel ellipse(CurveInSpace::ellipse(2.0, 1.0));
    FlatEmbedding emb(ellipse);
    for (double x : {0.2, 3.0, 8.0})
      for (double v1 : {-0.3, 0.25}) {
        Vec v(2);
        v << v1, -0.1;
        const auto [xs, vs] = emb.fermi(emb.ambient(x, v), x + 0.05);
        CHECK(xs == doctest::Approx(x).epsilon(1e-8));
        CHECK((vs - v).norm() < 1e-8);
      }
    // constant nonzero torsion gives a helix, which never closes up
    CHECK_THROWS_AS(FlatEmbedding(SubmanifoldModel(CurveInSpace::constant(0.5, 0.3))), InvalidArgument);
    SubmanifoldModel circ(CircleInPlane{2.0});
    FlatEmbedding ec(circ);
    Vec v = Vec::Constant(1, 0.3);
    const auto [xs, vs] = ec.fermi(ec.ambient(1.0, v), 0.0);
    CHECK(xs == doctest::Approx(1.0));
    CHECK(vs(0) == doctest::Approx(0.3));
  }

  TEST_CASE("ellipse closes up and has the right length") {
    const auto e = CurveInSpace::ellipse(2.0, 1.0);
    // perimeter 4 a E(k), k^2 = 1 - b^2 / a^2
    const double perim = 4 * 2.0 * std::comp_ellint_2(std::sqrt(0.75));
    CHECK(e.length == doctest::Approx(perim).epsilon(1e-12));
    FlatEmbedding emb{SubmanifoldModel(e)};
    CHECK(emb.closure_error() < 1e-6);
    // curvature at the ends of the major axis is a / b^2
    CHECK(e.curvature.max_abs() == doctest::Approx(2.0).epsilon(1e-6));
  }

  TEST_CASE("sampled profiles interpolate trigonometric data exactly") {
    std::vector<double> s(32);
    const double L = 5.0;
    for (int i = 0; i < 32; ++i) s[i] = 1 + 0.3 * std::cos(2 * oracle::pi * 2 * i / 32.0);
    auto p = Profile::sampled(s, L);
    for (double x : {0.1, 1.7, 4.2}) {
      CHECK(p(x) == doctest::Approx(1 + 0.3 * std::cos(2 * oracle::pi * 2 * x / L)).epsilon(1e-12));
      CHECK(p.derivative(x) ==
            doctest::Approx(-0.3 * 4 * oracle::pi / L * std::sin(2 * oracle::pi * 2 * x / L)).epsilon(1e-10));
    }
    CHECK(p.mean() == doctest::Approx(1.0));
  }
}
