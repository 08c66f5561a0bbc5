#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tubelab/discretize.hpp"
#include "tubelab/errors.hpp"
#include "tubelab/spectral.hpp"

using namespace tubelab;

namespace {
double sym_defect(const SpMat& K) { return (Mat(K) - Mat(K).transpose()).norm() / Mat(K).norm(); }
}  // namespace

TEST_SUITE("discretize") {
  TEST_CASE("product grid carries the tube volume of the rescaled neighbourhood") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    const auto g = build_grid(circ, 64, 31);
    // circumference times the fiber length 2
    CHECK(g.total_weight() == doctest::Approx(4 * oracle::pi).epsilon(1e-14));
    SubmanifoldModel helix(CurveInSpace::constant(0.5, 0.2));
    const auto h = build_grid(helix, 16, 15, 16);
    CHECK(h.total_weight() == doctest::Approx(4 * oracle::pi * oracle::pi).epsilon(1e-12));
    CHECK_THROWS_AS(build_grid(circ, 4, 31), InvalidArgument);
  }

  TEST_CASE("assembled operators are symmetric and nonnegative") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    const auto g = build_grid(circ, 16, 15);
    for (auto k : {OperatorKind::DeltaV, OperatorKind::DeltaH, OperatorKind::HSa, OperatorKind::H}) {
      const auto A = assemble_operator(g, k, 0.2);
      CHECK(sym_defect(A.K) < 1e-14);
      CHECK(sym_eig(Mat(A.symmetrized())).values(0) > -1e-9);
    }
  }

  TEST_CASE("Sasaki operator splits into horizontal plus vertical over eps squared") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    const auto g = build_grid(circ, 16, 15);
    const auto V = assemble_operator(g, OperatorKind::DeltaV);
    const auto H = assemble_operator(g, OperatorKind::DeltaH);
    const auto S = assemble_operator(g, OperatorKind::HSa, 0.1);
    const Vec f = Vec::LinSpaced(g.size(), -1, 2).array().sin();
    CHECK((S.apply(f) - H.apply(f) - 100 * V.apply(f)).norm() < 1e-10 * S.apply(f).norm());
    // flat circle: the two parts commute
    const Vec vh = V.apply(H.apply(f)), hv = H.apply(V.apply(f));
    CHECK((vh - hv).norm() < 1e-10 * vh.norm());
  }

  TEST_CASE("base Laplacian has the periodic second-difference symbol") {
    for (double R : {1.0, 2.0}) {
      SubmanifoldModel circ(CircleInPlane{R});
      const auto g = build_grid(circ, 32, 15);
      const auto L = assemble_base_laplacian(g);
      for (int k : {1, 3, 7}) {
        Vec c(32);
        for (int b = 0; b < 32; ++b) c(b) = std::cos(k * g.base_x(b));
        const double mu = oracle::periodic_symbol(k, g.dx) / (R * R);
        CHECK((L.apply(c) - mu * c).norm() < 1e-10 * mu * c.norm());
      }
    }
  }

  TEST_CASE("renormalized Sasaki operator has bottom of spectrum zero on the circle") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    const auto g = build_grid(circ, 16, 15);
    const auto spec = fiber_spectrum(1, 2, g.fiber);
    const auto S0 = renormalize(assemble_operator(g, OperatorKind::HSa, 0.1), spec.lambda(0), 0.1);
    CHECK(std::abs(sym_eig(Mat(S0.symmetrized())).values(0)) < 1e-9);
    CHECK(S0.eps.value() == 0.1);
    CHECK_THROWS_AS(renormalize(S0, 1.0, 0.0), InvalidArgument);
  }

  TEST_CASE("Sobolev norms are ordered and vanish only at zero") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    const auto g = build_grid(circ, 16, 15);
    SobolevNorm sn(g);
    const auto fields = random_test_fields(g, 5, 7);
    for (const Vec& f : fields) {
      CHECK(sn(f, 0) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(sn(f, 0) < sn(f, 1));
      CHECK(sn(f, 1) < sn(f, 2));
    }
    CHECK(sn(Vec::Zero(g.size()), 2) == 0.0);
    CHECK_THROWS_AS(sn(fields[0], 3), NotSupported);
  }

  TEST_CASE("random fields are reproducible from the seed") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    const auto g = build_grid(circ, 16, 15);
    const auto a = random_test_fields(g, 3, 11), b = random_test_fields(g, 3, 11), c = random_test_fields(g, 3, 12);
    for (int i = 0; i < 3; ++i) CHECK((a[i] - b[i]).norm() == 0.0);
    CHECK((a[0] - c[0]).norm() > 0.1);
  }

  TEST_CASE("residual operator stays bounded in H1 as eps shrinks") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    const auto g = build_grid(circ, 32, 15);
    double prev = 0;
    for (double eps : {0.2, 0.1, 0.05}) {
      const double n = h1_operator_norm(g, residual_r_eps(g, eps));
      CHECK(std::isfinite(n));
      if (prev > 0) CHECK(n < 3 * prev);
      prev = n;
    }
  }

  TEST_CASE("symmetry bases are invariant subspaces of the operators") {
    SubmanifoldModel helix(CurveInSpace::constant(0.5, 0.3));
    const auto g = build_grid(helix, 16, 9, 8);
    const auto bases = symmetry_bases(g, false);
    int cols = 0;
    for (const auto& Q : bases) cols += Q.cols();
    CHECK(cols == g.size());
    CHECK(invariance_defect(assemble_operator(g, OperatorKind::HSa, 0.2).symmetrized(), bases) < 1e-11);
  }

  TEST_CASE("sparse coordinate helpers: weighted symmetrization") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    const auto g = build_grid(circ, 8, 9);
    const auto A = assemble_operator(g, OperatorKind::DeltaH);
    const Vec f = Vec::LinSpaced(g.size(), 0, 1);
    const Vec s = g.weights.cwiseSqrt();
    // W^{-1/2} K W^{-1/2} (W^{1/2} f) = W^{1/2} A f
    CHECK((A.symmetrized() * s.cwiseProduct(f) - s.cwiseProduct(A.apply(f))).norm() < 1e-10);
  }
}
