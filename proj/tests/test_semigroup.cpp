#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tubelab/errors.hpp"
#include "tubelab/semigroup.hpp"
#include "tubelab/stochastic.hpp"

using namespace tubelab;

namespace {
double wnorm(const ProductGrid& g, const Vec& f) { return std::sqrt(f.dot(g.weights.cwiseProduct(f))); }
}  // namespace

TEST_SUITE("semigroup") {
  TEST_CASE("propagator: identity at zero, semigroup law, contraction") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    const auto g = build_grid(circ, 32, 15);
    const auto A = assemble_operator(g, OperatorKind::HSa, 0.3);
    const Propagator P(A, &g);
    const Vec f = random_test_fields(g, 1, 3)[0];
    CHECK((P.apply(0.0, f) - f).norm() < 1e-12);
    const Vec st = P.apply(0.3, P.apply(0.2, f)), direct = P.apply(0.5, f);
    CHECK((st - direct).norm() < 1e-12 * direct.norm());
    CHECK(wnorm(g, direct) <= wnorm(g, f));
    CHECK(P.method() == "reflection split, blocks/blocks");
  }

  TEST_CASE("dense and structured eigendecompositions agree") {
    SubmanifoldModel helix(CurveInSpace::constant(0.5, 0.3));
    const auto g = build_grid(helix, 16, 9, 8);
    const auto A = assemble_operator(g, OperatorKind::H, 0.2);
    const Propagator auto_(A, &g), dense(A, &g, Propagator::Method::Dense);
    CHECK(dense.method() == "dense");
    CHECK((auto_.eigenvalues() - dense.eigenvalues()).cwiseAbs().maxCoeff() <
          1e-10 * dense.eigenvalues().cwiseAbs().maxCoeff());
    const Vec f = random_test_fields(g, 1, 5)[0];
    CHECK((auto_.apply(0.1, f) - dense.apply(0.1, f)).norm() < 1e-10);
  }

  TEST_CASE("eigenfields are weighted-orthonormal eigenvectors") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    const auto g = build_grid(circ, 16, 15);
    const auto A = assemble_operator(g, OperatorKind::HSa, 0.2);
    const Propagator P(A, &g);
    for (int k : {0, 1, 5}) {
      const Vec v = P.eigenfield(k);
      CHECK(wnorm(g, v) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK((A.apply(v) - P.eigenvalues()(k) * v).norm() < 1e-8 * P.eigenvalues()(k));
    }
  }

  TEST_CASE("shifted application rescales by the exponential of the shift") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    const auto g = build_grid(circ, 16, 15);
    const Propagator P(assemble_operator(g, OperatorKind::HSa, 0.1), &g);
    const Vec f = random_test_fields(g, 1, 9)[0];
    const Vec a = P.apply(0.2, f, 100.0), b = std::exp(0.1 * 100.0) * P.apply(0.2, f);
    CHECK((a - b).norm() < 1e-12 * a.norm());
  }

  TEST_CASE("limit semigroup acts on base modes by the discrete heat symbol") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    const auto g = build_grid(circ, 32, 15);
    const auto spec = fiber_spectrum(1, 2, g.fiber);
    const Propagator base(assemble_base_laplacian(g));
    Vec c(32);
    for (int b = 0; b < 32; ++b) c(b) = std::cos(2 * g.base_x(b));
    const Vec f = tensor_field(spec, 0, c);
    const double t = 0.7;
    const Vec expect = std::exp(-t * oracle::periodic_symbol(2, g.dx) / 2) * f;
    CHECK((limit_propagate(t, f, spec, base) - expect).norm() < 1e-12 * f.norm());
  }

  TEST_CASE("resolvent minimizer solves the shifted system and minimizes the functional") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    const auto g = build_grid(circ, 16, 15);
    const auto spec = fiber_spectrum(1, 2, g.fiber);
    const double eps = 0.1, alpha = spec.lambda(0) + 1.5;
    const auto A = renormalize(assemble_operator(g, OperatorKind::H, eps), spec.lambda(0), eps);
    const Vec w = random_test_fields(g, 1, 1)[0];
    const Vec f = resolvent_minimizer(A, alpha, w);
    CHECK((A.apply(f) + alpha * f - w).norm() < 1e-9 * w.norm());
    const double phi = variational_functional(A, alpha, w, f);
    for (const Vec& v : random_test_fields(g, 5, 2)) CHECK(variational_functional(A, alpha, w, f + 1e-2 * v) > phi);
    // far past coercivity the shifted operator is indefinite
    CHECK_THROWS_AS(resolvent_minimizer(A, -1e4, w), CoercivityViolation);
  }

  TEST_CASE("log-log fit recovers an exact power law") {
    const auto [p, r2] = loglog_fit({0.2, 0.1, 0.05}, {3 * 0.04, 3 * 0.01, 3 * 0.0025});
    CHECK(p == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r2 == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("field spec builds the requested base profile") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    const auto g = build_grid(circ, 16, 9);
    FieldSpec fs;
    fs.base_cos = {1.0, 0.5};
    fs.base_sin = {0.25};
    const Vec p = fs.base_profile(g);
    for (int b = 0; b < 16; ++b)
      CHECK(p(b) == doctest::Approx(1 + 0.5 * std::cos(g.base_x(b)) + 0.25 * std::sin(g.base_x(b))));
    const auto spec = fiber_spectrum(1, 2, g.fiber);
    fs.fiber_mode = 5;
    CHECK_THROWS_AS(fs.evaluate(g, spec), InvalidArgument);
  }

  TEST_CASE("small sweep converges with decreasing errors in every norm") {
    SweepOptions o;
    o.eps = {0.2, 0.1, 0.05};
    o.t_grid = {0.5, 1.0};
    o.n_base = 32;
    o.n_fiber = 15;
    o.u0.base_cos = {1.0, 0.5};
    o.resolution_check = false;
    const auto r = convergence_sweep(SubmanifoldModel(CircleInPlane{1.0}), o);
    REQUIRE(r.records.size() == 3);
    for (int order : {0, 1, 2}) {
      for (int i = 1; i < 3; ++i) CHECK(r.records[i].sup[order] < r.records[i - 1].sup[order]);
      CHECK(r.order[order] > 0.8);
    }
  }

  TEST_CASE("conditioned flow preserves constants and matches the circle heat flow") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    const auto g = build_grid(circ, 64, 31);
    const ConditionalFlow flow(g, 0.05);
    CHECK(flow.at(1.0, 0.5, make_observable("one"), 0.0) == doctest::Approx(1.0).epsilon(1e-10));
    // close to the limit e^{-t/2} cos(x0) at small eps
    CHECK(flow.at(1.0, 0.5, make_observable("cos_angle"), 0.0) == doctest::Approx(std::exp(-0.25)).epsilon(0.01));
  }
}
