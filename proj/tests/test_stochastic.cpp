#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "tubelab/errors.hpp"
#include "tubelab/semigroup.hpp"
#include "tubelab/stochastic.hpp"

using namespace tubelab;

TEST_SUITE("stochastic") {
  TEST_CASE("Philox4x32-10 reproduces the Random123 known-answer vectors") {
    using A = std::array<std::uint32_t, 4>;
    CHECK(Philox{0}(0, 0, 0, 0) == A{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox{~0ull}(~0u, ~0u, ~0u, ~0u) == A{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox{0x299f31d0a4093822ull}(0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344) ==
          A{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
  }

  TEST_CASE("uniforms lie in (0, 1] and look uniform") {
    Philox p{42};
    double s = 0, s2 = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const auto [a, b] = p.uniforms(i, 0, 0);
      CHECK((a > 0 && a <= 1 && b > 0 && b <= 1));
      s += a + b;
      s2 += a * a + b * b;
    }
    CHECK(s / (2 * n) == doctest::Approx(0.5).epsilon(0.02));
    CHECK(s2 / (2 * n) == doctest::Approx(1.0 / 3).epsilon(0.02));
  }

  TEST_CASE("pairwise summation is accurate and order-fixed") {
    std::vector<double> x(100001);
    for (size_t i = 0; i < x.size(); ++i) x[i] = 1.0 / (1 + i);
    long double ref = 0;
    for (double v : x) ref += v;
    CHECK(std::abs(pairwise_sum(x.data(), x.size()) - static_cast<double>(ref)) < 1e-13);
    CHECK(pairwise_sum(x.data(), 0) == 0.0);
  }

  TEST_CASE("survival in a thin flat-normal tube matches the interval exit series") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    SamplerOptions o;
    o.use_potential = false;
    o.resampling = Resampling::None;
    const double eps = 0.05, T = eps * eps;
    const auto ens = sample_conditioned(circ, eps, 0.0, T, eps * eps / 20, 20000, 5, {T}, o);
    const double p = oracle::interval_survival(1.0);
    const double se = std::sqrt(p * (1 - p) / 20000);
    CHECK(std::abs(ens.survival.back() - p) < 3 * se + 0.01);
  }

  TEST_CASE("without the potential the estimator is a plain average over survivors") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    SamplerOptions o;
    o.use_potential = false;
    o.resampling = Resampling::None;
    const auto ens = sample_conditioned(circ, 0.2, 0.0, 0.2, 0.002, 3000, 9, {0.1}, o);
    const auto f = make_observable("cos_angle");
    double sum = 0;
    int alive = 0;
    for (int k = 0; k < ens.n_paths; ++k) {
      CHECK(ens.fk_log[k] == 0.0);
      if (!ens.survived[k]) continue;
      const double* X = ens.position(k, 0);
      sum += f(Eigen::Vector2d(X[0], X[1]));
      ++alive;
    }
    REQUIRE(alive > 0);
    CHECK(marginal_estimate(ens, f, 0.1).estimate == doctest::Approx(sum / alive).epsilon(1e-12));
  }

  TEST_CASE("paths do not depend on the number of workers") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    SamplerOptions one, four;
    four.workers = 4;
    const auto a = sample_conditioned(circ, 0.2, 0.3, 1.0, 0.002, 2000, 77, {0.5, 1.0}, one);
    const auto b = sample_conditioned(circ, 0.2, 0.3, 1.0, 0.002, 2000, 77, {0.5, 1.0}, four);
    CHECK(a.positions == b.positions);
    CHECK(a.log_weight == b.log_weight);
    CHECK(a.ancestor == b.ancestor);
    const auto f = make_observable("cos_angle");
    const auto ma = marginal_estimate(a, f, 0.5), mb = marginal_estimate(b, f, 0.5);
    CHECK(std::memcmp(&ma.estimate, &mb.estimate, sizeof(double)) == 0);
    CHECK(std::memcmp(&ma.std_error, &mb.std_error, sizeof(double)) == 0);
    const auto c = sample_conditioned(circ, 0.2, 0.3, 1.0, 0.002, 2000, 78, {0.5, 1.0}, one);
    CHECK(c.positions != a.positions);
  }

  TEST_CASE("Monte Carlo agrees with the operator route at moderate eps") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    const double eps = 0.2;
    const auto f = make_observable("cos_angle");
    const auto ens = sample_conditioned(circ, eps, 0.0, 1.0, eps * eps / 20, 10000, 2024, {0.5});
    const auto m = marginal_estimate(ens, f, 0.5);
    const double op = conditional_flow_operator(circ, eps, 1.0, 0.5, f)(0);
    CHECK(std::abs(m.estimate - op) < 3 * m.std_error);
    CHECK(m.ess > 50);
    CHECK_FALSE(m.low_ess);
  }

  TEST_CASE("doubling the ensemble shrinks the standard error by about 1/sqrt 2") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    SamplerOptions o;
    o.resampling = Resampling::None;
    const auto f = make_observable("cos_angle");
    double ratio = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto a = sample_conditioned(circ, 0.2, 0.0, 0.05, 0.002, 4000, seed, {0.05}, o);
      const auto b = sample_conditioned(circ, 0.2, 0.0, 0.05, 0.002, 8000, seed + 100, {0.05}, o);
      ratio += marginal_estimate(b, f, 0.05).std_error / marginal_estimate(a, f, 0.05).std_error / 5;
    }
    CHECK(ratio == doctest::Approx(1 / std::sqrt(2.0)).epsilon(0.2));
  }

  TEST_CASE("island standard error tracks the spread of independent runs") {
    // long horizon, so resampling has collapsed most genealogies
    SubmanifoldModel circ(CircleInPlane{1.0});
    const auto f = make_observable("cos_angle");
    const int R = 16;
    double s = 0, s2 = 0, se2 = 0;
    for (int r = 0; r < R; ++r) {
      const auto ens = sample_conditioned(circ, 0.2, 0.0, 1.0, 0.002, 2000, 300 + r, {0.5});
      const auto m = marginal_estimate(ens, f, 0.5);
      CHECK(m.islands == 20);
      s += m.estimate;
      s2 += m.estimate * m.estimate;
      se2 += m.std_error * m.std_error;
    }
    const double mean = s / R, sd = std::sqrt((s2 - R * mean * mean) / (R - 1));
    // sample sd from 16 runs is itself uncertain by about 18%
    CHECK(std::sqrt(se2 / R) / sd > 0.55);
    CHECK(std::sqrt(se2 / R) / sd < 1.8);
  }

  TEST_CASE("islands partition the paths and keep their own normalizers") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    SamplerOptions o;
    o.islands = 3;
    const auto ens = sample_conditioned(circ, 0.2, 0.0, 0.5, 0.002, 100, 4, {0.5}, o);
    CHECK(ens.island_start == std::vector<int>{0, 33, 66, 100});
    CHECK(ens.island_log_normalizer.size() == 3);
    CHECK(ens.island_log_normalizer[0] != ens.island_log_normalizer[1]);
    // resampling never crosses an island boundary
    for (int k = 0; k < 100; ++k) {
      const int b = k < 33 ? 0 : k < 66 ? 1 : 2;
      CHECK(ens.ancestor[k] >= ens.island_start[b]);
      CHECK(ens.ancestor[k] < ens.island_start[b + 1]);
    }
    o.resampling = Resampling::None;
    CHECK(sample_conditioned(circ, 0.2, 0.0, 0.1, 0.002, 100, 4, {0.1}, o).island_log_normalizer.size() == 1);
  }

  TEST_CASE("circle heat oracle") {
    CHECK(circle_heat_oracle(1.0, 0.3, 0.5, {0.0, 1.0}) == doctest::Approx(std::exp(-0.25) * std::cos(0.3)));
    CHECK(circle_heat_oracle(2.0, 0.3, 0.5, {0.0, 0.0, 1.0}) == doctest::Approx(std::exp(-0.25) * std::cos(0.6)));
    CHECK(circle_heat_oracle(1.0, 0.3, 0.5, {}, {1.0}) == doctest::Approx(std::exp(-0.25) * std::sin(0.3)));
    CHECK(circle_heat_oracle(1.0, 0.0, 0.5, {2.0}) == 2.0);
    CHECK(circle_heat_oracle(1.0, 0.0, 1.0, {0.0, 1.0}, {}, [](int) { return 3.0; }) ==
          doctest::Approx(std::exp(-1.5)));
  }

  TEST_CASE("argument checks") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    CHECK_THROWS_AS(sample_conditioned(circ, 0.1, 0.0, 1.0, 0.01, 10, 1, {0.5}), StepSizeError);
    CHECK_THROWS_AS(sample_conditioned(circ, 0.1, 0.0, 1.0, 0.0005, 10, 1, {0.50001}), InvalidArgument);
    CHECK_THROWS_AS(sample_conditioned(circ, 0.1, 0.0, 1.0, 0.0005, 0, 1, {0.5}), EmptyEnsemble);
    SubmanifoldModel syn(SyntheticFiberModel::make(0, 2, {{1, 2, 1, 2, 1.0}}));
    CHECK_THROWS_AS(sample_conditioned(syn, 0.1, 0.0, 1.0, 0.0005, 10, 1, {0.5}), NotSupported);
    CHECK_THROWS_AS(make_observable("tan"), InvalidArgument);
  }

  TEST_CASE("space-curve paths run and stay inside the tube") {
    SubmanifoldModel ellipse(CurveInSpace::ellipse(2.0, 1.0));
    const auto ens = sample_conditioned(ellipse, 0.2, 0.0, 0.2, 0.002, 500, 3, {0.1, 0.2});
    CHECK(ens.dim == 3);
    FlatEmbedding emb(ellipse);
    for (int k = 0; k < ens.n_paths; ++k) {
      if (!ens.survived[k]) continue;
      const double* p = ens.position(k, 1);
      // the foot-point search is local, so seed it along the whole curve
      double dist = INFINITY;
      for (double guess = 0; guess < ellipse.period(); guess += 0.5)
        dist = std::min(dist, emb.fermi(Eigen::Vector3d(p[0], p[1], p[2]), guess).second.norm());
      CHECK(dist < 0.2 * (1 + 1e-9));
    }
  }

  TEST_CASE("path dump layout") {
    SubmanifoldModel circ(CircleInPlane{1.0});
    const auto ens = sample_conditioned(circ, 0.2, 0.0, 0.1, 0.002, 7, 1, {0.05, 0.1});
    std::ostringstream os;
    write_path_dump(os, ens);
    const std::string s = os.str();
    CHECK(s.substr(0, 8) == "TLPATHS1");
    const size_t header = 8 + 8 + 8 + 8 + 8 + 4 + 4 + 2 * 8;
    CHECK(s.size() == header + 7 * (2 * 2 + 3) * 8);
    std::uint64_t n;
    std::memcpy(&n, s.data() + 8, 8);
    CHECK(n == 7);
    CHECK(ens.time_index(0.1) == 1);
    CHECK_THROWS_AS(ens.time_index(0.07), InvalidArgument);
  }
}
