#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tubelab/discretize.hpp"
#include "tubelab/fiber.hpp"
#include "tubelab/geometry.hpp"

namespace tubelab {

// Exact spectral calculus for a DiscreteOperator: apply(t, f) = e^{-tA/2} f.
// On q = 1 grids an operator symmetric under the fiber reflection w -> -w is
// split into even and odd halves by an explicit fold, so fields of one parity
// never pick up roundoff in the other.
class Propagator {
 public:
  enum class Method { Auto, Dense, Blocks };

  explicit Propagator(const DiscreteOperator& A, const ProductGrid* grid = nullptr,
                      Method method = Method::Auto);

  // e^{-t(A - shift)/2} f. The shift rescales fast-decaying results so they
  // stay representable; spectral coefficients that are exactly zero stay zero.
  Vec apply(double t, const Vec& f, double shift = 0.0) const;
  const Vec& eigenvalues() const { return values_; }
  double lambda_min() const { return values_(0); }
  // Sasaki-orthonormal eigenfield k.
  Vec eigenfield(int k) const;
  const std::string& method() const { return method_; }
  int size() const { return static_cast<int>(values_.size()); }

 private:
  struct Part {
    Vec values;
    Mat vectors;  // Euclidean-orthonormal, in this part's coordinates
  };
  void fold(const Vec& g, Vec& even, Vec& odd) const;
  Vec unfold(const Vec& even, const Vec& odd) const;

  Vec sqrtw_;
  Vec values_;
  std::vector<Part> parts_;  // one part, or even and odd halves
  std::vector<std::pair<int, int>> order_;  // sorted index -> (part, column)
  int n_base_ = 0, n_fiber_ = 0;
  std::string method_;
};

Vec propagate(const DiscreteOperator& A, double t, const Vec& f);

// E0 e^{-t DeltaL/2} E0 f, re-tensored with the ground state.
Vec limit_propagate(double t, const Vec& f, const FiberSpectrum& spec,
                    const Propagator& base_heat);

// (A + alpha)^{-1} w for A = H0(eps); indefinite systems raise
// CoercivityViolation.
Vec resolvent_minimizer(const DiscreteOperator& A, double alpha, const Vec& w);

// E0 (DeltaL + alpha)^{-1} E0 w, re-tensored with the ground state.
Vec limit_resolvent(const FiberSpectrum& spec, const DiscreteOperator& base_lap, double alpha,
                    const Vec& w);

// 1/2 (q0(f) + alpha |f|^2) - <w, f>.
double variational_functional(const DiscreteOperator& A, double alpha, const Vec& w,
                              const Vec& f);

// Nodal data phi_k(w) * p(theta), theta = 2 pi x / period, with
// p = sum_n base_cos[n] cos(n theta) + sum_n base_sin[n] sin((n+1) theta).
struct FieldSpec {
  int fiber_mode = 0;
  std::vector<double> base_cos{1.0};
  std::vector<double> base_sin;
  Vec evaluate(const ProductGrid& grid, const FiberSpectrum& spec) const;
  Vec base_profile(const ProductGrid& grid) const;
};

struct SweepOptions {
  std::vector<double> eps;      // strictly decreasing
  std::vector<double> t_grid;
  std::vector<int> norms{0, 1, 2};
  MetricKind metric = MetricKind::Induced;
  int n_base = 64;
  int n_fiber = 31;
  int n_angular = 32;
  FieldSpec u0;
  std::optional<FieldSpec> u1;  // u(eps) = u0 + eps u1
  bool resolution_check = true;
  int workers = 1;
};

struct SweepRecord {
  double eps = 0;
  Vec t;
  std::array<Vec, 3> error;  // by norm order
  std::array<double, 3> sup{0, 0, 0};
  double runtime = 0;
};

struct SweepResult {
  std::vector<SweepRecord> records;
  std::vector<int> norms;
  std::array<double, 3> order{NAN, NAN, NAN};
  std::array<double, 3> r_squared{NAN, NAN, NAN};
  double spatial_error = NAN;
  double lambda0 = 0, lambda1 = 0;
  int grid_size = 0;
  std::string metric;
};

std::vector<double> default_t_grid();

// Least-squares slope and R^2 of log(y) against log(x).
std::pair<double, double> loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

SweepResult convergence_sweep(const SubmanifoldModel& model, const SweepOptions& opt);

// Observable on the ambient space, evaluated at ambient points.
using Observable = std::function<double(const Vec&)>;

// Conditioned marginal through the semigroup ratio, evaluated on the base
// (fiber coordinate 0) for every base node.
class ConditionalFlow {
 public:
  ConditionalFlow(const ProductGrid& grid, double eps, int n_modes = 2);
  Vec evaluate(double T, double t, const Observable& f) const;
  // Value at the base node nearest to x.
  double at(double T, double t, const Observable& f, double x) const;
  const ProductGrid& grid() const { return grid_; }
  const Propagator& propagator() const { return prop_; }

 private:
  Vec center_values(const Vec& field) const;
  ProductGrid grid_;
  double eps_;
  FiberSpectrum spec_;
  Propagator prop_;
  FlatEmbedding emb_;
  Vec sqrt_rho_;
};

Vec conditional_flow_operator(const SubmanifoldModel& model, double eps, double T, double t,
                              const Observable& f, int n_base = 64, int n_fiber = 31);

}  // namespace tubelab
