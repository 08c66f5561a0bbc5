#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tubelab/fiber.hpp"
#include "tubelab/geometry.hpp"

namespace tubelab {

// Tensor grid on L(1): periodic base nodes x_b = b dx times a fiber grid.
// Field values are stored base-major, index = b * fiber_size + j.
struct ProductGrid {
  std::shared_ptr<const SubmanifoldModel> model;
  int n_base = 1;
  double dx = 0.0;           // base parameter spacing
  double base_weight = 1.0;  // base length element speed * dx (1 for l = 0)
  Vec base_x;
  FiberGrid fiber;
  Vec weights;

  int size() const { return static_cast<int>(weights.size()); }
  int fiber_size() const { return fiber.size(); }
  int index(int b, int j) const { return b * fiber.size() + j; }
  // Includes the fiber boundary half cells that carry no unknowns.
  double total_weight() const { return n_base * base_weight * fiber.total_weight(); }
  TubePoint point(int b, int j, double eps) const;
};

ProductGrid build_grid(const SubmanifoldModel& model, int n_base, int n_fiber,
                       int n_angular = 32);

// A symmetric operator A = W^{-1} K with respect to <f,g> = f^T W g.
struct DiscreteOperator {
  SpMat K;
  Vec w;
  std::string provenance;
  std::optional<double> eps;

  int size() const { return static_cast<int>(w.size()); }
  Vec apply(const Vec& f) const { return (K * f).cwiseQuotient(w); }
  double form(const Vec& f) const { return f.dot(K * f); }
  // W^{-1/2} K W^{-1/2}, symmetric in the Euclidean sense.
  SpMat symmetrized() const;
};

enum class FormKind { V, H, Omega, InducedEps, SasakiEps };
enum class OperatorKind { DeltaV, DeltaH, HSa, H, P };

DiscreteOperator assemble_form(const ProductGrid& grid, FormKind which, double eps = 1.0);
DiscreteOperator assemble_operator(const ProductGrid& grid, OperatorKind which,
                                   double eps = 1.0);
// Base-only Laplacian on L with the same difference stencil as DeltaH.
DiscreteOperator assemble_base_laplacian(const ProductGrid& grid);

DiscreteOperator renormalize(const DiscreteOperator& A, double lambda0, double eps);
DiscreteOperator shifted(const DiscreteOperator& A, double alpha);
DiscreteOperator combine(double a, const DiscreteOperator& A, double b,
                         const DiscreteOperator& B, std::string provenance);

// r_eps = (InducedEps - SasakiEps - Omega) / eps.
DiscreteOperator residual_r_eps(const ProductGrid& grid, double eps);

// Discrete Sobolev norms of order 0, 1, 2.
class SobolevNorm {
 public:
  explicit SobolevNorm(const ProductGrid& grid);
  double operator()(const Vec& f, int order) const;
  double squared(const Vec& f, int order) const;
  const DiscreteOperator& V() const { return V_; }
  const DiscreteOperator& H() const { return H_; }

 private:
  DiscreteOperator V_, H_;
};

double sobolev_norm(const ProductGrid& grid, const Vec& f, int order);

// Largest |f^T K f| / ||f||_1^2 over the grid.
double h1_operator_norm(const ProductGrid& grid, const DiscreteOperator& A);

// Seeded random fields, smoothed once by (I + Lap_Sa/|Lap_Sa|)^{-1} and
// scaled to unit L2 norm.
std::vector<Vec> random_test_fields(const ProductGrid& grid, int count, std::uint64_t seed);

// Product-grid bases invariant under base shifts (and fiber rotations on
// polar grids) for block eigendecompositions.
std::vector<Mat> symmetry_bases(const ProductGrid& grid, bool fiber_rotations);

}  // namespace tubelab
