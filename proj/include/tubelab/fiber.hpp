#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <vector>

namespace tubelab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

// Flat unit-ball fiber grid with Dirichlet boundary nodes eliminated.
//   q = 1: nodes s_j = -1 + j h, j = 1..n, h = 2/(n+1).
//   q = 2: vertex-centred polar grid, node 0 is the origin, then rings
//          r_a = a h (a = 1..n, h = 1/(n+1)) with n_angular nodes each.
// Weights are control-volume sizes; the half cells at the boundary carry
// no unknown and are kept only in boundary_weight.
struct FiberGrid {
  int codim = 1;
  int n = 0;           // interior nodes (q = 1) or rings (q = 2)
  int n_angular = 1;   // q = 2 only
  double h = 0.0;      // node spacing, radial for q = 2
  Vec weights;
  std::vector<Vec> points;
  double boundary_weight = 0.0;

  int size() const { return static_cast<int>(weights.size()); }
  double total_weight() const { return weights.sum() + boundary_weight; }
  double dphi() const;
  int node(int ring, int k) const;  // q = 2, ring >= 1, k taken mod n_angular
};

FiberGrid make_fiber_grid(int codim, int n, int n_angular = 32);

// One directional difference of the fiber energy: (f[b] - f[a]) * coef is
// the derivative along `direction` at `midpoint`, integrated over `area`.
// Index -1 marks an eliminated boundary node.
struct FiberEdge {
  int a, b;
  double coef;
  double area;
  Vec midpoint;
  Vec direction;
  bool angular;
};

std::vector<FiberEdge> fiber_edges(const FiberGrid& grid);

// Stiffness of the flat Dirichlet energy on one fiber.
SpMat fiber_stiffness(const FiberGrid& grid);

struct FiberSpectrum {
  int codim = 1;
  FiberGrid grid;
  Vec eigenvalues;   // ascending, repeated by multiplicity
  Mat eigenvectors;  // columns, orthonormal in the fiber quadrature
  std::vector<int> angular_order;
  std::vector<int> radial_order;
  std::vector<std::pair<int, int>> multiplets;  // [begin, end)
  Vec analytic_values;
  Mat analytic_vectors;  // q = 1 only, sampled at the nodes

  int mode_count() const { return static_cast<int>(eigenvalues.size()); }
  double lambda(int multiplet) const { return eigenvalues(multiplets.at(multiplet).first); }
  Vec ground_state() const { return eigenvectors.col(0); }
};

constexpr double kMultipletTol = 1e-8;

// With enforce_resolution, modes oscillating faster than a quarter of the
// grid Nyquist rate are refused.
FiberSpectrum fiber_spectrum(int codim, int n_modes, const FiberGrid& grid,
                             bool enforce_resolution = true);

// Node-centred rotation derivatives Z_{alpha mu}, alpha < mu, as sparse
// matrices on one fiber. Empty for q = 1.
std::vector<SpMat> rotation_fields(const FiberGrid& grid);

// Analytic Dirichlet eigenvalue references: q = 1 exact, q = 2 from
// Bessel zeros (ordered, with multiplicity).
Vec analytic_eigenvalues(int codim, int count);

// Fiberwise projections of base-major fields (index = base * fiber_size + j).
Vec ground_state_field(const FiberSpectrum& spec, int n_base);
Vec extract_fb(const FiberSpectrum& spec, const Vec& f);
Vec project_E0(const FiberSpectrum& spec, const Vec& f);
Vec project_multiplet(const FiberSpectrum& spec, int multiplet, const Vec& f);
// Tensor a base field with fiber mode `mode`.
Vec tensor_field(const FiberSpectrum& spec, int mode, const Vec& base);

}  // namespace tubelab
