#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <vector>

namespace tubelab {

using SpMat = Eigen::SparseMatrix<double>;

struct SymmetricEigen {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // orthonormal columns
};

// Dense symmetric eigendecomposition (LAPACK divide and conquer).
SymmetricEigen sym_eig(const Eigen::MatrixXd& A);

// Eigendecomposition of a symmetric matrix that leaves each span(Q_b)
// invariant; the Q_b have orthonormal columns and together span R^n.
// Throws NumericalError if a block is not invariant to `tol` (relative).
SymmetricEigen block_eig(const SpMat& B, const std::vector<Eigen::MatrixXd>& bases,
                         double tol = 1e-11);

// Largest relative residual ||B Q - Q (Q^T B Q)|| over the given bases.
double invariance_defect(const SpMat& B, const std::vector<Eigen::MatrixXd>& bases);

// Orthonormal real Fourier vectors on n periodic nodes, grouped by
// frequency: {1}, {cos k, sin k}, ..., {(-1)^j} (last only when n is even).
std::vector<Eigen::MatrixXd> fourier_groups(int n);

}  // namespace tubelab
