#include "tubelab/spectral.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "tubelab/errors.hpp"

namespace tubelab {

SymmetricEigen sym_eig(const Eigen::MatrixXd& A) {
  const int n = static_cast<int>(A.rows());
  if (A.cols() != n) throw InvalidArgument("sym_eig needs a square matrix");
  SymmetricEigen out;
  out.vectors = 0.5 * (A + A.transpose());
  out.values.resize(n);
  if (n == 0) return out;
  if (!out.vectors.allFinite()) throw NumericalError("non-finite matrix entries");
  int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, out.vectors.data(), n,
                            out.values.data());
  if (info != 0) throw NumericalError("dsyevd failed with info " + std::to_string(info));
  // fix the sign of each vector so results do not depend on LAPACK internals
  for (int j = 0; j < n; ++j) {
    Eigen::Index i;
    out.vectors.col(j).cwiseAbs().maxCoeff(&i);
    if (out.vectors(i, j) < 0) out.vectors.col(j) *= -1;
  }
  return out;
}

double invariance_defect(const SpMat& B, const std::vector<Eigen::MatrixXd>& bases) {
  double scale = 0;
  for (int k = 0; k < B.outerSize(); ++k)
    for (SpMat::InnerIterator it(B, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
  if (scale == 0) return 0;
  double worst = 0;
  for (const auto& Q : bases) {
    Eigen::MatrixXd BQ = B * Q;
    Eigen::MatrixXd r = BQ - Q * (Q.transpose() * BQ);
    worst = std::max(worst, r.cwiseAbs().maxCoeff() / scale);
  }
  return worst;
}

SymmetricEigen block_eig(const SpMat& B, const std::vector<Eigen::MatrixXd>& bases,
                         double tol) {
  const int n = static_cast<int>(B.rows());
  int total = 0;
  for (const auto& Q : bases) total += static_cast<int>(Q.cols());
  if (total != n) throw InvalidArgument("block bases do not span the space");
  double scale = 0;
  for (int k = 0; k < B.outerSize(); ++k)
    for (SpMat::InnerIterator it(B, k); it; ++it) scale = std::max(scale, std::abs(it.value()));

  std::vector<double> vals;
  vals.reserve(n);
  Eigen::MatrixXd vecs(n, n);
  int col = 0;
  for (const auto& Q : bases) {
    Eigen::MatrixXd BQ = B * Q;
    Eigen::MatrixXd Bb = Q.transpose() * BQ;
    if (scale > 0) {
      double defect = (BQ - Q * Bb).cwiseAbs().maxCoeff() / scale;
      if (defect > tol) throw NumericalError("symmetry block is not invariant");
    }
    SymmetricEigen e = sym_eig(Bb);
    vecs.middleCols(col, Q.cols()) = Q * e.vectors;
    for (int j = 0; j < e.values.size(); ++j) vals.push_back(e.values(j));
    col += static_cast<int>(Q.cols());
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return vals[a] < vals[b]; });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (int j = 0; j < n; ++j) {
    out.values(j) = vals[order[j]];
    out.vectors.col(j) = vecs.col(order[j]);
  }
  return out;
}

std::vector<Eigen::MatrixXd> fourier_groups(int n) {
  using std::numbers::pi;
  std::vector<Eigen::MatrixXd> g;
  g.push_back(Eigen::MatrixXd::Constant(n, 1, 1.0 / std::sqrt(double(n))));
  const double c = std::sqrt(2.0 / n);
  for (int k = 1; 2 * k < n; ++k) {
    Eigen::MatrixXd Q(n, 2);
    for (int j = 0; j < n; ++j) {
      double a = 2 * pi * k * j / n;
      Q(j, 0) = c * std::cos(a);
      Q(j, 1) = c * std::sin(a);
    }
    g.push_back(std::move(Q));
  }
  if (n % 2 == 0 && n > 1) {
    Eigen::MatrixXd Q(n, 1);
    for (int j = 0; j < n; ++j) Q(j, 0) = (j % 2 ? -1.0 : 1.0) / std::sqrt(double(n));
    g.push_back(std::move(Q));
  }
  return g;
}

}  // namespace tubelab
