#pragma once

// Thin wrappers over dense symmetric eigensolvers. Large partial spectra go
// through LAPACK's MRRR driver; everything else stays in Eigen.

#include <Eigen/Dense>
#include <lapacke.h>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace eigbound {

/// Raised when a numerical kernel cannot produce a meaningful result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace linalg {

struct SymmetricEigen {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // one column per value
};

/// Eigenpairs with indices [first, last] (0-based, inclusive, ascending order)
/// of the symmetric matrix `a`. Only the lower triangle is referenced.
inline SymmetricEigen eigenpairs_in_range(Eigen::MatrixXd a, Eigen::Index first,
                                          Eigen::Index last) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) throw std::invalid_argument("eigenpairs_in_range: matrix not square");
  if (first < 0 || last >= n || first > last)
    throw std::invalid_argument("eigenpairs_in_range: index range outside [0, n)");
  const lapack_int count = static_cast<lapack_int>(last - first + 1);
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, count);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(count));
  lapack_int found = 0;
  const lapack_int info = LAPACKE_dsyevr(
      LAPACK_COL_MAJOR, 'V', 'I', 'L', static_cast<lapack_int>(n), a.data(),
      static_cast<lapack_int>(n), 0.0, 0.0, static_cast<lapack_int>(first + 1),
      static_cast<lapack_int>(last + 1), 0.0, &found, out.values.data(), out.vectors.data(),
      static_cast<lapack_int>(n), support.data());
  if (info != 0 || found != count)
    throw NumericalError("dsyevr failed (info=" + std::to_string(info) + ")");
  out.values.conservativeResize(count);
  return out;
}

/// The `count` smallest eigenpairs of a symmetric matrix.
inline SymmetricEigen lowest_eigenpairs(Eigen::MatrixXd a, Eigen::Index count) {
  if (count < 1 || count > a.rows())
    throw std::invalid_argument("lowest_eigenpairs: requested " + std::to_string(count) +
                                " pairs from a matrix of order " + std::to_string(a.rows()));
  return eigenpairs_in_range(std::move(a), 0, count - 1);
}

/// Smallest `count` eigenpairs of A x = lambda B x with B symmetric positive
/// definite. Vectors are B-orthonormal.
inline SymmetricEigen lowest_generalized_eigenpairs(const Eigen::MatrixXd& a,
                                                    const Eigen::MatrixXd& b,
                                                    Eigen::Index count) {
  Eigen::LLT<Eigen::MatrixXd> chol(b);
  if (chol.info() != Eigen::Success)
    throw NumericalError("generalized eigenproblem: right-hand matrix is not positive definite");
  const Eigen::MatrixXd sym_a = 0.5 * (a + a.transpose());
  Eigen::MatrixXd reduced = chol.matrixL().solve(sym_a);
  reduced = chol.matrixL().solve(reduced.transpose()).transpose();
  SymmetricEigen eig = lowest_eigenpairs(0.5 * (reduced + reduced.transpose()), count);
  eig.vectors = chol.matrixU().solve(eig.vectors);
  return eig;
}

/// Largest eigenvalue (and optionally its B-normalized vector) of A x = lambda B x.
inline double largest_generalized_eigenvalue(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                             Eigen::VectorXd* vector = nullptr) {
  const Eigen::Index n = a.rows();
  if (n == 0) throw std::invalid_argument("largest_generalized_eigenvalue: empty matrices");
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      0.5 * (a + a.transpose()), 0.5 * (b + b.transpose()),
      vector ? Eigen::ComputeEigenvectors | Eigen::Ax_lBx : Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
  if (solver.info() != Eigen::Success)
    throw NumericalError("generalized eigenproblem did not converge");
  const double top = solver.eigenvalues()(n - 1);
  if (!std::isfinite(top)) throw NumericalError("generalized eigenvalue is not finite");
  if (vector) *vector = solver.eigenvectors().col(n - 1);
  return top;
}

}  // namespace linalg
}  // namespace eigbound
