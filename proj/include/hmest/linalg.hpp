#pragma once

#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

namespace hmest {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Derived>
MatrixX<typename Derived::Scalar> symmetrized(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  return (m + m.transpose()) * Scalar(0.5);
}

template <typename Derived>
typename Derived::Scalar min_eigenvalue(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() == 0) return Scalar(0);
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(symmetrized(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Ratio of extreme eigenvalues of a symmetric matrix; +inf unless PD.
template <typename Derived>
typename Derived::Scalar condition_number(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() == 0) return Scalar(1);
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(symmetrized(m), Eigen::EigenvaluesOnly);
  const Scalar lo = es.eigenvalues().minCoeff();
  if (!(lo > Scalar(0))) return std::numeric_limits<Scalar>::infinity();
  return es.eigenvalues().maxCoeff() / lo;
}

/// Accepts a symmetric matrix whose smallest eigenvalue exceeds
/// eps * trace / L. Scale-free, so the same eps works for any data units.
template <typename Derived>
bool passes_pd_gate(const Eigen::MatrixBase<Derived>& m,
                    typename Derived::Scalar eps = typename Derived::Scalar(1e-10)) {
  using Scalar = typename Derived::Scalar;
  const auto l = m.rows();
  if (l == 0 || m.cols() != l) return false;
  if (!m.allFinite()) return false;
  const Scalar trace = m.trace();
  if (!(trace > Scalar(0))) return false;
  return min_eigenvalue(m) > eps * trace / Scalar(l);
}

/// Sample covariance with divisor (n - 1) of the rows of `x` (n x p).
template <typename Derived>
MatrixX<typename Derived::Scalar> sample_covariance(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const auto n = x.rows();
  const MatrixX<Scalar> centered = x.rowwise() - x.colwise().mean();
  return (centered.transpose() * centered) / Scalar(n - 1);
}

}  // namespace hmest
