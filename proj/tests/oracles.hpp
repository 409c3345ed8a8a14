#pragma once

// Independent reference computations for the tests. They use Eigen (often in
// long double) or deliberately naive algorithms, never the library kernels.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "decgdmin/numerics.hpp"

namespace oracle {

using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

inline MatL to_eigen(const decgdmin::Matrix& m) {
  MatL out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

inline VecL to_eigen(const std::vector<double>& v) {
  VecL out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out(i) = v[i];
  return out;
}

inline decgdmin::Matrix from_eigen(const MatL& m) {
  decgdmin::Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(i, j) = static_cast<double>(m(i, j));
  return out;
}

/// Classical Gram–Schmidt with one reorthogonalization pass, in long double.
/// Returns Q (n×r) and R (r×r) with positive diagonal.
inline std::pair<MatL, MatL> gram_schmidt(const MatL& m) {
  const auto n = m.rows(), r = m.cols();
  MatL q = MatL::Zero(n, r), rr = MatL::Zero(r, r);
  for (Eigen::Index j = 0; j < r; ++j) {
    VecL v = m.col(j);
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index i = 0; i < j; ++i) {
        const long double c = q.col(i).dot(v);
        rr(i, j) += c;
        v -= c * q.col(i);
      }
    rr(j, j) = v.norm();
    q.col(j) = v / rr(j, j);
  }
  return {q, rr};
}

/// Solves the normal equations AᵀA b = Aᵀy in long double.
inline VecL normal_equations(const MatL& a, const VecL& y) {
  const MatL g = a.transpose() * a;
  return g.ldlt().solve(a.transpose() * y);
}

/// Largest singular value by power iteration on MᵀM, iterated until the
/// eigen-residual drops below tol (relative).
inline long double power_iteration_norm(const MatL& m, long double tol = 1e-12L, int max_iter = 100000) {
  const MatL g = m.transpose() * m;
  VecL v = VecL::Ones(g.cols()).normalized();
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += 0.01L * static_cast<long double>(i);
  v.normalize();
  long double lambda = 0;
  for (int it = 0; it < max_iter; ++it) {
    VecL w = g * v;
    lambda = v.dot(w);
    const long double resid = (w - lambda * v).norm();
    v = w.normalized();
    if (resid <= tol * std::abs(lambda)) break;
  }
  return std::sqrt(lambda);
}

/// Singular values, descending, via an Eigen SVD in long double.
inline VecL singular_values(const MatL& m) {
  Eigen::JacobiSVD<MatL> svd(m);
  return svd.singularValues();
}

/// Orthonormal basis of the top-r left singular subspace.
inline MatL top_left_singular(const MatL& m, Eigen::Index r) {
  Eigen::JacobiSVD<MatL> svd(m, Eigen::ComputeThinU);
  return svd.matrixU().leftCols(r);
}

/// SE₂ from principal angles: sin of the largest angle, via the SVD of U1ᵀU2.
inline long double subspace_distance(const MatL& u1, const MatL& u2) {
  const MatL resid = u2 - u1 * (u1.transpose() * u2);
  return singular_values(resid)(0);
}

}  // namespace oracle
