#pragma once

#include <grmf/core.hpp>
#include <grmf/error.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace grmf {

/// Top-r singular triplets: Y ~= left * diag(singular_values) * right^T.
struct SvdResult {
  Vector singular_values;  // descending, non-negative
  Matrix left;             // d x r, orthonormal columns
  Matrix right;            // n x r, orthonormal columns

  int rank() const { return static_cast<int>(singular_values.size()); }
  Matrix reconstruct() const { return left * singular_values.asDiagonal() * right.transpose(); }
};

namespace detail {

// Completes the columns of Q flagged in `missing` to an orthonormal set by
// Gram-Schmidt against the canonical basis.
inline void complete_orthonormal(Matrix& Q, const std::vector<bool>& missing) {
  const Eigen::Index m = Q.rows();
  Eigen::Index candidate = 0;
  for (Eigen::Index k = 0; k < Q.cols(); ++k) {
    if (!missing[k]) continue;
    for (; candidate < m; ++candidate) {
      Vector v = Vector::Unit(m, candidate);
      for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index j = 0; j < Q.cols(); ++j)
          if (j != k && (!missing[j] || j < k)) v -= Q.col(j).dot(v) * Q.col(j);
      const double norm = v.norm();
      if (norm > 1e-8) {
        Q.col(k) = v / norm;
        ++candidate;
        break;
      }
    }
  }
}

}  // namespace detail

/// Rank-r truncated SVD by one-sided (Hestenes) Jacobi rotations applied to
/// the columns of Y, or of Y^T when Y is wide.
inline SvdResult truncated_svd(const Matrix& Y, int r, int max_sweeps = 80) {
  validate_data(Y);
  const Eigen::Index min_dim = std::min(Y.rows(), Y.cols());
  if (r < 1 || r > min_dim)
    throw std::invalid_argument("truncated_svd: rank " + std::to_string(r) + " outside [1, " +
                                std::to_string(min_dim) + "]");

  const bool transposed = Y.cols() > Y.rows();
  Matrix W = transposed ? Matrix(Y.transpose()) : Y;  // tall: m x p with m >= p
  const Eigen::Index p = W.cols();
  Matrix V = Matrix::Identity(p, p);

  constexpr double tol = 1e-15;
  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    converged = true;
    for (Eigen::Index i = 0; i + 1 < p; ++i) {
      for (Eigen::Index j = i + 1; j < p; ++j) {
        const double alpha = W.col(i).squaredNorm();
        const double beta = W.col(j).squaredNorm();
        const double gamma = W.col(i).dot(W.col(j));
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Eigen::Index k = 0; k < W.rows(); ++k) {
          const double wi = W(k, i), wj = W(k, j);
          W(k, i) = c * wi - s * wj;
          W(k, j) = s * wi + c * wj;
        }
        for (Eigen::Index k = 0; k < p; ++k) {
          const double vi = V(k, i), vj = V(k, j);
          V(k, i) = c * vi - s * vj;
          V(k, j) = s * vi + c * vj;
        }
      }
    }
  }
  if (!converged) throw NumericalError("truncated_svd: Jacobi sweeps did not converge");

  Vector sigma(p);
  for (Eigen::Index k = 0; k < p; ++k) sigma[k] = W.col(k).norm();
  std::vector<Eigen::Index> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return sigma[a] > sigma[b]; });

  SvdResult out;
  out.singular_values.resize(r);
  Matrix tall_left(W.rows(), r), small_right(p, r);
  std::vector<bool> missing(r, false);
  const double floor = std::max(sigma[order[0]], 1.0) * 1e-14;
  for (int k = 0; k < r; ++k) {
    const Eigen::Index src = order[k];
    out.singular_values[k] = sigma[src];
    small_right.col(k) = V.col(src);
    if (sigma[src] > floor) {
      tall_left.col(k) = W.col(src) / sigma[src];
    } else {
      tall_left.col(k).setZero();
      missing[k] = true;
    }
  }
  detail::complete_orthonormal(tall_left, missing);

  if (transposed) {
    out.left = std::move(small_right);
    out.right = std::move(tall_left);
  } else {
    out.left = std::move(tall_left);
    out.right = std::move(small_right);
  }
  return out;
}

}  // namespace grmf
