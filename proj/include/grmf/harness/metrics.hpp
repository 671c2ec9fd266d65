#pragma once

#include <grmf/core.hpp>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace grmf::harness {

/// sum|Y_ref - Y_hat| / sum|Y_ref|.
inline double relative_mae(const Matrix& reference, const Matrix& estimate) {
  if (reference.rows() != estimate.rows() || reference.cols() != estimate.cols())
    throw std::invalid_argument("relative_mae: shape mismatch");
  const double denom = reference.cwiseAbs().sum();
  if (!(denom > 0.0)) throw std::invalid_argument("relative_mae: reference has zero l1 norm");
  return (reference - estimate).cwiseAbs().sum() / denom;
}

/// Connected components of the graph on the entries of x with an edge
/// wherever |x_l - x_l'| < threshold (chains merge transitively).
inline int count_vector_groups(const VectorRef& x, double threshold) {
  const int r = static_cast<int>(x.size());
  std::vector<int> parent(r);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  int components = r;
  for (int l = 0; l < r; ++l)
    for (int k = l + 1; k < r; ++k) {
      if (!(std::abs(x[l] - x[k]) < threshold)) continue;
      const int a = find(l), b = find(k);
      if (a != b) {
        parent[std::max(a, b)] = std::min(a, b);
        --components;
      }
    }
  return components;
}

/// Mean group count over all d + n factor vectors (rows of U and of V).
inline double count_groups(const FactorPair& f, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("count_groups: threshold must be > 0");
  double total = 0.0;
  for (Eigen::Index i = 0; i < f.U.rows(); ++i) total += count_vector_groups(f.U.row(i).transpose(), threshold);
  for (Eigen::Index j = 0; j < f.V.rows(); ++j) total += count_vector_groups(f.V.row(j).transpose(), threshold);
  return total / static_cast<double>(f.U.rows() + f.V.rows());
}

/// Fraction of factor entries with |x| <= zero_tol.
inline double sparsity_fraction(const FactorPair& f, double zero_tol = 1e-6) {
  if (zero_tol < 0.0) throw std::invalid_argument("sparsity_fraction: zero_tol must be >= 0");
  const auto zeros = (f.U.array().abs() <= zero_tol).count() + (f.V.array().abs() <= zero_tol).count();
  return static_cast<double>(zeros) / static_cast<double>(f.U.size() + f.V.size());
}

inline double negative_fraction(const FactorPair& f, double tol = 0.0) {
  const auto neg = (f.U.array() < -tol).count() + (f.V.array() < -tol).count();
  return static_cast<double>(neg) / static_cast<double>(f.U.size() + f.V.size());
}

/// One sweep cell (or one factorization run).
struct MetricsRecord {
  std::string variant;
  int rank = 0;
  double corruption_ratio = 0.0;
  std::uint64_t seed = 0;
  double relative_mae = 0.0;
  double groups_mean = 0.0;
  double sparsity_fraction = 0.0;
  int iterations = 0;
  double runtime_seconds = 0.0;
  std::string error;  // empty on success
};

}  // namespace grmf::harness
