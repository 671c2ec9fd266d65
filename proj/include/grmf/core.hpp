#pragma once

// Domain types, truncated penalties, losses and objectives shared by every
// solver in the library.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace grmf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using VectorRef = Eigen::Ref<const Vector>;

enum class Variant { GRMF, NGRMF, GMF_L2 };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::GRMF: return "grmf";
    case Variant::NGRMF: return "ngrmf";
    case Variant::GMF_L2: return "gmf-l2";
  }
  return "?";
}

inline std::optional<Variant> parse_variant(std::string_view s) {
  if (s == "grmf") return Variant::GRMF;
  if (s == "ngrmf") return Variant::NGRMF;
  if (s == "gmf-l2" || s == "gmf_l2") return Variant::GMF_L2;
  return std::nullopt;
}

/// Tuning parameters, smoothing constant, ADMM penalty schedule, stopping
/// tolerances and iteration caps. Call validate() before use; every solver
/// entry point does so.
struct HyperParams {
  double lambda1 = 1.0;  // truncated-l1 sparsity weight
  double lambda2 = 1.0;  // truncated-l1 grouping weight
  double lambda3 = 1e-3; // ridge (or negative-part ridge) weight
  double tau1 = 1.0;
  double tau2 = 1.0;
  double epsilon = 1e-6;  // smoothing of |r| as sqrt(r^2 + epsilon)
  double nu0 = 1.0;
  double rho = 1.1;
  double delta_outer = 1e-4;  // relative Frobenius change for the alternating loop
  double eps_dc = 1e-6;
  double eps_admm = 1e-6;
  int max_alt = 50;
  int max_dc = 30;
  int max_admm = 100;
  Variant variant = Variant::GRMF;

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("HyperParams: ") + what);
    };
    require(std::isfinite(lambda1) && lambda1 >= 0, "lambda1 must be >= 0");
    require(std::isfinite(lambda2) && lambda2 >= 0, "lambda2 must be >= 0");
    require(std::isfinite(lambda3) && lambda3 >= 0, "lambda3 must be >= 0");
    require(std::isfinite(tau1) && tau1 > 0, "tau1 must be > 0");
    require(std::isfinite(tau2) && tau2 > 0, "tau2 must be > 0");
    require(std::isfinite(epsilon) && epsilon > 0, "epsilon must be > 0");
    require(std::isfinite(nu0) && nu0 > 0, "nu0 must be > 0");
    require(std::isfinite(rho) && rho > 1, "rho must be > 1");
    require(std::isfinite(delta_outer) && delta_outer > 0, "delta_outer must be > 0");
    require(std::isfinite(eps_dc) && eps_dc > 0, "eps_dc must be > 0");
    require(std::isfinite(eps_admm) && eps_admm > 0, "eps_admm must be > 0");
    require(max_alt >= 1, "max_alt must be >= 1");
    require(max_dc >= 1, "max_dc must be >= 1");
    require(max_admm >= 1, "max_admm must be >= 1");
  }
};

/// Defaults for pixel data in [0, 255]: unit truncated-l1 weights, a light
/// ridge and thresholds tied to the data brightness.
inline HyperParams image_defaults(const Matrix& Y, Variant variant = Variant::GRMF) {
  HyperParams h;
  h.variant = variant;
  const double mean = Y.size() > 0 ? Y.mean() : 0.0;
  const double tau = 0.05 * std::sqrt(std::max(mean, 1e-12));
  h.tau1 = tau;
  h.tau2 = tau;
  return h;
}

inline void validate_data(const Matrix& Y) {
  if (Y.rows() < 1 || Y.cols() < 1) throw std::invalid_argument("data matrix must be at least 1x1");
  if (!Y.allFinite()) throw std::invalid_argument("data matrix contains non-finite values");
}

/// U (d x r) and V (n x r); the model is U * V^T.
struct FactorPair {
  Matrix U;
  Matrix V;

  int rank() const { return static_cast<int>(U.cols()); }

  void validate() const {
    if (U.cols() != V.cols()) throw std::invalid_argument("U and V must have the same number of columns");
    if (U.cols() < 1) throw std::invalid_argument("rank must be >= 1");
    if (U.cols() > std::min(U.rows(), V.rows()))
      throw std::invalid_argument("rank exceeds min(d, n)");
    if (!U.allFinite() || !V.allFinite()) throw std::invalid_argument("factors contain non-finite values");
  }
};

// Canonical pair (lo, hi) with lo < hi, 0-based.
struct Edge {
  int lo;
  int hi;
  friend bool operator==(const Edge&, const Edge&) = default;
};

inline std::size_t pair_count(int r) { return r < 2 ? 0 : static_cast<std::size_t>(r) * (r - 1) / 2; }

inline std::size_t pair_index(int r, int lo, int hi) {
  return static_cast<std::size_t>(lo) * (2 * r - lo - 1) / 2 + static_cast<std::size_t>(hi - lo - 1);
}

/// Real values keyed by canonical pairs lo < hi of {0..r-1}, stored packed.
class PairValues {
 public:
  PairValues() = default;
  explicit PairValues(int r, double fill = 0.0) : r_(r), values_(pair_count(r), fill) {}

  int rank() const { return r_; }
  std::size_t size() const { return values_.size(); }

  double& at(int lo, int hi) { return values_[checked_index(lo, hi)]; }
  double at(int lo, int hi) const { return values_[checked_index(lo, hi)]; }
  double& operator[](Edge e) { return values_[pair_index(r_, e.lo, e.hi)]; }
  double operator[](Edge e) const { return values_[pair_index(r_, e.lo, e.hi)]; }

  void fill(double v) { std::fill(values_.begin(), values_.end(), v); }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const PairValues&, const PairValues&) = default;

 private:
  std::size_t checked_index(int lo, int hi) const {
    if (lo < 0 || hi >= r_ || lo >= hi) throw std::out_of_range("pair must satisfy 0 <= lo < hi < r");
    return pair_index(r_, lo, hi);
  }

  int r_ = 0;
  std::vector<double> values_;
};

/// Coordinates below the sparsity threshold (F), pairs below the grouping
/// threshold (E) and negative coordinates (N, N-GRMF only), all taken at a
/// DC expansion point. Indices are 0-based and sorted.
struct ActiveSets {
  std::vector<int> F;
  std::vector<Edge> E;
  std::vector<int> N;

  bool in_F(int l) const { return std::binary_search(F.begin(), F.end(), l); }
  bool in_N(int l) const { return std::binary_search(N.begin(), N.end(), l); }
  bool in_E(int lo, int hi) const {
    return std::find(E.begin(), E.end(), Edge{lo, hi}) != E.end();
  }
  int degree(int l) const {
    return static_cast<int>(std::count_if(E.begin(), E.end(), [l](Edge e) { return e.lo == l || e.hi == l; }));
  }

  friend bool operator==(const ActiveSets&, const ActiveSets&) = default;
};

/// Iterate of one DC-ADMM subproblem: coordinates, pair variables, duals,
/// penalty weight and IRLS weights D_i = (b_i - a_i^T x)^2 + epsilon.
struct SubproblemState {
  Vector x;
  PairValues pairs;
  PairValues duals;
  double nu = 1.0;
  ActiveSets active;
  Vector irls_weights;
  int iterations = 0;  // ADMM iterations that produced this state
};

inline double soft_threshold(double b, double a) {
  if (b > a) return b - a;
  if (b < -a) return b + a;
  return 0.0;
}

inline double penalty_sparsity(const VectorRef& x, double tau1) {
  double s = 0.0;
  for (Eigen::Index l = 0; l < x.size(); ++l) s += std::min(std::abs(x[l]) / tau1, 1.0);
  return s;
}

inline double penalty_grouping(const VectorRef& x, double tau2) {
  double s = 0.0;
  for (Eigen::Index l = 0; l < x.size(); ++l)
    for (Eigen::Index k = l + 1; k < x.size(); ++k) s += std::min(std::abs(x[l] - x[k]) / tau2, 1.0);
  return s;
}

inline double penalty_ridge(const VectorRef& x) { return x.squaredNorm(); }

inline double penalty_negridge(const VectorRef& x) {
  double s = 0.0;
  for (Eigen::Index l = 0; l < x.size(); ++l) {
    const double neg = std::min(x[l], 0.0);
    s += neg * neg;
  }
  return s;
}

/// lambda1 * P1 + lambda2 * P2 + lambda3 * (P3 or its negative-part form).
inline double regularizer(const VectorRef& x, const HyperParams& h) {
  const double quad = h.variant == Variant::NGRMF ? penalty_negridge(x) : penalty_ridge(x);
  return h.lambda1 * penalty_sparsity(x, h.tau1) + h.lambda2 * penalty_grouping(x, h.tau2) + h.lambda3 * quad;
}

namespace detail {

inline void check_dims(const Matrix& A, const VectorRef& b, const VectorRef& x) {
  if (A.rows() != b.size() || A.cols() != x.size())
    throw std::invalid_argument("dimension mismatch: A is " + std::to_string(A.rows()) + "x" +
                                std::to_string(A.cols()) + ", b has " + std::to_string(b.size()) +
                                ", x has " + std::to_string(x.size()));
}

}  // namespace detail

inline double smooth_abs_loss(const Matrix& A, const VectorRef& b, const VectorRef& x, double epsilon) {
  detail::check_dims(A, b, x);
  const Vector r = b - A * x;
  double s = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) s += std::sqrt(r[i] * r[i] + epsilon);
  return s;
}

inline double squared_loss(const Matrix& A, const VectorRef& b, const VectorRef& x) {
  detail::check_dims(A, b, x);
  return (b - A * x).squaredNorm();
}

inline double abs_loss(const Matrix& A, const VectorRef& b, const VectorRef& x) {
  detail::check_dims(A, b, x);
  return (b - A * x).lpNorm<1>();
}

/// Gradient of the smooth part of the DC convex majorant: smoothed loss (or
/// squared loss for GMF-L2) plus lambda3 times the (negative-part) ridge.
inline Vector smooth_part_gradient(const Matrix& A, const VectorRef& b, const VectorRef& x, const HyperParams& h) {
  detail::check_dims(A, b, x);
  const Vector r = b - A * x;
  Vector w(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i)
    w[i] = h.variant == Variant::GMF_L2 ? 2.0 * r[i] : r[i] / std::sqrt(r[i] * r[i] + h.epsilon);
  Vector g = -A.transpose() * w;
  for (Eigen::Index l = 0; l < x.size(); ++l) {
    const double q = h.variant == Variant::NGRMF ? std::min(x[l], 0.0) : x[l];
    g[l] += 2.0 * h.lambda3 * q;
  }
  return g;
}

/// S(x): smoothed l1 loss (squared loss for GMF-L2) plus the truncated
/// penalties and the ridge term of the variant.
inline double subproblem_objective(const Matrix& A, const VectorRef& b, const VectorRef& x, const HyperParams& h) {
  const double loss = h.variant == Variant::GMF_L2 ? squared_loss(A, b, x) : smooth_abs_loss(A, b, x, h.epsilon);
  return loss + regularizer(x, h);
}

/// Same as subproblem_objective but with the exact (unsmoothed) l1 loss.
inline double exact_subproblem_objective(const Matrix& A, const VectorRef& b, const VectorRef& x,
                                         const HyperParams& h) {
  const double loss = h.variant == Variant::GMF_L2 ? squared_loss(A, b, x) : abs_loss(A, b, x);
  return loss + regularizer(x, h);
}

/// ||Y - U V^T||_1 (sum of squares for GMF-L2) + R(U) + R(V), with R applied
/// to every row of U and every row of V.
inline double global_objective(const Matrix& Y, const Matrix& U, const Matrix& V, const HyperParams& h) {
  if (U.rows() != Y.rows() || V.rows() != Y.cols() || U.cols() != V.cols())
    throw std::invalid_argument("shape mismatch between Y and factors");
  const Matrix R = Y - U * V.transpose();
  double f = h.variant == Variant::GMF_L2 ? R.squaredNorm() : R.cwiseAbs().sum();
  for (Eigen::Index i = 0; i < U.rows(); ++i) f += regularizer(U.row(i).transpose(), h);
  for (Eigen::Index j = 0; j < V.rows(); ++j) f += regularizer(V.row(j).transpose(), h);
  return f;
}

inline ActiveSets active_sets(const VectorRef& x_ref, double tau1, double tau2, Variant variant) {
  ActiveSets s;
  const int r = static_cast<int>(x_ref.size());
  for (int l = 0; l < r; ++l) {
    if (std::abs(x_ref[l]) < tau1) s.F.push_back(l);
    if (variant == Variant::NGRMF && x_ref[l] < 0) s.N.push_back(l);
    for (int k = l + 1; k < r; ++k)
      if (std::abs(x_ref[l] - x_ref[k]) < tau2) s.E.push_back({l, k});
  }
  return s;
}

}  // namespace grmf
