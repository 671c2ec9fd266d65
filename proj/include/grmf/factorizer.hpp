#pragma once

// Alternating minimization for GRMF / N-GRMF / GMF-L2: with U fixed every
// column v_j is an independent penalized regression on U, and with V fixed
// every row u_i is one on V.

#include <grmf/baselines.hpp>
#include <grmf/core.hpp>
#include <grmf/error.hpp>
#include <grmf/random.hpp>
#include <grmf/subproblem.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace grmf {

enum class InitStrategy { Svd, Random };

/// Starting factors. Svd: U = U_r S^{1/2}, V = V_r S^{1/2} from the rank-r
/// truncated SVD. Random: i.i.d. N(0, mean|Y| / r) entries from `seed`.
inline FactorPair init_factors(const Matrix& Y, int r, InitStrategy strategy = InitStrategy::Svd,
                               std::uint64_t seed = 0) {
  validate_data(Y);
  if (r < 1 || r > std::min(Y.rows(), Y.cols()))
    throw std::invalid_argument("init_factors: rank " + std::to_string(r) + " out of range");
  FactorPair f;
  if (strategy == InitStrategy::Svd) {
    const SvdResult svd = truncated_svd(Y, r);
    const Vector root = svd.singular_values.cwiseSqrt();
    f.U = svd.left * root.asDiagonal();
    f.V = svd.right * root.asDiagonal();
    return f;
  }
  Rng rng(seed);
  const double sigma = std::sqrt(Y.cwiseAbs().mean() / r);
  f.U.resize(Y.rows(), r);
  f.V.resize(Y.cols(), r);
  // Row-major fill order keeps the stream layout independent of storage order.
  for (Eigen::Index i = 0; i < f.U.rows(); ++i)
    for (int l = 0; l < r; ++l) f.U(i, l) = sigma * rng.normal();
  for (Eigen::Index j = 0; j < f.V.rows(); ++j)
    for (int l = 0; l < r; ++l) f.V(j, l) = sigma * rng.normal();
  return f;
}

inline Matrix reconstruct(const FactorPair& f) { return f.U * f.V.transpose(); }

struct FitIterationRecord {
  double objective;  // global objective after the U half-step
  double delta_u;    // ||U^(t) - U^(t-1)||_F^2
  double delta_v;
  double seconds;    // wall time of this outer iteration
};

struct FitTrace {
  double initial_objective = 0.0;
  std::vector<FitIterationRecord> iterations;
  bool converged = false;
};

enum class HalfStep { V, U };

struct FitOptions {
  int threads = 1;
  // Called after each half-step with the outer iteration (1-based) and the
  // factors as they stand at that point.
  std::function<void(int, HalfStep, const FactorPair&)> on_half_step;
};

struct FitResult {
  FactorPair factors;
  FitTrace trace;
};

namespace detail {

// Runs body(i) for i in [0, count) over `threads` contiguous blocks. The
// first failure in index order is rethrown after all workers join.
template <class Body>
void parallel_for(Eigen::Index count, int threads, Body&& body) {
  const int workers = static_cast<int>(std::clamp<Eigen::Index>(threads, 1, std::max<Eigen::Index>(count, 1)));
  if (workers == 1) {
    for (Eigen::Index i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const Eigen::Index begin = count * w / workers;
    const Eigen::Index end = count * (w + 1) / workers;
    pool.emplace_back([&, w, begin, end] {
      try {
        for (Eigen::Index i = begin; i < end; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Solves one row/column subproblem; the previous vector is kept when the new
// one does not lower the exact (unsmoothed) subproblem objective.
inline Vector solve_vector(const Matrix& A, const VectorRef& b, const VectorRef& previous, const HyperParams& h) {
  DcResult r = dc_solve(A, b, previous, h);
  if (exact_subproblem_objective(A, b, r.x, h) > exact_subproblem_objective(A, b, previous, h)) return previous;
  return std::move(r.x);
}

template <class Solve>
void half_step(Matrix& target, Eigen::Index count, int threads, int t, const char* label, Solve&& solve) {
  parallel_for(count, threads, [&](Eigen::Index k) {
    try {
      target.row(k) = solve(k).transpose();
    } catch (const NumericalError& err) {
      throw NumericalError(std::string(label) + " " + std::to_string(k) + ", outer iteration " + std::to_string(t) +
                           ": " + err.what());
    }
  });
}

}  // namespace detail

/// Alternates V- and U-updates until the relative squared Frobenius change of
/// both factors drops below delta_outer, or max_alt outer iterations.
inline FitResult fit(const Matrix& Y, const HyperParams& h, FactorPair init, const FitOptions& options = {}) {
  h.validate();
  validate_data(Y);
  init.validate();
  if (init.U.rows() != Y.rows() || init.V.rows() != Y.cols())
    throw std::invalid_argument("initial factors do not match the data shape");

  const Matrix Yt = Y.transpose();  // rows of Y as contiguous columns
  FitResult out{std::move(init), {}};
  FactorPair& f = out.factors;
  out.trace.initial_objective = global_objective(Y, f.U, f.V, h);

  for (int t = 1; t <= h.max_alt; ++t) {
    const auto start = std::chrono::steady_clock::now();
    const Matrix U_prev = f.U;
    const Matrix V_prev = f.V;

    detail::half_step(f.V, Y.cols(), options.threads, t, "V column", [&](Eigen::Index j) {
      return detail::solve_vector(U_prev, Y.col(j), V_prev.row(j).transpose(), h);
    });
    if (options.on_half_step) options.on_half_step(t, HalfStep::V, f);

    detail::half_step(f.U, Y.rows(), options.threads, t, "U row", [&](Eigen::Index i) {
      return detail::solve_vector(f.V, Yt.col(i), U_prev.row(i).transpose(), h);
    });
    if (options.on_half_step) options.on_half_step(t, HalfStep::U, f);

    const double du = (f.U - U_prev).squaredNorm();
    const double dv = (f.V - V_prev).squaredNorm();
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.trace.iterations.push_back({global_objective(Y, f.U, f.V, h), du, dv, seconds});
    if (du <= h.delta_outer * U_prev.squaredNorm() && dv <= h.delta_outer * V_prev.squaredNorm()) {
      out.trace.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace grmf
