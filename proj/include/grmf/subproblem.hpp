#pragma once

// Penalized robust regression
//
//   min_x  sum_i sqrt((b_i - a_i^T x)^2 + eps) + lambda1 P1(x) + lambda2 P2(x) + lambda3 P3(x)
//
// solved by DC programming (truncated penalties linearized at the previous
// iterate, leaving l1 terms on the active sets F and E) with an ADMM inner
// loop over coordinates x_l, pair variables x_ll' = x_l - x_l' and duals.

#include <grmf/core.hpp>
#include <grmf/error.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace grmf {

struct DcIterationRecord {
  double majorized_objective;  // S^(m) at the new iterate
  double objective;            // S at the new iterate
  int admm_iterations;
  double consensus_residual;  // max |x_l - x_l' - x_ll'| over E at ADMM exit
};

struct DcTrace {
  double initial_objective = 0.0;
  std::vector<DcIterationRecord> iterations;
  // Set when the last ADMM solution increased S and was discarded.
  bool rejected_ascent = false;
};

struct DcResult {
  Vector x;
  DcTrace trace;
};

inline double consensus_residual(const SubproblemState& s) {
  double worst = 0.0;
  for (const Edge e : s.active.E) worst = std::max(worst, std::abs(s.x[e.lo] - s.x[e.hi] - s.pairs[e]));
  return worst;
}

/// S^(m)(x) for active sets taken at the expansion point, without the
/// constant offsets of the linearization.
inline double majorized_objective(const Matrix& A, const VectorRef& b, const VectorRef& x, const ActiveSets& active,
                                  const HyperParams& h) {
  double f = h.variant == Variant::GMF_L2 ? squared_loss(A, b, x) : smooth_abs_loss(A, b, x, h.epsilon);
  for (const int l : active.F) f += h.lambda1 / h.tau1 * std::abs(x[l]);
  for (const Edge e : active.E) f += h.lambda2 / h.tau2 * std::abs(x[e.lo] - x[e.hi]);
  if (h.variant == Variant::NGRMF) {
    for (const int l : active.N) f += h.lambda3 * x[l] * x[l];
  } else {
    f += h.lambda3 * x.squaredNorm();
  }
  return f;
}

namespace detail {

// Per-row curvature weight of the quadratic majorant: D_i^{-1/2} for the
// smoothed l1 loss, the constant 2 for the squared loss.
inline Vector loss_weights(const Vector& D, Variant variant) {
  if (variant == Variant::GMF_L2) return Vector::Constant(D.size(), 2.0);
  return D.cwiseSqrt().cwiseInverse();
}

// Closed-form minimizer of the augmented Lagrangian in x_l with all other
// variables fixed. `residual` must hold b - A x for the current x.
inline double coordinate_minimizer(int l, const Matrix& A, const Vector& residual, const Vector& weights,
                                   const SubproblemState& s, const VectorRef& x_ref, const HyperParams& h) {
  double alpha = 0.0;
  double gamma_star = 0.0;
  const double xl = s.x[l];
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const double a = A(i, l);
    alpha += weights[i] * a * a;
    gamma_star += weights[i] * a * (residual[i] + a * xl);
  }
  const double kappa = h.variant == Variant::NGRMF ? (x_ref[l] < 0 ? 1.0 : 0.0) : 1.0;
  alpha += 2.0 * h.lambda3 * kappa;

  int degree = 0;
  for (const Edge e : s.active.E) {
    if (e.lo != l && e.hi != l) continue;
    const double sigma = e.lo == l ? 1.0 : -1.0;
    const int other = e.lo == l ? e.hi : e.lo;
    gamma_star += -sigma * s.duals[e] + s.nu * (s.x[other] + sigma * s.pairs[e]);
    ++degree;
  }
  if (degree > 0) alpha += s.nu * degree;

  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw NumericalError("coordinate " + std::to_string(l) + ": non-positive curvature alpha = " +
                         std::to_string(alpha));
  const double gamma = std::abs(x_ref[l]) < h.tau1 ? soft_threshold(gamma_star, h.lambda1 / h.tau1) : gamma_star;
  return gamma / alpha;
}

inline Vector irls_weights(const Matrix& A, const VectorRef& b, const VectorRef& x, double epsilon) {
  return (b - A * x).array().square() + epsilon;
}

}  // namespace detail

/// New value of x_l (0-based) given the state's current IRLS weights and the
/// freshest values of the other coordinates.
inline double update_coordinate(int l, const Matrix& A, const VectorRef& b, const SubproblemState& s,
                                const VectorRef& x_ref, const HyperParams& h) {
  detail::check_dims(A, b, s.x);
  if (l < 0 || l >= s.x.size()) throw std::out_of_range("coordinate index out of range");
  if (s.irls_weights.size() != b.size()) throw std::invalid_argument("IRLS weights do not match b");
  const Vector residual = b - A * s.x;
  return detail::coordinate_minimizer(l, A, residual, detail::loss_weights(s.irls_weights, h.variant), s, x_ref, h);
}

/// New value of the pair variable x_{lo,hi}; pairs outside E keep their value.
inline double update_pair(int lo, int hi, const SubproblemState& s, const HyperParams& h) {
  if (!s.active.in_E(lo, hi)) return s.pairs.at(lo, hi);
  return soft_threshold(s.duals.at(lo, hi) + s.nu * (s.x[lo] - s.x[hi]), h.lambda2 / h.tau2) / s.nu;
}

/// Dual ascent on every constraint in E followed by nu <- rho * nu.
inline SubproblemState update_duals(SubproblemState s, const HyperParams& h) {
  for (const Edge e : s.active.E) s.duals[e] += s.nu * (s.x[e.lo] - s.x[e.hi] - s.pairs[e]);
  s.nu *= h.rho;
  return s;
}

/// Minimizes the majorized objective S^(m) for fixed active sets. Each
/// iteration refreshes the IRLS weights, sweeps the coordinates in order
/// (Gauss-Seidel), updates the pair variables, then the duals and nu.
inline SubproblemState admm_solve(const Matrix& A, const VectorRef& b, const ActiveSets& active,
                                  SubproblemState state, const VectorRef& x_ref, const HyperParams& h) {
  detail::check_dims(A, b, state.x);
  const int r = static_cast<int>(state.x.size());
  if (x_ref.size() != r) throw std::invalid_argument("x_ref has wrong length");
  if (state.pairs.rank() != r || state.duals.rank() != r)
    throw std::invalid_argument("pair/dual tables do not match the rank");
  state.active = active;

  const double consensus_tol = std::max(10.0 * h.eps_admm, 1e-5);
  Vector residual(b.size());
  for (int k = 1; k <= h.max_admm; ++k) {
    const Vector x_prev = state.x;
    residual = b - A * state.x;
    state.irls_weights = residual.array().square() + h.epsilon;
    const Vector weights = detail::loss_weights(state.irls_weights, h.variant);

    for (int l = 0; l < r; ++l) {
      const double updated = detail::coordinate_minimizer(l, A, residual, weights, state, x_ref, h);
      const double delta = updated - state.x[l];
      if (delta != 0.0) {
        residual -= delta * A.col(l);
        state.x[l] = updated;
      }
    }
    for (const Edge e : active.E) state.pairs[e] = update_pair(e.lo, e.hi, state, h);
    const double consensus = consensus_residual(state);
    state = update_duals(std::move(state), h);
    state.iterations = k;

    if (!state.x.allFinite() || !std::isfinite(state.nu))
      throw NumericalError("ADMM iteration " + std::to_string(k) + ": non-finite iterate");
    if ((state.x - x_prev).squaredNorm() <= h.eps_admm && consensus <= consensus_tol) break;
  }
  return state;
}

/// DC outer loop: rebuild the active sets at the current iterate, reset pair
/// variables and duals, and minimize the majorized problem by ADMM until the
/// iterate stops moving. A step that increases S is discarded and ends the
/// loop, so the recorded objective sequence is non-increasing.
inline DcResult dc_solve(const Matrix& A, const VectorRef& b, const VectorRef& x0, const HyperParams& h) {
  h.validate();
  detail::check_dims(A, b, x0);
  if (!x0.allFinite()) throw std::invalid_argument("x0 contains non-finite values");
  const int r = static_cast<int>(x0.size());

  DcResult result{x0, {}};
  double objective = subproblem_objective(A, b, result.x, h);
  result.trace.initial_objective = objective;

  SubproblemState state;
  state.x = x0;
  state.pairs = PairValues(r);
  for (int l = 0; l < r; ++l)
    for (int k = l + 1; k < r; ++k) state.pairs.at(l, k) = x0[l] - x0[k];
  state.duals = PairValues(r);

  for (int m = 1; m <= h.max_dc; ++m) {
    const Vector x_ref = result.x;
    ActiveSets active = active_sets(x_ref, h.tau1, h.tau2, h.variant);
    // Without a grouping weight the pair terms vanish from S^(m); splitting
    // them would only slow the coordinate sweeps down as nu grows.
    if (h.lambda2 == 0.0) active.E.clear();
    for (const Edge e : active.E) state.pairs[e] = x_ref[e.lo] - x_ref[e.hi];
    state.duals.fill(0.0);
    state.nu = h.nu0;
    state.x = x_ref;

    try {
      state = admm_solve(A, b, active, std::move(state), x_ref, h);
    } catch (const NumericalError& err) {
      throw NumericalError("DC iteration " + std::to_string(m) + ": " + err.what());
    }

    const double next_objective = subproblem_objective(A, b, state.x, h);
    if (!std::isfinite(next_objective))
      throw NumericalError("DC iteration " + std::to_string(m) + ": non-finite objective");
    if (next_objective > objective) {
      result.trace.rejected_ascent = true;
      break;
    }

    const double step = (state.x - result.x).squaredNorm();
    result.x = state.x;
    objective = next_objective;
    result.trace.iterations.push_back({majorized_objective(A, b, result.x, active, h), objective, state.iterations,
                                       consensus_residual(state)});
    if (step <= h.eps_dc) break;
  }
  return result;
}

}  // namespace grmf
