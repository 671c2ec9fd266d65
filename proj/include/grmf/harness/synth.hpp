#pragma once

// Synthetic low-rank data with grouped, partly sparse, non-negative factors.
//
// Each factor row gets G distinct centers c_1 < ... < c_G with c_1 drawn from
// [1, 2) and successive gaps from [1, 1.5); round(zero_fraction * r) of its
// coordinates (at most r - G) are exactly 0 and the rest are assigned to the
// centers so every center is used. U V^T is then scaled by c = 255 / max so
// Y_clean lies in [0, 255] and stays exactly rank r; the returned truth
// factors carry sqrt(c) each.

#include <grmf/core.hpp>
#include <grmf/random.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace grmf::harness {

struct SynthSpec {
  int d = 64;
  int n = 64;
  int rank = 4;
  int groups = 2;
  double zero_fraction = 0.0;
  double noise_sigma = 0.0;  // optional Gaussian noise on the observed copy
  std::uint64_t seed = 0;
};

struct SynthData {
  Matrix clean;
  Matrix observed;  // clean + noise, clipped to [0, 255]; equals clean when noise_sigma == 0
  FactorPair truth;
};

namespace detail {

inline void fill_grouped_row(Matrix& M, Eigen::Index i, int groups, int zeros, Rng& rng) {
  const int r = static_cast<int>(M.cols());
  std::vector<double> centers(groups);
  centers[0] = rng.uniform(1.0, 2.0);
  for (int g = 1; g < groups; ++g) centers[g] = centers[g - 1] + rng.uniform(1.0, 1.5);

  // Random permutation of coordinates: first `zeros` are zero, the next
  // `groups` take one center each, the rest take a random center.
  std::vector<int> perm(r);
  std::iota(perm.begin(), perm.end(), 0);
  for (int t = 0; t + 1 < r; ++t) std::swap(perm[t], perm[t + static_cast<int>(rng.below(r - t))]);
  for (int t = 0; t < r; ++t) {
    const int l = perm[t];
    if (t < zeros) {
      M(i, l) = 0.0;
    } else if (t < zeros + groups) {
      M(i, l) = centers[t - zeros];
    } else {
      M(i, l) = centers[rng.below(groups)];
    }
  }
}

}  // namespace detail

/// Smallest gap between distinct group values in any truth row, divided by
/// the default grouping threshold 0.05 * sqrt(mean Y_clean).
inline double synth_separation_ratio(const SynthData& data) {
  const double tau = 0.05 * std::sqrt(data.clean.mean());
  double gap = std::numeric_limits<double>::infinity();
  auto scan = [&](const Matrix& M) {
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      std::vector<double> v;
      for (Eigen::Index l = 0; l < M.cols(); ++l)
        if (M(i, l) != 0.0) v.push_back(M(i, l));
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
      for (std::size_t k = 1; k < v.size(); ++k) gap = std::min(gap, v[k] - v[k - 1]);
    }
  };
  scan(data.truth.U);
  scan(data.truth.V);
  return gap / tau;
}

inline SynthData synth_lowrank(const SynthSpec& spec) {
  if (spec.d < 1 || spec.n < 1 || spec.rank < 1 || spec.rank > std::min(spec.d, spec.n))
    throw std::invalid_argument("synth_lowrank: need 1 <= rank <= min(d, n)");
  if (spec.groups < 1 || spec.groups > spec.rank)
    throw std::invalid_argument("synth_lowrank: need 1 <= groups <= rank");
  if (!(spec.zero_fraction >= 0.0 && spec.zero_fraction < 1.0))
    throw std::invalid_argument("synth_lowrank: zero_fraction must be in [0, 1)");
  if (!(spec.noise_sigma >= 0.0)) throw std::invalid_argument("synth_lowrank: noise_sigma must be >= 0");

  const int zeros = std::min(static_cast<int>(std::lround(spec.zero_fraction * spec.rank)), spec.rank - spec.groups);
  Rng rng(spec.seed);
  SynthData out;
  out.truth.U.resize(spec.d, spec.rank);
  out.truth.V.resize(spec.n, spec.rank);
  for (int i = 0; i < spec.d; ++i) detail::fill_grouped_row(out.truth.U, i, spec.groups, zeros, rng);
  for (int j = 0; j < spec.n; ++j) detail::fill_grouped_row(out.truth.V, j, spec.groups, zeros, rng);

  const Matrix product = out.truth.U * out.truth.V.transpose();
  const double peak = product.maxCoeff();
  if (!(peak > 0.0)) throw std::invalid_argument("synth_lowrank: degenerate factors");
  const double scale = 255.0 / peak;
  out.truth.U *= std::sqrt(scale);
  out.truth.V *= std::sqrt(scale);
  out.clean = product * scale;

  out.observed = out.clean;
  if (spec.noise_sigma > 0.0) {
    for (Eigen::Index i = 0; i < out.observed.rows(); ++i)
      for (Eigen::Index j = 0; j < out.observed.cols(); ++j)
        out.observed(i, j) = std::clamp(out.observed(i, j) + spec.noise_sigma * rng.normal(), 0.0, 255.0);
  }
  if (spec.groups > 1 && synth_separation_ratio(out) < 4.0)
    throw std::invalid_argument("synth_lowrank: group centers closer than 4 * tau2 for this configuration");
  return out;
}

}  // namespace grmf::harness
