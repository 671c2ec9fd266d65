#pragma once

// Salt-and-pepper corruption.
//
// Positions are linear row-major indices p = i * n + j. With N = d * n and
// k = floor(ratio * N), the first k steps of a Fisher-Yates shuffle of
// [0, N) pick the positions: at step t an index is drawn uniformly from
// [t, N) with Rng::below and swapped into slot t. Immediately after each
// draw one Rng::coin() chooses the high value (true) or the low value.

#include <grmf/core.hpp>
#include <grmf/random.hpp>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace grmf::harness {

struct CorruptionSpec {
  double ratio = 0.0;
  std::uint64_t seed = 0;
  double low = 0.0;
  double high = 255.0;
};

struct CorruptionPlan {
  std::vector<std::size_t> positions;  // row-major, distinct
  std::vector<double> values;
};

inline std::size_t corrupted_count(std::size_t total, double ratio) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(total)));
}

inline CorruptionPlan plan_corruption(Eigen::Index rows, Eigen::Index cols, const CorruptionSpec& spec) {
  if (!(spec.ratio >= 0.0 && spec.ratio <= 1.0)) throw std::invalid_argument("corruption ratio must be in [0, 1]");
  const std::size_t total = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  const std::size_t k = corrupted_count(total, spec.ratio);
  std::vector<std::size_t> index(total);
  std::iota(index.begin(), index.end(), std::size_t{0});
  Rng rng(spec.seed);
  CorruptionPlan plan;
  plan.positions.reserve(k);
  plan.values.reserve(k);
  for (std::size_t t = 0; t < k; ++t) {
    const std::size_t pick = t + static_cast<std::size_t>(rng.below(total - t));
    std::swap(index[t], index[pick]);
    plan.positions.push_back(index[t]);
    plan.values.push_back(rng.coin() ? spec.high : spec.low);
  }
  return plan;
}

inline Matrix corrupt_salt_pepper(const Matrix& Y, const CorruptionSpec& spec) {
  const CorruptionPlan plan = plan_corruption(Y.rows(), Y.cols(), spec);
  Matrix out = Y;
  const auto n = static_cast<std::size_t>(Y.cols());
  for (std::size_t t = 0; t < plan.positions.size(); ++t)
    out(static_cast<Eigen::Index>(plan.positions[t] / n), static_cast<Eigen::Index>(plan.positions[t] % n)) =
        plan.values[t];
  return out;
}

}  // namespace grmf::harness
