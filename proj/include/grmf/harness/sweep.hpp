#pragma once

// Grid sweeps over (method, rank, corruption ratio, seed). Each cell corrupts
// the clean source with CorruptionSpec{ratio, seed}, factorizes the corrupted
// copy and scores the reconstruction against the clean source.

#include <grmf/baselines.hpp>
#include <grmf/core.hpp>
#include <grmf/error.hpp>
#include <grmf/factorizer.hpp>
#include <grmf/harness/corruption.hpp>
#include <grmf/harness/io.hpp>
#include <grmf/harness/metrics.hpp>
#include <grmf/harness/synth.hpp>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace grmf::harness {

inline const std::vector<std::string>& sweep_methods() {
  static const std::vector<std::string> names{"grmf", "ngrmf", "gmf-l2", "tsvd"};
  return names;
}

struct SweepConfig {
  std::vector<std::string> methods{"grmf", "tsvd"};
  std::vector<int> ranks{4};
  std::vector<double> ratios{0.5};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

  std::string input;  // PGM or CSV path; synth is used when empty
  SynthSpec synth;

  // variant is set per cell. Unset thresholds follow image_defaults on the
  // corrupted matrix.
  HyperParams hyper;
  std::optional<double> tau1;
  std::optional<double> tau2;
  std::optional<double> ngrmf_lambda3;  // N-GRMF penalizes only negatives, so it often wants its own weight

  InitStrategy init = InitStrategy::Svd;
  int threads = 1;
  bool include_timing = false;

  void validate() const {
    if (methods.empty() || ranks.empty() || ratios.empty() || seeds.empty())
      throw std::invalid_argument("sweep needs at least one method, rank, ratio and seed");
    for (const auto& m : methods)
      if (std::find(sweep_methods().begin(), sweep_methods().end(), m) == sweep_methods().end())
        throw std::invalid_argument("unknown sweep method '" + m + "'");
    for (int r : ranks)
      if (r < 1) throw std::invalid_argument("sweep ranks must be >= 1");
    for (double p : ratios)
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("sweep ratios must lie in [0, 1]");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  }
};

/// `observed` is what gets corrupted; `reference` is what RMAE compares to.
/// They differ only for synthetic data with noise_sigma > 0.
struct SweepSource {
  Matrix reference;
  Matrix observed;
};

inline SweepSource sweep_source(const SweepConfig& config) {
  if (!config.input.empty()) {
    Matrix m = load_matrix(config.input);
    return {m, m};
  }
  SynthData data = synth_lowrank(config.synth);
  return {std::move(data.clean), std::move(data.observed)};
}

/// Hyperparameters used for one cell of a GRMF-family method.
inline HyperParams cell_hyper(const SweepConfig& config, Variant variant, const Matrix& corrupted) {
  const HyperParams auto_h = image_defaults(corrupted, variant);
  HyperParams h = config.hyper;
  h.variant = variant;
  h.tau1 = config.tau1.value_or(auto_h.tau1);
  h.tau2 = config.tau2.value_or(auto_h.tau2);
  if (variant == Variant::NGRMF && config.ngrmf_lambda3) h.lambda3 = *config.ngrmf_lambda3;
  return h;
}

/// Runs one cell; failures are caught and recorded in the `error` field.
inline MetricsRecord run_cell(const SweepConfig& config, const SweepSource& source, const std::string& method,
                              int rank, double ratio, std::uint64_t seed) {
  MetricsRecord rec;
  rec.variant = method;
  rec.rank = rank;
  rec.corruption_ratio = ratio;
  rec.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    const Matrix corrupted = corrupt_salt_pepper(source.observed, {ratio, seed});
    FactorPair factors;
    double tau_group = 0.0;
    if (method == "tsvd") {
      const SvdResult svd = truncated_svd(corrupted, rank);
      const Vector root = svd.singular_values.cwiseSqrt();
      factors.U = svd.left * root.asDiagonal();
      factors.V = svd.right * root.asDiagonal();
      tau_group = config.tau2.value_or(image_defaults(corrupted).tau2);
    } else {
      const HyperParams h = cell_hyper(config, *parse_variant(method), corrupted);
      FitResult fitted = fit(corrupted, h, init_factors(corrupted, rank, config.init, seed));
      factors = std::move(fitted.factors);
      rec.iterations = static_cast<int>(fitted.trace.iterations.size());
      tau_group = h.tau2;
    }
    rec.relative_mae = relative_mae(source.reference, reconstruct(factors));
    rec.groups_mean = count_groups(factors, tau_group);
    rec.sparsity_fraction = sparsity_fraction(factors);
  } catch (const NumericalError& e) {
    rec.error = std::string("numerical: ") + e.what();
  } catch (const DataError& e) {
    rec.error = std::string("data: ") + e.what();
  } catch (const std::exception& e) {
    rec.error = std::string("invalid: ") + e.what();
  }
  if (!rec.error.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rec.relative_mae = rec.groups_mean = rec.sparsity_fraction = nan;
  }
  rec.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

/// One record per (method, rank, ratio, seed), in that nesting order.
/// Cells are pulled from a shared counter by `threads` workers; each result is
/// stored at its own index so the output never depends on scheduling.
inline std::vector<MetricsRecord> run_sweep(const SweepConfig& config, const SweepSource& source) {
  config.validate();
  validate_data(source.reference);
  validate_data(source.observed);
  struct Cell {
    std::string method;
    int rank;
    double ratio;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const auto& m : config.methods)
    for (int r : config.ranks)
      for (double p : config.ratios)
        for (std::uint64_t s : config.seeds) cells.push_back({m, r, p, s});

  std::vector<MetricsRecord> out(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < cells.size();)
      out[k] = run_cell(config, source, cells[k].method, cells[k].rank, cells[k].ratio, cells[k].seed);
  };
  const int workers = static_cast<int>(std::min<std::size_t>(config.threads, std::max<std::size_t>(cells.size(), 1)));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

inline std::vector<MetricsRecord> run_sweep(const SweepConfig& config) {
  return run_sweep(config, sweep_source(config));
}

inline std::string sweep_csv_header(bool include_timing) {
  std::string h = "variant,rank,ratio,seed,relative_mae,groups_mean,sparsity_fraction,iterations,error";
  if (include_timing) h += ",runtime_seconds";
  return h;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c == '\n' ? ' ' : c;
  }
  return q + '"';
}

inline std::string csv_number(double v) { return std::isnan(v) ? "nan" : format_double(v); }

}  // namespace detail

inline std::string sweep_csv_row(const MetricsRecord& r, bool include_timing) {
  std::string row = r.variant + ',' + std::to_string(r.rank) + ',' + detail::csv_number(r.corruption_ratio) + ',' +
                    std::to_string(r.seed) + ',' + detail::csv_number(r.relative_mae) + ',' +
                    detail::csv_number(r.groups_mean) + ',' + detail::csv_number(r.sparsity_fraction) + ',' +
                    std::to_string(r.iterations) + ',' + detail::csv_field(r.error);
  if (include_timing) row += ',' + detail::csv_number(r.runtime_seconds);
  return row;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<MetricsRecord>& records, bool include_timing) {
  out << sweep_csv_header(include_timing) << '\n';
  for (const auto& r : records) out << sweep_csv_row(r, include_timing) << '\n';
}

inline void write_sweep_csv(const std::string& path, const std::vector<MetricsRecord>& records, bool include_timing) {
  std::ofstream out(path);
  if (!out) throw ParseError(ParseErrorKind::Io, "cannot write " + path);
  write_sweep_csv(out, records, include_timing);
  if (!out) throw ParseError(ParseErrorKind::Io, "write failed for " + path);
}

/// Mean and sample standard deviation (n - 1 denominator; 0 for a single value).
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

/// Per (method, rank, ratio) cell: seed count, failures, and mean/std of each
/// metric over the successful seeds. Cells appear in first-seen record order.
inline nlohmann::ordered_json sweep_summary(const std::vector<MetricsRecord>& records) {
  using Key = std::tuple<std::string, int, double>;
  std::vector<Key> order;
  std::map<Key, std::vector<const MetricsRecord*>> groups;
  for (const auto& r : records) {
    Key k{r.variant, r.rank, r.corruption_ratio};
    auto [it, inserted] = groups.try_emplace(k);
    if (inserted) order.push_back(k);
    it->second.push_back(&r);
  }
  auto number = [](double v) -> nlohmann::ordered_json {
    if (std::isnan(v)) return nullptr;
    return v;
  };
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& k : order) {
    std::vector<double> rmae, groups_mean, sparsity, iters;
    int failed = 0;
    for (const auto* r : groups[k]) {
      if (!r->error.empty()) {
        ++failed;
        continue;
      }
      rmae.push_back(r->relative_mae);
      groups_mean.push_back(r->groups_mean);
      sparsity.push_back(r->sparsity_fraction);
      iters.push_back(r->iterations);
    }
    nlohmann::ordered_json cell;
    cell["variant"] = std::get<0>(k);
    cell["rank"] = std::get<1>(k);
    cell["ratio"] = std::get<2>(k);
    cell["runs"] = groups[k].size();
    cell["failed"] = failed;
    for (const auto& [name, values] : {std::pair{"relative_mae", &rmae}, std::pair{"groups_mean", &groups_mean},
                                       std::pair{"sparsity_fraction", &sparsity}, std::pair{"iterations", &iters}}) {
      const MeanStd ms = mean_std(*values);
      cell[name] = {{"mean", number(ms.mean)}, {"std", number(ms.std)}};
    }
    cells.push_back(std::move(cell));
  }
  return {{"cells", std::move(cells)}};
}

inline void write_sweep_summary(const std::string& path, const std::vector<MetricsRecord>& records) {
  std::ofstream out(path);
  if (!out) throw ParseError(ParseErrorKind::Io, "cannot write " + path);
  out << sweep_summary(records).dump(2) << '\n';
  if (!out) throw ParseError(ParseErrorKind::Io, "write failed for " + path);
}

}  // namespace grmf::harness
