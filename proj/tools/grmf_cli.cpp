// grmf command line: factorize, corrupt, sweep, synth.
//
// Every option can also come from a flat TOML file passed with --config
// (key = option name, '-' or '_' both accepted). Command-line flags win.
// Exit codes: 0 ok, 1 usage, 2 data/parse error, 3 numerical failure.

#include <grmf/grmf.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

using namespace grmf;
using namespace grmf::harness;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void apply_config(CLI::App& sub, const std::string& path) {
  if (path.empty()) return;
  std::ifstream probe(path);
  if (!probe) throw ParseError(ParseErrorKind::Io, "cannot open config " + path);
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_file(path);
  } catch (const CLI::Error& e) {
    throw UsageError("config " + path + ": " + e.what());
  }
  for (const auto& item : items) {
    if (!item.parents.empty()) throw UsageError("config " + path + ": sections are not supported");
    std::string name = item.name;
    std::replace(name.begin(), name.end(), '_', '-');
    CLI::Option* opt = sub.get_option_no_throw("--" + name);
    if (opt == nullptr || name == "config") throw UsageError("config " + path + ": unknown key '" + item.name + "'");
    if (opt->count() > 0) continue;
    opt->add_result(item.inputs);
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError("config " + path + ": " + e.what());
    }
  }
}

void require(const CLI::App& sub, std::initializer_list<const char*> names) {
  for (const char* n : names)
    if (sub.get_option(n)->count() == 0) throw UsageError(sub.get_name() + ": " + n + " is required");
}

bool is_pgm(const std::string& path) {
  const auto dot = path.rfind('.');
  if (dot == std::string::npos) return false;
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == "pgm";
}

void save_matrix(const std::string& path, const Matrix& M) {
  if (is_pgm(path)) {
    save_pgm(path, M);
  } else {
    save_csv_matrix(path, M);
  }
}

// Hyperparameter flags shared by factorize and sweep.
struct HyperFlags {
  HyperParams h;
  CLI::Option* tau1 = nullptr;
  CLI::Option* tau2 = nullptr;

  void add(CLI::App& sub) {
    sub.add_option("--lambda1", h.lambda1, "sparsity weight")->capture_default_str();
    sub.add_option("--lambda2", h.lambda2, "grouping weight")->capture_default_str();
    sub.add_option("--lambda3", h.lambda3, "ridge weight")->capture_default_str();
    tau1 = sub.add_option("--tau1", h.tau1, "sparsity threshold (default 0.05*sqrt(mean Y))");
    tau2 = sub.add_option("--tau2", h.tau2, "grouping threshold (default 0.05*sqrt(mean Y))");
    sub.add_option("--epsilon", h.epsilon, "l1 smoothing constant")->capture_default_str();
    sub.add_option("--nu0", h.nu0, "initial ADMM penalty")->capture_default_str();
    sub.add_option("--rho", h.rho, "ADMM penalty growth")->capture_default_str();
    sub.add_option("--delta-outer", h.delta_outer, "relative change to stop alternating")->capture_default_str();
    sub.add_option("--eps-dc", h.eps_dc, "DC stopping tolerance")->capture_default_str();
    sub.add_option("--eps-admm", h.eps_admm, "ADMM stopping tolerance")->capture_default_str();
    sub.add_option("--max-alt", h.max_alt, "alternating iteration cap")->capture_default_str();
    sub.add_option("--max-dc", h.max_dc, "DC iteration cap")->capture_default_str();
    sub.add_option("--max-admm", h.max_admm, "ADMM iteration cap")->capture_default_str();
  }

  HyperParams resolve(const Matrix& Y, Variant variant) const {
    const HyperParams auto_h = image_defaults(Y, variant);
    HyperParams out = h;
    out.variant = variant;
    if (tau1->count() == 0) out.tau1 = auto_h.tau1;
    if (tau2->count() == 0) out.tau2 = auto_h.tau2;
    return out;
  }
};

const std::map<std::string, InitStrategy> kInit{{"svd", InitStrategy::Svd}, {"random", InitStrategy::Random}};

nlohmann::ordered_json hyper_json(const HyperParams& h) {
  return {{"variant", std::string(to_string(h.variant))},
          {"lambda1", h.lambda1},
          {"lambda2", h.lambda2},
          {"lambda3", h.lambda3},
          {"tau1", h.tau1},
          {"tau2", h.tau2},
          {"epsilon", h.epsilon},
          {"nu0", h.nu0},
          {"rho", h.rho},
          {"delta_outer", h.delta_outer},
          {"eps_dc", h.eps_dc},
          {"eps_admm", h.eps_admm},
          {"max_alt", h.max_alt},
          {"max_dc", h.max_dc},
          {"max_admm", h.max_admm}};
}

struct FactorizeCmd {
  std::string config, input, reference, variant = "grmf", init = "svd", out_u, out_v, out_y, metrics;
  int rank = 0;
  std::uint64_t seed = 0;
  int threads = 1;
  HyperFlags hyper;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("factorize", "Factorize a PGM/CSV matrix");
    sub->add_option("--config", config, "TOML file with option defaults");
    sub->add_option("--input", input, "input matrix (.pgm or CSV)");
    sub->add_option("--rank", rank, "target rank");
    sub->add_option("--variant", variant, "grmf | ngrmf | gmf-l2 | tsvd")
        ->check(CLI::IsMember({"grmf", "ngrmf", "gmf-l2", "tsvd"}))
        ->capture_default_str();
    sub->add_option("--init", init, "svd | random")->check(CLI::IsMember({"svd", "random"}))->capture_default_str();
    sub->add_option("--seed", seed, "seed for random init")->capture_default_str();
    sub->add_option("--threads", threads, "worker threads per half-step")->check(CLI::PositiveNumber);
    sub->add_option("--reference", reference, "clean matrix for relative MAE (default: the input)");
    sub->add_option("--out-u", out_u, "write U as CSV");
    sub->add_option("--out-v", out_v, "write V as CSV");
    sub->add_option("--out-y", out_y, "write U V^T (.pgm or CSV)");
    sub->add_option("--metrics", metrics, "write metrics JSON");
    hyper.add(*sub);
    sub->callback([this, sub] {
      apply_config(*sub, config);
      require(*sub, {"--input", "--rank"});
      run();
    });
  }

  void run() const {
    const Matrix Y = load_matrix(input);
    const Matrix ref = reference.empty() ? Y : load_matrix(reference);
    if (ref.rows() != Y.rows() || ref.cols() != Y.cols()) throw UsageError("--reference shape differs from --input");
    const auto start = std::chrono::steady_clock::now();

    FactorPair f;
    nlohmann::ordered_json m;
    m["variant"] = variant;
    m["rank"] = rank;
    double tau_group = 0.0;
    if (variant == "tsvd") {
      const SvdResult svd = truncated_svd(Y, rank);
      f.U = svd.left * svd.singular_values.cwiseSqrt().asDiagonal();
      f.V = svd.right * svd.singular_values.cwiseSqrt().asDiagonal();
      tau_group = hyper.tau2->count() ? hyper.h.tau2 : image_defaults(Y).tau2;
      m["iterations"] = 0;
    } else {
      const HyperParams h = hyper.resolve(Y, *parse_variant(variant));
      FitOptions options;
      options.threads = threads;
      FitResult res = fit(Y, h, init_factors(Y, rank, kInit.at(init), seed), options);
      f = std::move(res.factors);
      tau_group = h.tau2;
      m["iterations"] = res.trace.iterations.size();
      m["converged"] = res.trace.converged;
      nlohmann::ordered_json trace = nlohmann::ordered_json::array();
      for (const auto& it : res.trace.iterations) trace.push_back(it.objective);
      m["initial_objective"] = res.trace.initial_objective;
      m["objective_trace"] = trace;
      m["hyper"] = hyper_json(h);
    }
    const Matrix Yhat = reconstruct(f);
    m["relative_mae"] = relative_mae(ref, Yhat);
    m["groups_mean"] = count_groups(f, tau_group);
    m["sparsity_fraction"] = sparsity_fraction(f);
    m["negative_fraction"] = negative_fraction(f);
    m["runtime_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (!out_u.empty()) save_csv_matrix(out_u, f.U);
    if (!out_v.empty()) save_csv_matrix(out_v, f.V);
    if (!out_y.empty()) save_matrix(out_y, Yhat);
    if (!metrics.empty()) {
      std::ofstream out(metrics);
      if (!out) throw ParseError(ParseErrorKind::Io, "cannot write " + metrics);
      out << m.dump(2) << '\n';
    }
    std::cout << "relative_mae " << m["relative_mae"].get<double>() << '\n';
  }
};

struct CorruptCmd {
  std::string config, input, output;
  double ratio = 0.0;
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("corrupt", "Apply seeded salt-and-pepper noise");
    sub->add_option("--config", config, "TOML file with option defaults");
    sub->add_option("--input", input, "input matrix (.pgm or CSV)");
    sub->add_option("--ratio", ratio, "fraction of entries to corrupt")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--seed", seed, "corruption seed")->capture_default_str();
    sub->add_option("--output", output, "output matrix (.pgm or CSV)");
    sub->callback([this, sub] {
      apply_config(*sub, config);
      require(*sub, {"--input", "--ratio", "--output"});
      save_matrix(output, corrupt_salt_pepper(load_matrix(input), {ratio, seed}));
    });
  }
};

struct SynthCmd {
  std::string config, out, truth_u, truth_v;
  SynthSpec spec;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("synth", "Generate low-rank data with grouped factors");
    sub->add_option("--config", config, "TOML file with option defaults");
    sub->add_option("--d", spec.d, "rows")->capture_default_str();
    sub->add_option("--n", spec.n, "columns")->capture_default_str();
    sub->add_option("--rank", spec.rank, "rank")->capture_default_str();
    sub->add_option("--groups", spec.groups, "distinct nonzero values per factor row")->capture_default_str();
    sub->add_option("--zero-frac", spec.zero_fraction, "fraction of exactly-zero factor entries")
        ->capture_default_str();
    sub->add_option("--noise", spec.noise_sigma, "Gaussian noise sigma on the output")->capture_default_str();
    sub->add_option("--seed", spec.seed, "generator seed")->capture_default_str();
    sub->add_option("--out", out, "data matrix (.pgm or CSV)");
    sub->add_option("--truth-u", truth_u, "write ground-truth U as CSV");
    sub->add_option("--truth-v", truth_v, "write ground-truth V as CSV");
    sub->callback([this, sub] {
      apply_config(*sub, config);
      require(*sub, {"--out"});
      const SynthData data = synth_lowrank(spec);
      save_matrix(out, data.observed);
      if (!truth_u.empty()) save_csv_matrix(truth_u, data.truth.U);
      if (!truth_v.empty()) save_csv_matrix(truth_v, data.truth.V);
    });
  }
};

struct SweepCmd {
  std::string config_path, out, summary, init = "svd";
  SweepConfig cfg;
  HyperFlags hyper;
  CLI::Option* ngrmf_lambda3 = nullptr;
  double ngrmf_lambda3_value = 0.0;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("sweep", "Run a (method, rank, ratio, seed) grid");
    sub->add_option("--config", config_path, "TOML file with option defaults");
    sub->add_option("--out", out, "per-run CSV");
    sub->add_option("--summary", summary, "per-cell mean/std JSON");
    sub->add_option("--methods", cfg.methods, "subset of grmf ngrmf gmf-l2 tsvd")
        ->check(CLI::IsMember({"grmf", "ngrmf", "gmf-l2", "tsvd"}));
    sub->add_option("--ranks", cfg.ranks, "ranks");
    sub->add_option("--ratios", cfg.ratios, "corruption ratios");
    sub->add_option("--seeds", cfg.seeds, "corruption (and random-init) seeds");
    sub->add_option("--input", cfg.input, "clean matrix (.pgm or CSV); synthetic data when omitted");
    sub->add_option("--synth-d", cfg.synth.d)->capture_default_str();
    sub->add_option("--synth-n", cfg.synth.n)->capture_default_str();
    sub->add_option("--synth-rank", cfg.synth.rank)->capture_default_str();
    sub->add_option("--synth-groups", cfg.synth.groups)->capture_default_str();
    sub->add_option("--synth-zero-frac", cfg.synth.zero_fraction)->capture_default_str();
    sub->add_option("--synth-noise", cfg.synth.noise_sigma)->capture_default_str();
    sub->add_option("--synth-seed", cfg.synth.seed)->capture_default_str();
    sub->add_option("--init", init, "svd | random")->check(CLI::IsMember({"svd", "random"}))->capture_default_str();
    sub->add_option("--threads", cfg.threads, "concurrent cells")->check(CLI::PositiveNumber);
    sub->add_flag("--timing", cfg.include_timing, "append a runtime_seconds column");
    ngrmf_lambda3 = sub->add_option("--ngrmf-lambda3", ngrmf_lambda3_value, "lambda3 used for ngrmf cells");
    hyper.add(*sub);
    sub->callback([this, sub] {
      apply_config(*sub, config_path);
      require(*sub, {"--out"});
      run();
    });
  }

  void run() {
    cfg.hyper = hyper.h;
    if (hyper.tau1->count()) cfg.tau1 = hyper.h.tau1;
    if (hyper.tau2->count()) cfg.tau2 = hyper.h.tau2;
    if (ngrmf_lambda3->count()) cfg.ngrmf_lambda3 = ngrmf_lambda3_value;
    cfg.init = kInit.at(init);
    cfg.validate();
    cfg.hyper.validate();
    const std::vector<MetricsRecord> records = run_sweep(cfg);
    write_sweep_csv(out, records, cfg.include_timing);
    if (!summary.empty()) write_sweep_summary(summary, records);
    const auto failed = std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.error.empty(); });
    std::cout << records.size() << " runs, " << failed << " failed\n";
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust matrix factorization with sparsity and grouping penalties"};
  app.require_subcommand(1, 1);
  FactorizeCmd factorize;
  CorruptCmd corrupt;
  SweepCmd sweep;
  SynthCmd synth;
  factorize.add(app);
  corrupt.add(app);
  sweep.add(app);
  synth.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
