#include "sssl/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include <json.hpp>

#include "sssl/csv.hpp"
#include "sssl/rng.hpp"

namespace sssl {
namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path);
}

struct PreparedSource {
  Dataset data;
  KernelSpec kernel;
  double bandwidth = 0.0;
};

PreparedSource prepare_source(const SourceOptions& src) {
  PreparedSource out;
  if (src.synthetic) {
    SyntheticSpec spec = src.synthetic_spec;
    if (spec.alpha.size() == 0) spec.alpha = flat_rkhs_alpha(spec.k_max, spec.p, spec.r);
    SyntheticData synth = make_synthetic(spec, src.synthetic_n);
    out.data = std::move(synth.data);
    if (src.kernel_kind == KernelKind::cosine_mixture) {
      out.kernel = synth.kernel;
      return out;
    }
  } else {
    if (src.csv_path.empty()) throw std::invalid_argument("no data source given");
    out.data = load_csv(src.csv_path, src.target).data;
  }

  if (src.standardize) {
    const Index n = out.data.size();
    const Eigen::RowVectorXd mean = out.data.x.colwise().mean();
    Eigen::RowVectorXd sd = ((out.data.x.rowwise() - mean).array().square().colwise().sum() /
                             std::max<double>(static_cast<double>(n - 1), 1.0))
                                .sqrt();
    for (Index j = 0; j < sd.size(); ++j) {
      if (sd(j) == 0.0) sd(j) = 1.0;
    }
    Matrix x = (out.data.x.rowwise() - mean).array().rowwise() / sd.array();
    out.data = Dataset(std::move(x), out.data.y);
  }

  switch (src.kernel_kind) {
    case KernelKind::rbf: {
      out.bandwidth = src.bandwidth > 0.0
                          ? src.bandwidth
                          : src.bandwidth_scale * median_pairwise_distance(out.data);
      out.kernel = rbf_kernel(out.bandwidth);
      break;
    }
    case KernelKind::linear_normalized:
      out.kernel = linear_normalized_kernel();
      break;
    case KernelKind::polynomial_normalized:
      out.kernel = polynomial_normalized_kernel(src.degree);
      break;
    case KernelKind::cosine_mixture:
      throw std::invalid_argument("cosine_mixture kernel requires a synthetic source");
  }
  return out;
}

void write_spectrum_files(const EigenSystem& es, const PowerLawFit& fit,
                          const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir + "/spectrum.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot open spectrum.csv");
    write_spectrum_csv(es, out);
  }
  export_spectrum(es, fit, out_dir + "/spectrum_envelope.csv");
}

}  // namespace

int cmd_run(const RunOptions& opts) {
  ExperimentConfig cfg = config_from_file(opts.config_path);
  if (opts.seed_override) cfg.seed = *opts.seed_override;
  if (opts.metric_override) cfg.metric = *opts.metric_override;

  const Dataset data = load_experiment_data(cfg);
  const ResultsTable table = run_experiment(cfg, data);

  std::filesystem::create_directories(opts.out_dir);
  const std::string text = format_table(table);
  write_file(opts.out_dir + "/table.txt", text);
  write_file(opts.out_dir + "/results.csv", results_csv(table));
  write_file(opts.out_dir + "/trials.csv", trials_csv(table));

  // Spectrum for the trial-0 split at the bandwidth the first SSSL record
  // chose (median-heuristic bandwidth when SSSL was not run).
  SplitResult split = split_and_label(data, cfg, 0, cfg.label_fractions.front());
  TrialCache cache(std::make_shared<const Dataset>(std::move(split.train)), cfg);
  double bw = 0.0;
  auto it = std::find_if(table.trials.begin(), table.trials.end(), [](const TrialRecord& r) {
    return r.trial == 0 && r.method == Method::sssl;
  });
  if (it != table.trials.end()) {
    bw = it->chosen.bandwidth;
  } else if (cfg.kernel_kind == KernelKind::rbf) {
    bw = cache.median_distance();
  }
  const Index s_max = *std::max_element(cfg.s_grid.begin(), cfg.s_grid.end());
  const EigenSystem& es = cache.eigensystem(bw, s_max);
  const PowerLawFit fit = fit_power_law(es.lambdas);
  write_spectrum_files(es, fit, opts.out_dir);

  if (!opts.quiet) std::cout << text;
  return 0;
}

int cmd_diagnose(const DiagnoseOptions& opts) {
  PreparedSource src = prepare_source(opts.source);
  const Index n = src.data.size();
  const Index s = std::clamp<Index>(opts.s, 2, n);

  const GramMatrix k = gram_matrix(src.kernel, src.data);
  const EigenSystem es = top_eigenpairs(k, s);

  DiagnosticsInputs inputs;
  inputs.r = opts.r;
  inputs.eps = opts.eps;
  inputs.n_labeled = opts.labeled_n;
  inputs.defaults_used = !opts.r_eps_given;
  DiagnosticsReport report = assumption_report(k, es, src.kernel, src.data, inputs);

  std::filesystem::create_directories(opts.out_dir);
  const std::string json_text = report_to_json(report);
  write_file(opts.out_dir + "/diagnostics.json", json_text + "\n");
  write_spectrum_files(es, report.power_law, opts.out_dir);

  if (!opts.quiet) {
    std::cout << json_text << "\n";
    if (inputs.defaults_used) {
      std::cerr << "note: using default R=1, eps=0.1; pass --R/--eps for meaningful "
                   "n0 / s / budget numbers\n";
    }
  }
  return 0;
}

int cmd_spectrum(const SpectrumOptions& opts) {
  PreparedSource src = prepare_source(opts.source);
  const Index s = std::clamp<Index>(opts.s, 1, src.data.size());
  const GramMatrix k = gram_matrix(src.kernel, src.data);
  const EigenSystem es = top_eigenpairs(k, s);
  const PowerLawFit fit = fit_power_law(es.lambdas);
  write_spectrum_files(es, fit, opts.out_dir);
  if (!opts.quiet) {
    std::cout << "wrote spectrum for " << es.s << " eigenpairs (fitted p = " << fit.p
              << ", a^2 = " << fit.a_squared() << ")\n";
  }
  return 0;
}

int cmd_synth(const SynthOptions& opts) {
  SyntheticSpec spec = opts.spec;
  if (spec.alpha.size() == 0) spec.alpha = flat_rkhs_alpha(spec.k_max, spec.p, spec.r);
  SyntheticData synth = make_synthetic(spec, opts.n);
  write_csv(opts.out_path, synth.data, {"x0"}, "y");
  if (!opts.quiet) {
    nlohmann::json j;
    j["n"] = opts.n;
    j["p"] = spec.p;
    j["k_max"] = spec.k_max;
    j["R"] = spec.r;
    j["residual_amp"] = spec.residual_amp;
    j["a_squared"] = spec.a_squared();
    j["eps_sq"] = synth.truth.eps_sq;
    j["eps_max_sq"] = synth.truth.eps_max_sq;
    j["path"] = opts.out_path;
    std::cout << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_cv(const CvOptions& opts) {
  ExperimentConfig cfg = config_from_file(opts.config_path);
  if (opts.fraction_index < 0 ||
      opts.fraction_index >= static_cast<int>(cfg.label_fractions.size())) {
    throw std::invalid_argument("cv: fraction index out of range");
  }
  const Method method = method_from_name(opts.method);
  const Dataset data = load_experiment_data(cfg);
  const double fraction = cfg.label_fractions[static_cast<std::size_t>(opts.fraction_index)];

  SplitResult split = split_and_label(data, cfg, opts.trial, fraction);
  TrialCache cache(std::make_shared<const Dataset>(std::move(split.train)), cfg);
  const std::uint64_t trial_seed =
      Rng::derive(cfg.seed, 0xc117ULL + static_cast<std::uint64_t>(opts.trial));
  const CvChoice choice = cross_validate(method, split.labeled, cfg, trial_seed, cache);

  nlohmann::json j;
  j["method"] = method_name(method);
  j["trial"] = opts.trial;
  j["fraction"] = fraction;
  j["cv_score"] = choice.score;
  j["bandwidth"] = choice.params.bandwidth;
  j["s"] = choice.params.s;
  j["ridge"] = choice.params.ridge;
  j["laplacian_weight"] = choice.params.laplacian_weight;
  j["graph_bandwidth"] = choice.params.graph_bandwidth;
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace sssl
