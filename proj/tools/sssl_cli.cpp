#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "sssl/commands.hpp"

namespace {

void add_source_flags(CLI::App* app, sssl::SourceOptions& src, std::string& kernel_name,
                      bool& synthetic_flag, double& synth_p, long long& synth_kmax,
                      double& synth_r, double& synth_amp, long long& synth_seed,
                      long long& synth_n) {
  app->add_option("--data", src.csv_path, "input CSV (header row; , ; or tab delimited)");
  app->add_option("--target", src.target, "target column name (default: last column)");
  app->add_flag("--synthetic", synthetic_flag, "use the synthetic generator instead of a CSV");
  app->add_option("--p", synth_p, "synthetic spectrum decay (> 2)");
  app->add_option("--k-max", synth_kmax, "synthetic basis truncation");
  app->add_option("--synth-R", synth_r, "synthetic RKHS-norm budget");
  app->add_option("--residual-amp", synth_amp, "synthetic sup-norm of f - g");
  app->add_option("--synth-seed", synth_seed, "synthetic generator seed");
  app->add_option("--n", synth_n, "synthetic sample count");
  app->add_option("--kernel", kernel_name,
                  "kernel kind: rbf | linear_normalized | polynomial_normalized | cosine_mixture");
  app->add_option("--bandwidth", src.bandwidth, "absolute rbf bandwidth");
  app->add_option("--bandwidth-scale", src.bandwidth_scale,
                  "rbf bandwidth as a multiple of the median pairwise distance");
  app->add_option("--degree", src.degree, "polynomial kernel degree");
  app->add_flag("--standardize", src.standardize, "standardize features before the kernel");
}

void finish_source(sssl::SourceOptions& src, const std::string& kernel_name, bool synthetic_flag,
                   double synth_p, long long synth_kmax, double synth_r, double synth_amp,
                   long long synth_seed, long long synth_n) {
  src.synthetic = synthetic_flag || src.csv_path.empty();
  src.synthetic_spec.p = synth_p;
  src.synthetic_spec.k_max = synth_kmax;
  src.synthetic_spec.r = synth_r;
  src.synthetic_spec.residual_amp = synth_amp;
  src.synthetic_spec.seed = static_cast<std::uint64_t>(synth_seed);
  src.synthetic_n = synth_n;
  if (kernel_name == "rbf") {
    src.kernel_kind = sssl::KernelKind::rbf;
  } else if (kernel_name == "linear_normalized") {
    src.kernel_kind = sssl::KernelKind::linear_normalized;
  } else if (kernel_name == "polynomial_normalized") {
    src.kernel_kind = sssl::KernelKind::polynomial_normalized;
  } else if (kernel_name == "cosine_mixture") {
    src.kernel_kind = sssl::KernelKind::cosine_mixture;
  } else {
    throw CLI::ValidationError("--kernel", "unknown kernel kind " + kernel_name);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral semi-supervised regression toolkit"};
  app.require_subcommand(1);

  // run
  sssl::RunOptions run_opts;
  long long run_seed = -1;
  std::string run_metric;
  auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
  run->add_option("--config", run_opts.config_path, "experiment config file")->required();
  run->add_option("--out-dir", run_opts.out_dir, "output directory");
  run->add_option("--seed", run_seed, "override the config seed");
  run->add_option("--metric", run_metric, "override the metric (mse | rmse)");
  run->add_flag("--quiet", run_opts.quiet, "suppress stdout table");

  // diagnose
  sssl::DiagnoseOptions diag_opts;
  sssl::SourceOptions diag_src;
  std::string diag_kernel = "rbf";
  bool diag_synth = false;
  double diag_p = 3.0, diag_r_spec = 1.0, diag_amp = 0.0;
  long long diag_kmax = 64, diag_seed = 0, diag_n = 2000, diag_s = 200, diag_labeled = 0;
  auto* diag = app.add_subcommand("diagnose", "assumption report for a dataset");
  add_source_flags(diag, diag_src, diag_kernel, diag_synth, diag_p, diag_kmax, diag_r_spec,
                   diag_amp, diag_seed, diag_n);
  diag->add_option("--s", diag_s, "number of eigenpairs to compute");
  auto* opt_r = diag->add_option("--R", diag_opts.r, "RKHS-norm budget for the target");
  auto* opt_eps = diag->add_option("--eps", diag_opts.eps, "target approximation error");
  diag->add_option("--labeled", diag_labeled, "labeled count echoed into the report");
  diag->add_option("--out-dir", diag_opts.out_dir, "output directory");
  diag->add_flag("--quiet", diag_opts.quiet, "suppress stdout report");

  // spectrum
  sssl::SpectrumOptions spec_opts;
  sssl::SourceOptions spec_src;
  std::string spec_kernel = "rbf";
  bool spec_synth = false;
  double spec_p = 3.0, spec_r = 1.0, spec_amp = 0.0;
  long long spec_kmax = 64, spec_seed = 0, spec_n = 2000, spec_s = 200;
  auto* spectrum = app.add_subcommand("spectrum", "export eigenvalue spectrum CSVs");
  add_source_flags(spectrum, spec_src, spec_kernel, spec_synth, spec_p, spec_kmax, spec_r,
                   spec_amp, spec_seed, spec_n);
  spectrum->add_option("--s", spec_s, "number of eigenpairs to compute");
  spectrum->add_option("--out-dir", spec_opts.out_dir, "output directory");
  spectrum->add_flag("--quiet", spec_opts.quiet, "suppress stdout summary");

  // synth
  sssl::SynthOptions synth_opts;
  double synth_p = 3.0, synth_r = 1.0, synth_amp = 0.0;
  long long synth_kmax = 64, synth_seed = 0, synth_n = 2000;
  auto* synth = app.add_subcommand("synth", "generate and export a synthetic dataset");
  synth->add_option("--p", synth_p, "spectrum decay (> 2)");
  synth->add_option("--k-max", synth_kmax, "basis truncation");
  synth->add_option("--R", synth_r, "RKHS-norm budget");
  synth->add_option("--residual-amp", synth_amp, "sup-norm of f - g");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--n", synth_n, "sample count");
  synth->add_option("--out", synth_opts.out_path, "output CSV path");
  synth->add_flag("--quiet", synth_opts.quiet, "suppress stdout summary");

  // cv
  sssl::CvOptions cv_opts;
  auto* cv = app.add_subcommand("cv", "grid search only, printed as JSON");
  cv->add_option("--config", cv_opts.config_path, "experiment config file")->required();
  cv->add_option("--method", cv_opts.method, "sssl | krr | laprls");
  cv->add_option("--trial", cv_opts.trial, "trial index for the split");
  cv->add_option("--fraction-index", cv_opts.fraction_index, "index into label_fractions");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (run_seed >= 0) run_opts.seed_override = static_cast<std::uint64_t>(run_seed);
      if (!run_metric.empty()) run_opts.metric_override = sssl::metric_from_name(run_metric);
      return sssl::cmd_run(run_opts);
    }
    if (*diag) {
      finish_source(diag_src, diag_kernel, diag_synth, diag_p, diag_kmax, diag_r_spec, diag_amp,
                    diag_seed, diag_n);
      diag_opts.source = diag_src;
      diag_opts.s = diag_s;
      diag_opts.labeled_n = diag_labeled;
      diag_opts.r_eps_given = opt_r->count() > 0 && opt_eps->count() > 0;
      return sssl::cmd_diagnose(diag_opts);
    }
    if (*spectrum) {
      finish_source(spec_src, spec_kernel, spec_synth, spec_p, spec_kmax, spec_r, spec_amp,
                    spec_seed, spec_n);
      spec_opts.source = spec_src;
      spec_opts.s = spec_s;
      return sssl::cmd_spectrum(spec_opts);
    }
    if (*synth) {
      synth_opts.spec.p = synth_p;
      synth_opts.spec.k_max = synth_kmax;
      synth_opts.spec.r = synth_r;
      synth_opts.spec.residual_amp = synth_amp;
      synth_opts.spec.seed = static_cast<std::uint64_t>(synth_seed);
      synth_opts.n = synth_n;
      return sssl::cmd_synth(synth_opts);
    }
    if (*cv) {
      return sssl::cmd_cv(cv_opts);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
