#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "sssl/harness.hpp"

namespace sssl {

// Shared data/kernel selection for the diagnose and spectrum subcommands.
struct SourceOptions {
  std::string csv_path;  // empty -> synthetic
  std::string target;
  SyntheticSpec synthetic_spec;
  Index synthetic_n = 2000;
  bool synthetic = false;

  KernelKind kernel_kind = KernelKind::rbf;
  double bandwidth = 0.0;        // absolute; 0 -> bandwidth_scale x median
  double bandwidth_scale = 1.0;  // x median pairwise distance
  int degree = 2;
  bool standardize = false;
};

struct RunOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed_override;
  std::optional<Metric> metric_override;
  bool quiet = false;
};

struct DiagnoseOptions {
  SourceOptions source;
  Index s = 200;
  double r = 1.0;
  double eps = 0.1;
  bool r_eps_given = false;  // when false, defaults are echoed with a warning
  Index labeled_n = 0;
  std::string out_dir = ".";
  bool quiet = false;
};

struct SpectrumOptions {
  SourceOptions source;
  Index s = 200;
  std::string out_dir = ".";
  bool quiet = false;
};

struct SynthOptions {
  SyntheticSpec spec;
  Index n = 2000;
  std::string out_path = "synthetic.csv";
  bool quiet = false;
};

struct CvOptions {
  std::string config_path;
  std::string method = "sssl";
  int trial = 0;
  int fraction_index = 0;
};

// Writes table.txt, results.csv, trials.csv, spectrum.csv and
// spectrum_envelope.csv under out_dir. Returns a process exit code.
int cmd_run(const RunOptions& opts);
// Writes diagnostics.json, spectrum.csv and spectrum_envelope.csv.
int cmd_diagnose(const DiagnoseOptions& opts);
// Writes spectrum.csv (index,sigma,lambda) and spectrum_envelope.csv.
int cmd_spectrum(const SpectrumOptions& opts);
// Exports a synthetic dataset as CSV and prints its ground-truth stats.
int cmd_synth(const SynthOptions& opts);
// Runs the grid search for one method on one trial split and prints the
// chosen hyperparameters as JSON.
int cmd_cv(const CvOptions& opts);

}  // namespace sssl
