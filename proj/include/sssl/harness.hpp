#pragma once

#include <Eigen/SparseCore>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sssl/diagnostics.hpp"
#include "sssl/eigensystem.hpp"
#include "sssl/kernel.hpp"
#include "sssl/models.hpp"
#include "sssl/synthetic.hpp"
#include "sssl/types.hpp"

namespace sssl {

enum class Method { sssl, krr, laprls };

std::string method_name(Method m);
Method method_from_name(const std::string& name);
std::string metric_name(Metric m);
Metric metric_from_name(const std::string& name);

struct DataSourceConfig {
  std::string csv_path;  // empty when synthetic
  std::string target;    // empty = last column
  bool synthetic = false;
  SyntheticSpec synthetic_spec;  // alpha filled from flat_rkhs_alpha when empty
  Index synthetic_n = 2000;
};

// Mirrors the run-time protocol: splits, label sweep, repeats, CV grids.
// Parsed from JSON field-for-field; unknown keys are rejected.
struct ExperimentConfig {
  DataSourceConfig data_source;

  KernelKind kernel_kind = KernelKind::rbf;
  std::vector<double> bandwidth_scales{0.25, 0.5, 1.0, 2.0, 4.0};  // x median distance
  std::vector<double> bandwidths;  // absolute values; overrides scales when set
  int kernel_degree = 2;

  std::vector<Method> methods{Method::sssl, Method::krr, Method::laprls};
  std::vector<double> label_fractions{0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09};
  double test_fraction = 0.10;
  int repeats = 10;
  Metric metric = Metric::mse;
  int cv_folds = 5;
  std::uint64_t seed = 1;
  bool standardize_features = false;
  bool center_labels = true;

  std::vector<Index> s_grid{2, 4, 8, 16, 32, 64, 128, 256};
  std::vector<double> ridge_grid{1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0};
  std::vector<double> laprls_ridge_grid{1e-5, 1e-3, 1e-1};
  std::vector<double> laplacian_weight_grid{1e-2, 1.0, 1e2};
  int graph_k = 8;
  std::vector<double> graph_bandwidth_scales{1.0};  // x kernel bandwidth
  Index laprls_cv_unlabeled_cap = 1000;             // 0 = no cap during CV

  // Per-method bandwidth grids; empty means bandwidth_scales.
  std::vector<double> sssl_bandwidth_scales;
  std::vector<double> krr_bandwidth_scales;
  std::vector<double> laprls_bandwidth_scales;

  int threads = 0;  // 0 = hardware concurrency, capped by repeats

  void validate() const;
};

ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig config_from_file(const std::string& path);

// Loads the CSV or generates the synthetic corpus named by the config.
Dataset load_experiment_data(const ExperimentConfig& cfg);

struct SplitResult {
  Dataset train;                // shuffled; labels present
  Dataset test;
  std::vector<Index> labeled;   // prefix 0..l-1 of the train rows
};

// Deterministic per (cfg.seed, trial): the train/test partition does not
// depend on the fraction, and labeled sets are nested across fractions.
// The labeled count is round(fraction * N) with N the full dataset size.
SplitResult split_and_label(const Dataset& data, const ExperimentConfig& cfg, int trial,
                            double label_fraction);

struct Candidate {
  double bandwidth = 0.0;  // 0 for bandwidth-free kernels
  Index s = 0;
  double ridge = 0.0;
  double laplacian_weight = 0.0;
  double graph_bandwidth = 0.0;
};

struct CvChoice {
  Candidate params;
  double score = 0.0;
};

// Per-trial memo of Gram matrices / eigensystems / graph Laplacians keyed by
// bandwidth, plus the capped world the LapRLS grid search runs in. Not
// thread-safe; each trial owns one.
class TrialCache {
 public:
  TrialCache(std::shared_ptr<const Dataset> train, const ExperimentConfig& cfg);

  const Dataset& train() const { return *train_; }
  std::shared_ptr<const Dataset> train_ptr() const { return train_; }
  double median_distance();
  std::vector<double> bandwidth_grid(Method m);
  KernelSpec kernel(double bandwidth) const;
  double graph_bandwidth(double scale, double kernel_bandwidth);

  const GramMatrix& gram(double bandwidth);
  const EigenSystem& eigensystem(double bandwidth, Index s_max);
  const Eigen::SparseMatrix<double>& laplacian(double graph_bandwidth);

  Index cv_world_size() const { return cv_world_ ? cv_world_->size() : train_->size(); }
  std::shared_ptr<const Dataset> cv_world_ptr();
  const GramMatrix& cv_gram(double bandwidth);
  const Eigen::SparseMatrix<double>& cv_laplacian(double graph_bandwidth);

 private:
  std::shared_ptr<const Dataset> train_;
  const ExperimentConfig cfg_;
  std::optional<double> median_;
  std::shared_ptr<const Dataset> cv_world_;  // null when the cap is off
  std::map<double, GramMatrix> grams_;
  std::map<double, EigenSystem> eigens_;
  std::map<double, Eigen::SparseMatrix<double>> laplacians_;
  std::map<double, GramMatrix> cv_grams_;
  std::map<double, Eigen::SparseMatrix<double>> cv_laplacians_;
};

std::vector<int> cv_fold_assignment(Index n_labeled, int folds, std::uint64_t seed);

// Grid search by k-fold CV over the labeled set (leave-one-out when the
// labeled set is smaller than cv_folds). Unlabeled training points stay
// visible to the semi-supervised methods inside each fold. Ties go to the
// most regularized candidate: smaller s, larger ridge, smaller bandwidth,
// then larger laplacian weight.
CvChoice cross_validate(Method method, const std::vector<Index>& labeled,
                        const ExperimentConfig& cfg, std::uint64_t seed, TrialCache& cache);

struct TrialRecord {
  int trial = 0;
  Method method = Method::sssl;
  double fraction = 0.0;
  Candidate chosen;
  double cv_score = 0.0;
  double test_error = 0.0;
};

struct ResultsTable {
  std::vector<Method> methods;
  std::vector<double> fractions;
  Matrix mean;    // methods x fractions
  Matrix stdev;   // sample standard deviation (n-1), 0 when repeats == 1
  std::vector<TrialRecord> trials;
  Metric metric = Metric::mse;
  std::uint64_t seed = 0;
};

ResultsTable run_experiment(const ExperimentConfig& cfg);
ResultsTable run_experiment(const ExperimentConfig& cfg, const Dataset& data);

// Figure-style spectrum export: CSV "index,lambda,envelope".
void export_spectrum(const EigenSystem& es, const PowerLawFit& fit, const std::string& path);

// Text table, one row per method, one column per label fraction, cells
// "mean +/- std" at 4 significant digits.
std::string format_table(const ResultsTable& table);
// Machine-readable twins.
std::string results_csv(const ResultsTable& table);
std::string trials_csv(const ResultsTable& table);

}  // namespace sssl
