#include "sssl/harness.hpp"

#include <Eigen/Dense>

#include <atomic>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "sssl/csv.hpp"
#include "sssl/rng.hpp"

namespace sssl {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_g4(double v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

double label_offset(const Vector& y_fit, bool center) {
  return center ? y_fit.mean() : 0.0;
}

// Least-squares over nested column prefixes of one design matrix: a single QR
// serves every s in the grid. solve() returns false when the leading s x s
// block of R is numerically singular or s exceeds the row count.
class PrefixLsq {
 public:
  PrefixLsq(const Matrix& a, const Vector& y) : rows_(a.rows()), cols_(a.cols()) {
    Eigen::HouseholderQR<Matrix> qr(a);
    const Index rr = std::min(rows_, cols_);
    qty_ = (qr.householderQ().transpose() * y).head(rr);
    r_ = Matrix::Zero(rr, cols_);
    for (Index i = 0; i < rr; ++i) {
      for (Index j = i; j < cols_; ++j) r_(i, j) = qr.matrixQR()(i, j);
    }
  }

  bool solve(Index s, Vector& gamma) const {
    if (s > std::min(rows_, cols_)) return false;
    const double tol = 1e-12 * std::abs(r_(0, 0));
    for (Index i = 0; i < s; ++i) {
      if (std::abs(r_(i, i)) <= tol) return false;
    }
    gamma = r_.topLeftCorner(s, s).triangularView<Eigen::Upper>().solve(qty_.head(s));
    return true;
  }

 private:
  Index rows_;
  Index cols_;
  Matrix r_;
  Vector qty_;
};

bool better_choice(const CvChoice& a, const CvChoice& b) {
  if (a.score != b.score) return a.score < b.score;
  if (a.params.s != b.params.s) return a.params.s < b.params.s;
  if (a.params.ridge != b.params.ridge) return a.params.ridge > b.params.ridge;
  if (a.params.bandwidth != b.params.bandwidth) return a.params.bandwidth < b.params.bandwidth;
  if (a.params.laplacian_weight != b.params.laplacian_weight) {
    return a.params.laplacian_weight > b.params.laplacian_weight;
  }
  return a.params.graph_bandwidth < b.params.graph_bandwidth;
}

void consider(std::optional<CvChoice>& best, const CvChoice& cand) {
  CvChoice c = cand;
  if (std::isnan(c.score)) c.score = kInf;
  if (!best || better_choice(c, *best)) best = c;
}

bool bandwidth_free(KernelKind kind) { return kind != KernelKind::rbf; }

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::sssl: return "sssl";
    case Method::krr: return "krr";
    case Method::laprls: return "laprls";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "sssl") return Method::sssl;
  if (name == "krr") return Method::krr;
  if (name == "laprls") return Method::laprls;
  throw std::invalid_argument("unknown method \"" + name + "\"");
}

std::string metric_name(Metric m) { return m == Metric::mse ? "mse" : "rmse"; }

Metric metric_from_name(const std::string& name) {
  if (name == "mse") return Metric::mse;
  if (name == "rmse") return Metric::rmse;
  throw std::invalid_argument("unknown metric \"" + name + "\" (expected mse or rmse)");
}

void ExperimentConfig::validate() const {
  if (!data_source.synthetic && data_source.csv_path.empty()) {
    throw std::invalid_argument("config: data_source needs a csv path or a synthetic block");
  }
  if (methods.empty()) throw std::invalid_argument("config: methods must be non-empty");
  if (label_fractions.empty()) throw std::invalid_argument("config: label_fractions empty");
  for (double f : label_fractions) {
    if (!(f > 0.0 && f < 1.0)) {
      throw std::invalid_argument("config: label fractions must lie in (0, 1)");
    }
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("config: test_fraction must lie in (0, 1)");
  }
  if (repeats < 1) throw std::invalid_argument("config: repeats must be >= 1");
  if (cv_folds < 2) throw std::invalid_argument("config: cv_folds must be >= 2");
  if (kernel_kind == KernelKind::rbf && bandwidths.empty() && bandwidth_scales.empty()) {
    throw std::invalid_argument("config: rbf kernel needs bandwidths or bandwidth_scales");
  }
  for (double b : bandwidths) {
    if (!(b > 0.0)) throw std::invalid_argument("config: bandwidths must be positive");
  }
  for (double b : bandwidth_scales) {
    if (!(b > 0.0)) throw std::invalid_argument("config: bandwidth_scales must be positive");
  }
  for (Index s : s_grid) {
    if (s < 1) throw std::invalid_argument("config: s_grid entries must be >= 1");
  }
  for (double r : ridge_grid) {
    if (!(r > 0.0)) throw std::invalid_argument("config: ridge_grid entries must be positive");
  }
  for (double r : laprls_ridge_grid) {
    if (!(r > 0.0)) throw std::invalid_argument("config: laprls_ridge_grid entries must be positive");
  }
  for (double w : laplacian_weight_grid) {
    if (w < 0.0) throw std::invalid_argument("config: laplacian weights must be >= 0");
  }
  if (graph_k < 1) throw std::invalid_argument("config: graph_k must be >= 1");
  if (s_grid.empty()) throw std::invalid_argument("config: s_grid empty");
  if (ridge_grid.empty()) throw std::invalid_argument("config: ridge_grid empty");
  if (laprls_ridge_grid.empty()) throw std::invalid_argument("config: laprls_ridge_grid empty");
  if (laplacian_weight_grid.empty()) {
    throw std::invalid_argument("config: laplacian_weight_grid empty");
  }
  if (graph_bandwidth_scales.empty()) {
    throw std::invalid_argument("config: graph_bandwidth_scales empty");
  }
}

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw std::invalid_argument("config: unknown key \"" + it.key() + "\" in " + where);
    }
  }
}

std::vector<double> double_list(const json& j, const std::string& key) {
  if (!j.is_array()) throw std::invalid_argument("config: " + key + " must be an array");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw std::invalid_argument("config: " + key + " must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

KernelKind kernel_kind_from_name(const std::string& name) {
  if (name == "rbf") return KernelKind::rbf;
  if (name == "linear_normalized") return KernelKind::linear_normalized;
  if (name == "polynomial_normalized") return KernelKind::polynomial_normalized;
  if (name == "cosine_mixture") return KernelKind::cosine_mixture;
  throw std::invalid_argument("config: unknown kernel kind \"" + name + "\"");
}

void parse_data_source(const json& j, ExperimentConfig& cfg) {
  reject_unknown(j, {"csv", "target", "synthetic"}, "data_source");
  if (j.contains("csv")) {
    cfg.data_source.csv_path = j.at("csv").get<std::string>();
    if (j.contains("target")) cfg.data_source.target = j.at("target").get<std::string>();
    if (j.contains("synthetic")) {
      throw std::invalid_argument("config: data_source cannot be both csv and synthetic");
    }
    return;
  }
  if (!j.contains("synthetic")) {
    throw std::invalid_argument("config: data_source needs \"csv\" or \"synthetic\"");
  }
  const json& s = j.at("synthetic");
  reject_unknown(s, {"p", "k_max", "R", "alpha", "residual_amp", "seed", "n"},
                 "data_source.synthetic");
  cfg.data_source.synthetic = true;
  SyntheticSpec& spec = cfg.data_source.synthetic_spec;
  if (s.contains("p")) spec.p = s.at("p").get<double>();
  if (s.contains("k_max")) spec.k_max = s.at("k_max").get<Index>();
  if (s.contains("R")) spec.r = s.at("R").get<double>();
  if (s.contains("residual_amp")) spec.residual_amp = s.at("residual_amp").get<double>();
  if (s.contains("seed")) spec.seed = s.at("seed").get<std::uint64_t>();
  if (s.contains("n")) cfg.data_source.synthetic_n = s.at("n").get<Index>();
  if (s.contains("alpha")) {
    const json& a = s.at("alpha");
    if (a.is_string()) {
      if (a.get<std::string>() != "flat_rkhs") {
        throw std::invalid_argument("config: alpha must be \"flat_rkhs\" or a number array");
      }
    } else {
      const auto vals = double_list(a, "alpha");
      spec.alpha = Eigen::Map<const Vector>(vals.data(), static_cast<Index>(vals.size()));
    }
  }
}

void parse_kernel(const json& j, ExperimentConfig& cfg) {
  reject_unknown(j, {"kind", "bandwidth_scales", "bandwidths", "degree"}, "kernel");
  if (j.contains("kind")) cfg.kernel_kind = kernel_kind_from_name(j.at("kind").get<std::string>());
  if (j.contains("bandwidth_scales")) {
    cfg.bandwidth_scales = double_list(j.at("bandwidth_scales"), "bandwidth_scales");
  }
  if (j.contains("bandwidths")) cfg.bandwidths = double_list(j.at("bandwidths"), "bandwidths");
  if (j.contains("degree")) cfg.kernel_degree = j.at("degree").get<int>();
}

void finalize_config(ExperimentConfig& cfg) {
  if (cfg.data_source.synthetic && cfg.data_source.synthetic_spec.alpha.size() == 0) {
    SyntheticSpec& spec = cfg.data_source.synthetic_spec;
    spec.alpha = flat_rkhs_alpha(spec.k_max, spec.p, spec.r);
  }
  cfg.validate();
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: JSON parse error: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");

  static const std::set<std::string> allowed = {
      "data_source", "kernel", "methods", "label_fractions", "test_fraction", "repeats",
      "metric", "cv_folds", "seed", "standardize_features", "center_labels", "s_grid",
      "ridge_grid", "laprls_ridge_grid", "laplacian_weight_grid", "graph_k",
      "graph_bandwidth_scales", "laprls_cv_unlabeled_cap", "sssl_bandwidth_scales",
      "krr_bandwidth_scales", "laprls_bandwidth_scales", "threads"};
  reject_unknown(j, allowed, "config");

  ExperimentConfig cfg;
  if (!j.contains("data_source")) throw std::invalid_argument("config: data_source is required");
  parse_data_source(j.at("data_source"), cfg);
  if (j.contains("kernel")) parse_kernel(j.at("kernel"), cfg);
  if (j.contains("methods")) {
    cfg.methods.clear();
    for (const auto& m : j.at("methods")) cfg.methods.push_back(method_from_name(m.get<std::string>()));
  }
  if (j.contains("label_fractions")) {
    cfg.label_fractions = double_list(j.at("label_fractions"), "label_fractions");
  }
  if (j.contains("test_fraction")) cfg.test_fraction = j.at("test_fraction").get<double>();
  if (j.contains("repeats")) cfg.repeats = j.at("repeats").get<int>();
  if (j.contains("metric")) cfg.metric = metric_from_name(j.at("metric").get<std::string>());
  if (j.contains("cv_folds")) cfg.cv_folds = j.at("cv_folds").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("standardize_features")) {
    cfg.standardize_features = j.at("standardize_features").get<bool>();
  }
  if (j.contains("center_labels")) cfg.center_labels = j.at("center_labels").get<bool>();
  if (j.contains("s_grid")) {
    cfg.s_grid.clear();
    for (const auto& v : j.at("s_grid")) cfg.s_grid.push_back(v.get<Index>());
  }
  if (j.contains("ridge_grid")) cfg.ridge_grid = double_list(j.at("ridge_grid"), "ridge_grid");
  if (j.contains("laprls_ridge_grid")) {
    cfg.laprls_ridge_grid = double_list(j.at("laprls_ridge_grid"), "laprls_ridge_grid");
  }
  if (j.contains("laplacian_weight_grid")) {
    cfg.laplacian_weight_grid = double_list(j.at("laplacian_weight_grid"), "laplacian_weight_grid");
  }
  if (j.contains("graph_k")) cfg.graph_k = j.at("graph_k").get<int>();
  if (j.contains("graph_bandwidth_scales")) {
    cfg.graph_bandwidth_scales = double_list(j.at("graph_bandwidth_scales"), "graph_bandwidth_scales");
  }
  if (j.contains("laprls_cv_unlabeled_cap")) {
    cfg.laprls_cv_unlabeled_cap = j.at("laprls_cv_unlabeled_cap").get<Index>();
  }
  if (j.contains("sssl_bandwidth_scales")) {
    cfg.sssl_bandwidth_scales = double_list(j.at("sssl_bandwidth_scales"), "sssl_bandwidth_scales");
  }
  if (j.contains("krr_bandwidth_scales")) {
    cfg.krr_bandwidth_scales = double_list(j.at("krr_bandwidth_scales"), "krr_bandwidth_scales");
  }
  if (j.contains("laprls_bandwidth_scales")) {
    cfg.laprls_bandwidth_scales = double_list(j.at("laprls_bandwidth_scales"), "laprls_bandwidth_scales");
  }
  if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
  finalize_config(cfg);
  return cfg;
}

ExperimentConfig config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

Dataset load_experiment_data(const ExperimentConfig& cfg) {
  if (cfg.data_source.synthetic) {
    SyntheticSpec spec = cfg.data_source.synthetic_spec;
    if (spec.alpha.size() == 0) spec.alpha = flat_rkhs_alpha(spec.k_max, spec.p, spec.r);
    return make_synthetic(spec, cfg.data_source.synthetic_n).data;
  }
  return load_csv(cfg.data_source.csv_path, cfg.data_source.target).data;
}

SplitResult split_and_label(const Dataset& data, const ExperimentConfig& cfg, int trial,
                            double label_fraction) {
  if (!data.y) throw std::invalid_argument("split_and_label: dataset has no labels");
  const Index n = data.size();
  if (n < 2) throw std::invalid_argument("split_and_label: needs at least 2 points");

  Rng rng(Rng::derive(cfg.seed, 0x5117ULL + static_cast<std::uint64_t>(trial)));
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  rng.shuffle(order);

  Index test_n = static_cast<Index>(std::llround(cfg.test_fraction * static_cast<double>(n)));
  test_n = std::clamp<Index>(test_n, 0, n - 1);
  const Index train_n = n - test_n;

  const Index labeled_n = static_cast<Index>(std::llround(label_fraction * static_cast<double>(n)));
  if (labeled_n < 1) {
    throw std::invalid_argument("split_and_label: label fraction rounds to zero labels");
  }
  if (labeled_n > train_n) {
    throw std::invalid_argument("split_and_label: labeled count " + std::to_string(labeled_n) +
                                " exceeds training size " + std::to_string(train_n));
  }

  std::vector<Index> test_idx(order.begin(), order.begin() + test_n);
  std::vector<Index> train_idx(order.begin() + test_n, order.end());

  SplitResult out;
  out.test = data.select(test_idx);
  out.train = data.select(train_idx);
  out.labeled.resize(static_cast<std::size_t>(labeled_n));
  std::iota(out.labeled.begin(), out.labeled.end(), Index{0});
  return out;
}

TrialCache::TrialCache(std::shared_ptr<const Dataset> train, const ExperimentConfig& cfg)
    : train_(std::move(train)), cfg_(cfg) {
  const Index cap = cfg_.laprls_cv_unlabeled_cap;
  if (cap > 0 && cap < train_->size()) {
    std::vector<Index> rows(static_cast<std::size_t>(cap));
    std::iota(rows.begin(), rows.end(), Index{0});
    // The train rows are already uniformly shuffled, so a prefix is a
    // uniform subsample that keeps every labeled prefix inside it.
    cv_world_ = std::make_shared<const Dataset>(train_->select(rows));
  }
}

double TrialCache::median_distance() {
  if (!median_) median_ = median_pairwise_distance(*train_, cfg_.seed);
  return *median_;
}

std::vector<double> TrialCache::bandwidth_grid(Method m) {
  if (bandwidth_free(cfg_.kernel_kind)) return {0.0};
  if (!cfg_.bandwidths.empty()) return cfg_.bandwidths;
  const std::vector<double>* scales = &cfg_.bandwidth_scales;
  if (m == Method::sssl && !cfg_.sssl_bandwidth_scales.empty()) {
    scales = &cfg_.sssl_bandwidth_scales;
  } else if (m == Method::krr && !cfg_.krr_bandwidth_scales.empty()) {
    scales = &cfg_.krr_bandwidth_scales;
  } else if (m == Method::laprls && !cfg_.laprls_bandwidth_scales.empty()) {
    scales = &cfg_.laprls_bandwidth_scales;
  }
  const double med = median_distance();
  std::vector<double> out;
  out.reserve(scales->size());
  for (double s : *scales) out.push_back(s * med);
  return out;
}

KernelSpec TrialCache::kernel(double bandwidth) const {
  switch (cfg_.kernel_kind) {
    case KernelKind::rbf: return rbf_kernel(bandwidth);
    case KernelKind::linear_normalized: return linear_normalized_kernel();
    case KernelKind::polynomial_normalized: return polynomial_normalized_kernel(cfg_.kernel_degree);
    case KernelKind::cosine_mixture: {
      if (!cfg_.data_source.synthetic) {
        throw std::invalid_argument("cosine_mixture kernel requires a synthetic data source");
      }
      return cosine_mixture_kernel(population_spectrum(cfg_.data_source.synthetic_spec));
    }
  }
  throw std::logic_error("unreachable kernel kind");
}

double TrialCache::graph_bandwidth(double scale, double kernel_bandwidth) {
  return scale * (kernel_bandwidth > 0.0 ? kernel_bandwidth : median_distance());
}

const GramMatrix& TrialCache::gram(double bandwidth) {
  auto it = grams_.find(bandwidth);
  if (it == grams_.end()) {
    it = grams_.emplace(bandwidth, gram_matrix(kernel(bandwidth), *train_)).first;
  }
  return it->second;
}

const EigenSystem& TrialCache::eigensystem(double bandwidth, Index s_max) {
  const Index want = std::min<Index>(s_max, train_->size());
  auto it = eigens_.find(bandwidth);
  if (it == eigens_.end() || it->second.s < want) {
    EigenSystem es = top_eigenpairs(gram(bandwidth), want);
    if (it == eigens_.end()) {
      it = eigens_.emplace(bandwidth, std::move(es)).first;
    } else {
      it->second = std::move(es);
    }
  }
  return it->second;
}

const Eigen::SparseMatrix<double>& TrialCache::laplacian(double graph_bw) {
  auto it = laplacians_.find(graph_bw);
  if (it == laplacians_.end()) {
    it = laplacians_.emplace(graph_bw, knn_heat_laplacian(*train_, cfg_.graph_k, graph_bw)).first;
  }
  return it->second;
}

std::shared_ptr<const Dataset> TrialCache::cv_world_ptr() {
  return cv_world_ ? cv_world_ : train_;
}

const GramMatrix& TrialCache::cv_gram(double bandwidth) {
  if (!cv_world_) return gram(bandwidth);
  auto it = cv_grams_.find(bandwidth);
  if (it == cv_grams_.end()) {
    it = cv_grams_.emplace(bandwidth, gram_matrix(kernel(bandwidth), *cv_world_)).first;
  }
  return it->second;
}

const Eigen::SparseMatrix<double>& TrialCache::cv_laplacian(double graph_bw) {
  if (!cv_world_) return laplacian(graph_bw);
  auto it = cv_laplacians_.find(graph_bw);
  if (it == cv_laplacians_.end()) {
    it = cv_laplacians_.emplace(graph_bw,
                                knn_heat_laplacian(*cv_world_, cfg_.graph_k, graph_bw)).first;
  }
  return it->second;
}

std::vector<int> cv_fold_assignment(Index n_labeled, int folds, std::uint64_t seed) {
  if (n_labeled < 1) throw std::invalid_argument("cv_fold_assignment: empty labeled set");
  const int k = n_labeled < folds ? static_cast<int>(n_labeled) : folds;
  std::vector<Index> order(static_cast<std::size_t>(n_labeled));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(Rng::derive(seed, 0xf01d5ULL));
  rng.shuffle(order);
  std::vector<int> fold(static_cast<std::size_t>(n_labeled));
  for (std::size_t i = 0; i < order.size(); ++i) {
    fold[static_cast<std::size_t>(order[i])] = static_cast<int>(i % static_cast<std::size_t>(k));
  }
  return fold;
}

namespace {

struct FoldSplit {
  std::vector<Index> fit;  // positions within the labeled set
  std::vector<Index> val;
};

std::vector<FoldSplit> make_folds(Index n_labeled, int cv_folds, std::uint64_t seed) {
  const auto assignment = cv_fold_assignment(n_labeled, cv_folds, seed);
  const int k = *std::max_element(assignment.begin(), assignment.end()) + 1;
  std::vector<FoldSplit> folds(static_cast<std::size_t>(k));
  for (Index i = 0; i < n_labeled; ++i) {
    for (int f = 0; f < k; ++f) {
      if (assignment[static_cast<std::size_t>(i)] == f) {
        folds[static_cast<std::size_t>(f)].val.push_back(i);
      } else {
        folds[static_cast<std::size_t>(f)].fit.push_back(i);
      }
    }
  }
  return folds;
}

Vector gather(const Vector& v, const std::vector<Index>& idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (Index i = 0; i < out.size(); ++i) out(i) = v(idx[static_cast<std::size_t>(i)]);
  return out;
}

Matrix gather_rows(const Matrix& m, const std::vector<Index>& idx) {
  Matrix out(static_cast<Index>(idx.size()), m.cols());
  for (Index i = 0; i < out.rows(); ++i) {
    out.row(i) = m.row(idx[static_cast<std::size_t>(i)]);
  }
  return out;
}

std::optional<CvChoice> cv_sssl(const std::vector<Index>& labeled, const ExperimentConfig& cfg,
                                const std::vector<FoldSplit>& folds, TrialCache& cache) {
  const Vector y = gather(*cache.train().y, labeled);
  std::optional<CvChoice> best;
  const Index s_request = *std::max_element(cfg.s_grid.begin(), cfg.s_grid.end());

  for (double bw : cache.bandwidth_grid(Method::sssl)) {
    const EigenSystem& es = cache.eigensystem(bw, s_request);
    std::vector<Index> s_values;
    for (Index s : cfg.s_grid) {
      if (s <= es.numerical_rank) s_values.push_back(s);
    }
    if (s_values.empty() && es.numerical_rank >= 1) s_values.push_back(es.numerical_rank);
    if (s_values.empty()) continue;
    std::sort(s_values.begin(), s_values.end());
    s_values.erase(std::unique(s_values.begin(), s_values.end()), s_values.end());
    const Index s_top = s_values.back();

    // Eigenfunction features at training points are V diag(sqrt(sigma)).
    Matrix phi_labeled(static_cast<Index>(labeled.size()), s_top);
    for (Index i = 0; i < phi_labeled.rows(); ++i) {
      const Index row = labeled[static_cast<std::size_t>(i)];
      for (Index j = 0; j < s_top; ++j) {
        phi_labeled(i, j) = es.vectors(row, j) * std::sqrt(es.sigmas(j));
      }
    }

    std::vector<double> scores(s_values.size(), 0.0);
    std::vector<bool> valid(s_values.size(), true);
    for (const auto& fold : folds) {
      if (fold.fit.empty()) {
        std::fill(valid.begin(), valid.end(), false);
        break;
      }
      const Vector y_fit = gather(y, fold.fit);
      const double offset = label_offset(y_fit, cfg.center_labels);
      PrefixLsq lsq(gather_rows(phi_labeled, fold.fit), (y_fit.array() - offset).matrix());
      const Matrix phi_val = gather_rows(phi_labeled, fold.val);
      const Vector y_val = gather(y, fold.val);
      for (std::size_t si = 0; si < s_values.size(); ++si) {
        Vector gamma;
        if (!valid[si]) continue;
        if (!lsq.solve(s_values[si], gamma)) {
          valid[si] = false;
          continue;
        }
        const Vector pred =
            (phi_val.leftCols(s_values[si]) * gamma).array() + offset;
        scores[si] += regression_error(pred, y_val, cfg.metric);
      }
    }
    for (std::size_t si = 0; si < s_values.size(); ++si) {
      CvChoice c;
      c.params.bandwidth = bw;
      c.params.s = s_values[si];
      c.score = valid[si] ? scores[si] / static_cast<double>(folds.size()) : kInf;
      consider(best, c);
    }
  }
  return best;
}

std::optional<CvChoice> cv_krr(const std::vector<Index>& labeled, const ExperimentConfig& cfg,
                               const std::vector<FoldSplit>& folds, TrialCache& cache) {
  const Vector y = gather(*cache.train().y, labeled);
  const Dataset labeled_ds = cache.train().select(labeled);
  std::optional<CvChoice> best;

  for (double bw : cache.bandwidth_grid(Method::krr)) {
    const KernelSpec spec = cache.kernel(bw);
    const Matrix k_full = kernel_block(spec, labeled_ds, labeled_ds);
    for (double ridge : cfg.ridge_grid) {
      double total = 0.0;
      bool ok = true;
      for (const auto& fold : folds) {
        if (fold.fit.empty()) {
          ok = false;
          break;
        }
        const Vector y_fit = gather(y, fold.fit);
        const double offset = label_offset(y_fit, cfg.center_labels);
        Matrix k_ff(static_cast<Index>(fold.fit.size()), static_cast<Index>(fold.fit.size()));
        for (Index a = 0; a < k_ff.rows(); ++a) {
          for (Index b = 0; b < k_ff.cols(); ++b) {
            k_ff(a, b) = k_full(fold.fit[static_cast<std::size_t>(a)],
                                fold.fit[static_cast<std::size_t>(b)]);
          }
        }
        k_ff.diagonal().array() += ridge;
        Eigen::LDLT<Matrix> ldlt(k_ff);
        if (ldlt.info() != Eigen::Success) {
          ok = false;
          break;
        }
        const Vector coeffs = ldlt.solve((y_fit.array() - offset).matrix());
        Matrix k_vf(static_cast<Index>(fold.val.size()), static_cast<Index>(fold.fit.size()));
        for (Index a = 0; a < k_vf.rows(); ++a) {
          for (Index b = 0; b < k_vf.cols(); ++b) {
            k_vf(a, b) = k_full(fold.val[static_cast<std::size_t>(a)],
                                fold.fit[static_cast<std::size_t>(b)]);
          }
        }
        const Vector pred = (k_vf * coeffs).array() + offset;
        total += regression_error(pred, gather(y, fold.val), cfg.metric);
      }
      CvChoice c;
      c.params.bandwidth = bw;
      c.params.ridge = ridge;
      c.score = ok ? total / static_cast<double>(folds.size()) : kInf;
      consider(best, c);
    }
  }
  return best;
}

std::optional<CvChoice> cv_laprls(const std::vector<Index>& labeled, const ExperimentConfig& cfg,
                                  const std::vector<FoldSplit>& folds, TrialCache& cache) {
  // The grid search runs in the capped world (labeled prefix + a uniform
  // unlabeled subsample); the final fit uses the full training set.
  std::shared_ptr<const Dataset> world = cache.cv_world_ptr();
  bool sub = world->size() < cache.train().size();
  for (Index idx : labeled) {
    if (idx >= world->size()) {
      world = cache.train_ptr();
      sub = false;
      break;
    }
  }
  const Vector y = gather(*world->y, labeled);
  std::optional<CvChoice> best;

  for (double bw : cache.bandwidth_grid(Method::laprls)) {
    const KernelSpec spec = cache.kernel(bw);
    const GramMatrix& k_world = sub ? cache.cv_gram(bw) : cache.gram(bw);
    for (double gscale : cfg.graph_bandwidth_scales) {
      const double gbw = cache.graph_bandwidth(gscale, bw);
      const Eigen::SparseMatrix<double>& lap = sub ? cache.cv_laplacian(gbw) : cache.laplacian(gbw);
      for (double ridge : cfg.laprls_ridge_grid) {
        for (double weight : cfg.laplacian_weight_grid) {
          double total = 0.0;
          bool ok = true;
          for (const auto& fold : folds) {
            if (fold.fit.empty()) {
              ok = false;
              break;
            }
            std::vector<Index> fit_idx;
            fit_idx.reserve(fold.fit.size());
            for (Index pos : fold.fit) fit_idx.push_back(labeled[static_cast<std::size_t>(pos)]);
            const Vector y_fit = gather(y, fold.fit);
            const double offset = label_offset(y_fit, cfg.center_labels);
            try {
              LapRlsModel model = fit_laprls_with_laplacian(
                  k_world, lap, fit_idx, (y_fit.array() - offset).matrix(), ridge, weight,
                  cfg.graph_k, gbw, spec, world);
              Vector pred(static_cast<Index>(fold.val.size()));
              for (Index a = 0; a < pred.size(); ++a) {
                const Index row = labeled[static_cast<std::size_t>(fold.val[static_cast<std::size_t>(a)])];
                pred(a) = k_world.values.row(row).dot(model.dual_coeffs) + offset;
              }
              total += regression_error(pred, gather(y, fold.val), cfg.metric);
            } catch (const std::runtime_error&) {
              ok = false;
              break;
            }
          }
          CvChoice c;
          c.params.bandwidth = bw;
          c.params.ridge = ridge;
          c.params.laplacian_weight = weight;
          c.params.graph_bandwidth = gbw;
          c.score = ok ? total / static_cast<double>(folds.size()) : kInf;
          consider(best, c);
        }
      }
    }
  }
  return best;
}

}  // namespace

CvChoice cross_validate(Method method, const std::vector<Index>& labeled,
                        const ExperimentConfig& cfg, std::uint64_t seed, TrialCache& cache) {
  if (labeled.empty()) throw std::invalid_argument("cross_validate: empty labeled set");
  validate_indices(labeled, cache.train().size());
  const auto folds = make_folds(static_cast<Index>(labeled.size()), cfg.cv_folds, seed);

  std::optional<CvChoice> best;
  switch (method) {
    case Method::sssl: best = cv_sssl(labeled, cfg, folds, cache); break;
    case Method::krr: best = cv_krr(labeled, cfg, folds, cache); break;
    case Method::laprls: best = cv_laprls(labeled, cfg, folds, cache); break;
  }
  if (!best) throw std::runtime_error("cross_validate: empty hyperparameter grid");
  return *best;
}

namespace {

void standardize_in_place(Dataset& train, Dataset& test) {
  const Index n = train.size();
  const Eigen::RowVectorXd mean = train.x.colwise().mean();
  Eigen::RowVectorXd sd =
      ((train.x.rowwise() - mean).array().square().colwise().sum() /
       std::max<double>(static_cast<double>(n - 1), 1.0))
          .sqrt();
  for (Index j = 0; j < sd.size(); ++j) {
    if (sd(j) == 0.0) sd(j) = 1.0;
  }
  Matrix tx = (train.x.rowwise() - mean).array().rowwise() / sd.array();
  Matrix sx = (test.x.rowwise() - mean).array().rowwise() / sd.array();
  train = Dataset(std::move(tx), train.y);
  test = Dataset(std::move(sx), test.y);
}

double fit_and_test(Method method, const Candidate& chosen, const std::vector<Index>& labeled,
                    const Dataset& test, const ExperimentConfig& cfg, TrialCache& cache) {
  const Vector y = gather(*cache.train().y, labeled);
  const double offset = label_offset(y, cfg.center_labels);
  const Vector y_centered = (y.array() - offset).matrix();
  const KernelSpec spec = cache.kernel(chosen.bandwidth);
  Vector pred;

  switch (method) {
    case Method::sssl: {
      const Index s_request = *std::max_element(cfg.s_grid.begin(), cfg.s_grid.end());
      const EigenSystem& es = cache.eigensystem(chosen.bandwidth, s_request);
      const GramMatrix& k = cache.gram(chosen.bandwidth);
      Matrix kb(k.n_points(), static_cast<Index>(labeled.size()));
      for (Index j = 0; j < kb.cols(); ++j) {
        kb.col(j) = k.values.col(labeled[static_cast<std::size_t>(j)]);
      }
      SsslModel model = fit_sssl(es, CrossGram{std::move(kb)}, y_centered, chosen.s, spec,
                                 cache.train_ptr());
      pred = predict_sssl(model, test);
      break;
    }
    case Method::krr: {
      const Dataset labeled_ds = cache.train().select(labeled);
      KrrModel model = fit_krr(gram_matrix(spec, labeled_ds), y_centered, chosen.ridge, spec,
                               std::make_shared<const Dataset>(labeled_ds));
      pred = predict_krr(model, test);
      break;
    }
    case Method::laprls: {
      const GramMatrix& k = cache.gram(chosen.bandwidth);
      const auto& lap = cache.laplacian(chosen.graph_bandwidth);
      LapRlsModel model =
          fit_laprls_with_laplacian(k, lap, labeled, y_centered, chosen.ridge,
                                    chosen.laplacian_weight, cfg.graph_k,
                                    chosen.graph_bandwidth, spec, cache.train_ptr());
      pred = predict_laprls(model, test);
      break;
    }
  }
  pred.array() += offset;
  return regression_error(pred, *test.y, cfg.metric);
}

}  // namespace

ResultsTable run_experiment(const ExperimentConfig& cfg_in, const Dataset& data) {
  ExperimentConfig cfg = cfg_in;
  finalize_config(cfg);

  const int n_trials = cfg.repeats;
  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int n_threads = std::clamp(cfg.threads > 0 ? cfg.threads : hw, 1, n_trials);

  const double max_fraction = *std::max_element(cfg.label_fractions.begin(),
                                                cfg.label_fractions.end());
  std::vector<std::vector<TrialRecord>> per_trial(static_cast<std::size_t>(n_trials));

  auto run_trial = [&](int trial) {
    SplitResult split = split_and_label(data, cfg, trial, max_fraction);
    if (cfg.standardize_features) standardize_in_place(split.train, split.test);
    TrialCache cache(std::make_shared<const Dataset>(std::move(split.train)), cfg);
    const std::uint64_t trial_seed =
        Rng::derive(cfg.seed, 0xc117ULL + static_cast<std::uint64_t>(trial));

    std::vector<TrialRecord>& records = per_trial[static_cast<std::size_t>(trial)];
    for (double fraction : cfg.label_fractions) {
      const Index l = static_cast<Index>(std::llround(fraction * static_cast<double>(data.size())));
      std::vector<Index> labeled(static_cast<std::size_t>(l));
      std::iota(labeled.begin(), labeled.end(), Index{0});
      for (Method m : cfg.methods) {
        TrialRecord rec;
        rec.trial = trial;
        rec.method = m;
        rec.fraction = fraction;
        const CvChoice choice = cross_validate(m, labeled, cfg, trial_seed, cache);
        rec.chosen = choice.params;
        rec.cv_score = choice.score;
        rec.test_error = fit_and_test(m, choice.params, labeled, split.test, cfg, cache);
        records.push_back(rec);
      }
    }
  };

  if (n_threads <= 1) {
    for (int t = 0; t < n_trials; ++t) run_trial(t);
  } else {
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < n_threads; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const int t = next.fetch_add(1);
          if (t >= n_trials) return;
          try {
            run_trial(t);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
            return;
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
  }

  ResultsTable table;
  table.methods = cfg.methods;
  table.fractions = cfg.label_fractions;
  table.metric = cfg.metric;
  table.seed = cfg.seed;
  const Index n_m = static_cast<Index>(cfg.methods.size());
  const Index n_f = static_cast<Index>(cfg.label_fractions.size());
  table.mean = Matrix::Zero(n_m, n_f);
  table.stdev = Matrix::Zero(n_m, n_f);

  for (const auto& records : per_trial) {
    for (const auto& rec : records) table.trials.push_back(rec);
  }
  for (Index mi = 0; mi < n_m; ++mi) {
    for (Index fi = 0; fi < n_f; ++fi) {
      std::vector<double> errs;
      for (const auto& rec : table.trials) {
        if (rec.method == cfg.methods[static_cast<std::size_t>(mi)] &&
            rec.fraction == cfg.label_fractions[static_cast<std::size_t>(fi)]) {
          errs.push_back(rec.test_error);
        }
      }
      const double n = static_cast<double>(errs.size());
      double mean = 0.0;
      for (double e : errs) mean += e;
      mean /= n;
      double var = 0.0;
      if (errs.size() > 1) {
        for (double e : errs) var += (e - mean) * (e - mean);
        var /= (n - 1.0);
      }
      table.mean(mi, fi) = mean;
      table.stdev(mi, fi) = std::sqrt(var);
    }
  }
  return table;
}

ResultsTable run_experiment(const ExperimentConfig& cfg) {
  ExperimentConfig cfg2 = cfg;
  finalize_config(cfg2);
  const Dataset data = load_experiment_data(cfg2);
  return run_experiment(cfg2, data);
}

void export_spectrum(const EigenSystem& es, const PowerLawFit& fit, const std::string& path) {
  if (es.s < 1) throw std::invalid_argument("export_spectrum: empty eigensystem");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_spectrum: cannot open " + path);
  write_spectrum_envelope_csv(es.lambdas, fit, out);
  if (!out) throw std::runtime_error("export_spectrum: write failed for " + path);
}

std::string format_table(const ResultsTable& table) {
  if (table.methods.empty() || table.fractions.empty()) {
    throw std::invalid_argument("format_table: empty results");
  }
  std::ostringstream out;
  out << "metric: " << metric_name(table.metric) << "\n";
  const int name_w = 10;
  const int cell_w = 22;
  out << std::string(name_w, ' ');
  char buf[32];
  for (double f : table.fractions) {
    std::snprintf(buf, sizeof(buf), "%g%%", f * 100.0);
    out << std::string(cell_w - std::string(buf).size(), ' ') << buf;
  }
  out << "\n";
  for (Index mi = 0; mi < static_cast<Index>(table.methods.size()); ++mi) {
    std::string name = method_name(table.methods[static_cast<std::size_t>(mi)]);
    out << name << std::string(name_w - name.size(), ' ');
    for (Index fi = 0; fi < static_cast<Index>(table.fractions.size()); ++fi) {
      const std::string cell =
          format_g4(table.mean(mi, fi)) + " ± " + format_g4(table.stdev(mi, fi));
      // The +/- sign is 2 bytes in UTF-8; pad by display width.
      const std::size_t display = cell.size() - 1;
      out << std::string(cell_w > static_cast<int>(display) ? cell_w - display : 1, ' ') << cell;
    }
    out << "\n";
  }
  return out.str();
}

std::string results_csv(const ResultsTable& table) {
  std::ostringstream out;
  out << "method,fraction,mean,std\n";
  for (Index mi = 0; mi < static_cast<Index>(table.methods.size()); ++mi) {
    for (Index fi = 0; fi < static_cast<Index>(table.fractions.size()); ++fi) {
      out << method_name(table.methods[static_cast<std::size_t>(mi)]) << ','
          << format_g17(table.fractions[static_cast<std::size_t>(fi)]) << ','
          << format_g17(table.mean(mi, fi)) << ',' << format_g17(table.stdev(mi, fi)) << "\n";
    }
  }
  return out.str();
}

std::string trials_csv(const ResultsTable& table) {
  std::ostringstream out;
  out << "trial,method,fraction,bandwidth,s,ridge,laplacian_weight,graph_bandwidth,"
         "cv_score,test_error\n";
  for (const auto& rec : table.trials) {
    out << rec.trial << ',' << method_name(rec.method) << ',' << format_g17(rec.fraction) << ','
        << format_g17(rec.chosen.bandwidth) << ',' << rec.chosen.s << ','
        << format_g17(rec.chosen.ridge) << ',' << format_g17(rec.chosen.laplacian_weight) << ','
        << format_g17(rec.chosen.graph_bandwidth) << ',' << format_g17(rec.cv_score) << ','
        << format_g17(rec.test_error) << "\n";
  }
  return out.str();
}

}  // namespace sssl
