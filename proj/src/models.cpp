#include "sssl/models.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace sssl {
namespace {

constexpr double kPinvCutoff = 1e-10;

void check_labels(const Vector& y_l, Index expected) {
  if (y_l.size() < 1) throw std::invalid_argument("fit: empty label vector");
  if (y_l.size() != expected) {
    throw std::invalid_argument("fit: label count " + std::to_string(y_l.size()) +
                                " does not match " + std::to_string(expected));
  }
  if (!y_l.allFinite()) throw std::invalid_argument("fit: labels contain NaN or Inf");
}

// Kernel vector of a query against a stored point set, then dot with weights.
double kernel_expansion(const KernelSpec& kernel, const Dataset& points, const Vector& weights,
                        const Eigen::Ref<const Vector>& x) {
  double acc = 0.0;
  for (Index j = 0; j < points.size(); ++j) {
    acc += weights(j) * eval_kernel(kernel, points.x.row(j).transpose(), x);
  }
  return acc;
}

// Batch variant; chunked so large query sets never materialize a full block.
Vector kernel_expansion(const KernelSpec& kernel, const Dataset& points, const Vector& weights,
                        const Dataset& queries) {
  const Index chunk = 2048;
  Vector out(queries.size());
  for (Index start = 0; start < queries.size(); start += chunk) {
    const Index len = std::min(chunk, queries.size() - start);
    Dataset part(queries.x.middleRows(start, len));
    out.segment(start, len) = kernel_block(kernel, part, points) * weights;
  }
  return out;
}

}  // namespace

SsslModel fit_sssl(const EigenSystem& es, const CrossGram& k_b, const Vector& y_l, Index s,
                   const KernelSpec& kernel, std::shared_ptr<const Dataset> train) {
  if (s < 1) throw std::invalid_argument("fit_sssl: s must be >= 1");
  if (s > es.s) throw std::invalid_argument("fit_sssl: s exceeds the computed eigenpairs");
  if (s > es.numerical_rank) {
    throw std::invalid_argument("fit_sssl: s = " + std::to_string(s) +
                                " exceeds the numerical rank " + std::to_string(es.numerical_rank));
  }
  check_labels(y_l, k_b.cols());
  if (k_b.rows() != es.n_points) {
    throw std::invalid_argument("fit_sssl: cross-Gram row count does not match N");
  }

  Vector inv_sqrt(s);
  for (Index i = 0; i < s; ++i) inv_sqrt(i) = 1.0 / std::sqrt(es.sigmas(i));

  // Phi(i, j) = phi_j(labeled point i).
  Matrix phi = k_b.values.transpose() * es.vectors.leftCols(s) * inv_sqrt.asDiagonal();

  Eigen::BDCSVD<Matrix> svd(phi, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(kPinvCutoff);
  Vector gamma = svd.solve(y_l);

  SsslModel model;
  model.weights = es.vectors.leftCols(s) * inv_sqrt.asDiagonal() * gamma;
  model.gamma = std::move(gamma);
  model.train = std::move(train);
  model.kernel = kernel;
  model.s = s;
  return model;
}

SsslModel fit_sssl(const GramMatrix& k, const CrossGram& k_b, const Vector& y_l, Index s,
                   const KernelSpec& kernel, std::shared_ptr<const Dataset> train,
                   const EigenOptions& opts) {
  EigenSystem es = top_eigenpairs(k, std::min(s, k.n_points()), opts);
  return fit_sssl(es, k_b, y_l, s, kernel, std::move(train));
}

Vector sssl_closed_form_gamma(const EigenSystem& es, const CrossGram& k_b, const Vector& y_l,
                              Index s) {
  if (s < 1 || s > es.s) throw std::invalid_argument("sssl_closed_form_gamma: bad s");
  check_labels(y_l, k_b.cols());

  Matrix g = k_b.values.transpose() * es.vectors.leftCols(s);  // n x s
  Matrix normal = g.transpose() * g;                           // V^T K_B K_B^T V
  Eigen::SelfAdjointEigenSolver<Matrix> eig(normal);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("sssl_closed_form_gamma: eigendecomposition failed");
  }
  const double cutoff = kPinvCutoff * std::max(eig.eigenvalues().maxCoeff(), 0.0);
  Vector inv_evals = Vector::Zero(s);
  for (Index i = 0; i < s; ++i) {
    if (eig.eigenvalues()(i) > cutoff) inv_evals(i) = 1.0 / eig.eigenvalues()(i);
  }
  Vector rhs = g.transpose() * y_l;
  Vector solved = eig.eigenvectors() * (inv_evals.asDiagonal() * (eig.eigenvectors().transpose() * rhs));
  Vector sqrt_sigma(s);
  for (Index i = 0; i < s; ++i) sqrt_sigma(i) = std::sqrt(es.sigmas(i));
  return sqrt_sigma.asDiagonal() * solved;
}

double predict_sssl(const SsslModel& model, const Eigen::Ref<const Vector>& x) {
  if (x.size() != model.train->feature_dim()) {
    throw std::invalid_argument("predict_sssl: dimension mismatch");
  }
  return kernel_expansion(model.kernel, *model.train, model.weights, x);
}

Vector predict_sssl(const SsslModel& model, const Dataset& queries) {
  if (queries.feature_dim() != model.train->feature_dim()) {
    throw std::invalid_argument("predict_sssl: dimension mismatch");
  }
  return kernel_expansion(model.kernel, *model.train, model.weights, queries);
}

KrrModel fit_krr(const GramMatrix& k_ll, const Vector& y_l, double ridge,
                 const KernelSpec& kernel, std::shared_ptr<const Dataset> labeled_points) {
  if (!(ridge > 0.0)) throw std::invalid_argument("fit_krr: ridge must be positive");
  check_labels(y_l, k_ll.n_points());

  Matrix system = k_ll.values;
  system.diagonal().array() += ridge;
  Eigen::LDLT<Matrix> ldlt(system);
  if (ldlt.info() != Eigen::Success) {
    throw std::runtime_error("fit_krr: factorization failed; increase ridge");
  }
  KrrModel model;
  model.dual_coeffs = ldlt.solve(y_l);
  model.labeled_points = std::move(labeled_points);
  model.kernel = kernel;
  model.ridge = ridge;
  return model;
}

double predict_krr(const KrrModel& model, const Eigen::Ref<const Vector>& x) {
  return kernel_expansion(model.kernel, *model.labeled_points, model.dual_coeffs, x);
}

Vector predict_krr(const KrrModel& model, const Dataset& queries) {
  return kernel_expansion(model.kernel, *model.labeled_points, model.dual_coeffs, queries);
}

Eigen::SparseMatrix<double> knn_heat_laplacian(const Dataset& points, int k, double bandwidth) {
  if (k < 1) throw std::invalid_argument("knn_heat_laplacian: k must be >= 1");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("knn_heat_laplacian: bandwidth must be positive");
  const Index n = points.size();
  const Index kk = std::min<Index>(k, n - 1);

  // Brute-force kNN; ties broken by index so the graph is deterministic.
  // Symmetrized by inserting both orientations and combining duplicates.
  Eigen::SparseMatrix<double> w(n, n);
  {
    std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(n));
    std::vector<Eigen::Triplet<double>> edges;
    edges.reserve(static_cast<std::size_t>(2 * n * kk));
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        dist[static_cast<std::size_t>(j)] = {(points.x.row(i) - points.x.row(j)).squaredNorm(), j};
      }
      dist[static_cast<std::size_t>(i)] = {std::numeric_limits<double>::infinity(), i};
      std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
      for (Index t = 0; t < kk; ++t) {
        const auto& [d2, j] = dist[static_cast<std::size_t>(t)];
        const double heat = std::exp(-d2 / (2.0 * bandwidth * bandwidth));
        edges.emplace_back(i, j, heat);
        edges.emplace_back(j, i, heat);
      }
    }
    w.setFromTriplets(edges.begin(), edges.end(),
                      [](const double& a, const double& b) { return std::max(a, b); });
  }

  Eigen::SparseMatrix<double> lap(n, n);
  Vector degree = Vector::Zero(n);
  for (int outer = 0; outer < w.outerSize(); ++outer) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(w, outer); it; ++it) {
      degree(it.row()) += it.value();
    }
  }
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(w.nonZeros()) + static_cast<std::size_t>(n));
  for (int outer = 0; outer < w.outerSize(); ++outer) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(w, outer); it; ++it) {
      trip.emplace_back(it.row(), it.col(), -it.value());
    }
  }
  for (Index i = 0; i < n; ++i) trip.emplace_back(i, i, degree(i));
  lap.setFromTriplets(trip.begin(), trip.end());
  return lap;
}

LapRlsModel fit_laprls_with_laplacian(const GramMatrix& k,
                                      const Eigen::SparseMatrix<double>& laplacian,
                                      const std::vector<Index>& labeled_indices, const Vector& y_l,
                                      double ridge, double laplacian_weight, int graph_k,
                                      double graph_bandwidth, const KernelSpec& kernel,
                                      std::shared_ptr<const Dataset> train) {
  if (!(ridge > 0.0)) throw std::invalid_argument("fit_laprls: ridge must be positive");
  if (laplacian_weight < 0.0) {
    throw std::invalid_argument("fit_laprls: laplacian_weight must be non-negative");
  }
  const Index n_all = k.n_points();
  if (laplacian_weight > 0.0 &&
      (laplacian.rows() != n_all || laplacian.cols() != n_all)) {
    throw std::invalid_argument("fit_laprls: graph Laplacian size does not match the kernel matrix");
  }
  validate_indices(labeled_indices, n_all);
  const Index n_lab = static_cast<Index>(labeled_indices.size());
  check_labels(y_l, n_lab);

  const double nd = static_cast<double>(n_lab);
  const double lap_scale = laplacian_weight * nd / (static_cast<double>(n_all) * n_all);

  Matrix system;
  if (laplacian_weight > 0.0) {
    system = lap_scale * (laplacian * k.values);
  } else {
    system = Matrix::Zero(n_all, n_all);
  }
  system.diagonal().array() += ridge * nd;
  Vector rhs = Vector::Zero(n_all);
  for (Index t = 0; t < n_lab; ++t) {
    const Index i = labeled_indices[static_cast<std::size_t>(t)];
    system.row(i) += k.values.row(i);
    rhs(i) = y_l(t);
  }

  Eigen::PartialPivLU<Matrix> lu(system);
  Vector coeffs = lu.solve(rhs);
  const double resid = (system * coeffs - rhs).norm();
  const double scale = rhs.norm() + system.cwiseAbs().rowwise().sum().maxCoeff() * coeffs.norm();
  if (!coeffs.allFinite() || resid > 1e-8 * std::max(scale, 1.0)) {
    throw std::runtime_error("fit_laprls: system is numerically singular; try a larger ridge");
  }

  LapRlsModel model;
  model.dual_coeffs = std::move(coeffs);
  model.train = std::move(train);
  model.kernel = kernel;
  model.graph_k = graph_k;
  model.graph_bandwidth = graph_bandwidth;
  model.ridge = ridge;
  model.laplacian_weight = laplacian_weight;
  return model;
}

LapRlsModel fit_laprls(const GramMatrix& k, const std::vector<Index>& labeled_indices,
                       const Vector& y_l, double ridge, double laplacian_weight, int graph_k,
                       double graph_bandwidth, const KernelSpec& kernel,
                       std::shared_ptr<const Dataset> train) {
  Eigen::SparseMatrix<double> lap;
  if (laplacian_weight > 0.0) {
    lap = knn_heat_laplacian(*train, graph_k, graph_bandwidth);
  } else {
    lap.resize(k.n_points(), k.n_points());
  }
  return fit_laprls_with_laplacian(k, lap, labeled_indices, y_l, ridge, laplacian_weight, graph_k,
                                   graph_bandwidth, kernel, std::move(train));
}

double predict_laprls(const LapRlsModel& model, const Eigen::Ref<const Vector>& x) {
  return kernel_expansion(model.kernel, *model.train, model.dual_coeffs, x);
}

Vector predict_laprls(const LapRlsModel& model, const Dataset& queries) {
  return kernel_expansion(model.kernel, *model.train, model.dual_coeffs, queries);
}

double regression_error(const Vector& predictions, const Vector& truth, Metric metric) {
  if (predictions.size() < 1) throw std::invalid_argument("regression_error: empty vectors");
  if (predictions.size() != truth.size()) {
    throw std::invalid_argument("regression_error: length mismatch");
  }
  const double mse = (predictions - truth).squaredNorm() / static_cast<double>(predictions.size());
  return metric == Metric::mse ? mse : std::sqrt(mse);
}

}  // namespace sssl
