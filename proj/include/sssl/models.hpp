#pragma once

#include <Eigen/SparseCore>

#include <memory>
#include <vector>

#include "sssl/eigensystem.hpp"
#include "sssl/kernel.hpp"
#include "sssl/types.hpp"

namespace sssl {

enum class Metric { mse, rmse };

// Least-squares regression of the labels onto the leading s empirical
// eigenfunctions. Prediction uses g(x) = sum_j gamma_j phi_j(x), which
// collapses to k(x)^T w with w = V diag(1/sqrt(sigma)) gamma precomputed.
struct SsslModel {
  Vector gamma;    // length s
  Vector weights;  // length N: V_s diag(1/sqrt(sigma)) gamma
  std::shared_ptr<const Dataset> train;
  KernelSpec kernel;
  Index s = 0;
};

struct KrrModel {
  Vector dual_coeffs;  // length n
  std::shared_ptr<const Dataset> labeled_points;
  KernelSpec kernel;
  double ridge = 0.0;
};

struct LapRlsModel {
  Vector dual_coeffs;  // length N, expansion over all training points
  std::shared_ptr<const Dataset> train;
  KernelSpec kernel;
  int graph_k = 0;
  double graph_bandwidth = 0.0;
  double ridge = 0.0;
  double laplacian_weight = 0.0;
};

// Fits gamma by a minimum-norm least-squares solve (relative singular value
// cutoff 1e-10), which minimizes the labeled squared error even when the
// normal matrix is singular. Throws if s exceeds the numerical rank of K or
// the labeled set is empty.
SsslModel fit_sssl(const EigenSystem& es, const CrossGram& k_b, const Vector& y_l, Index s,
                   const KernelSpec& kernel, std::shared_ptr<const Dataset> train);
SsslModel fit_sssl(const GramMatrix& k, const CrossGram& k_b, const Vector& y_l, Index s,
                   const KernelSpec& kernel, std::shared_ptr<const Dataset> train,
                   const EigenOptions& opts = {});

// The normal-equations route gamma = D^(1/2) [V^T K_B K_B^T V]^+ V^T K_B y.
// Equals the least-squares solution whenever the feature matrix has full
// column rank; kept as an independently checkable second path.
Vector sssl_closed_form_gamma(const EigenSystem& es, const CrossGram& k_b, const Vector& y_l,
                              Index s);

// Pointwise prediction through the eigenfunction sum (slow, reference path).
double predict_sssl(const SsslModel& model, const Eigen::Ref<const Vector>& x);
// Batch prediction through the precomputed kernel-expansion weights.
Vector predict_sssl(const SsslModel& model, const Dataset& queries);

// dual = (K_ll + ridge I)^{-1} y. Throws unless ridge > 0.
KrrModel fit_krr(const GramMatrix& k_ll, const Vector& y_l, double ridge,
                 const KernelSpec& kernel, std::shared_ptr<const Dataset> labeled_points);
double predict_krr(const KrrModel& model, const Eigen::Ref<const Vector>& x);
Vector predict_krr(const KrrModel& model, const Dataset& queries);

// Unnormalized graph Laplacian of the symmetrized k-nearest-neighbour graph
// with heat-kernel edge weights exp(-d^2 / (2 bandwidth^2)).
Eigen::SparseMatrix<double> knn_heat_laplacian(const Dataset& points, int k, double bandwidth);

// Solves (J K + ridge n I + laplacian_weight (n/N^2) L_g K) c = J y_ext for
// the dual coefficients over all N training points. With laplacian_weight = 0
// this reproduces kernel ridge regression on the labeled block at effective
// ridge n * ridge. Throws on a numerically singular system.
LapRlsModel fit_laprls(const GramMatrix& k, const std::vector<Index>& labeled_indices,
                       const Vector& y_l, double ridge, double laplacian_weight, int graph_k,
                       double graph_bandwidth, const KernelSpec& kernel,
                       std::shared_ptr<const Dataset> train);
LapRlsModel fit_laprls_with_laplacian(const GramMatrix& k,
                                      const Eigen::SparseMatrix<double>& laplacian,
                                      const std::vector<Index>& labeled_indices, const Vector& y_l,
                                      double ridge, double laplacian_weight, int graph_k,
                                      double graph_bandwidth, const KernelSpec& kernel,
                                      std::shared_ptr<const Dataset> train);
double predict_laprls(const LapRlsModel& model, const Eigen::Ref<const Vector>& x);
Vector predict_laprls(const LapRlsModel& model, const Dataset& queries);

double regression_error(const Vector& predictions, const Vector& truth, Metric metric);

}  // namespace sssl
