#include "sssl/eigensystem.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "sssl/rng.hpp"

namespace sssl {
namespace {

constexpr double kRankTolScale = 1e-10;
constexpr double kPsdTolScale = 1e-8;

// Makes the largest-magnitude entry of each column positive, so outputs are
// deterministic across solvers. Predictions are invariant to the flip.
void normalize_signs(Matrix& v) {
  for (Index j = 0; j < v.cols(); ++j) {
    Index arg = 0;
    double best = -1.0;
    for (Index i = 0; i < v.rows(); ++i) {
      const double a = std::abs(v(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (v(arg, j) < 0.0) v.col(j) = -v.col(j);
  }
}

EigenSystem finalize(Vector sigmas, Matrix vectors, Index n) {
  const double sigma1 = sigmas.size() > 0 ? sigmas(0) : 0.0;
  const double psd_floor = -kPsdTolScale * static_cast<double>(n);
  for (Index i = 0; i < sigmas.size(); ++i) {
    if (sigmas(i) < psd_floor) {
      throw std::invalid_argument("top_eigenpairs: matrix is not PSD within tolerance (eigenvalue " +
                                  std::to_string(sigmas(i)) + ")");
    }
    if (sigmas(i) < 0.0) sigmas(i) = 0.0;
  }
  normalize_signs(vectors);

  EigenSystem es;
  es.rank_tolerance = kRankTolScale * std::max(sigma1, 0.0);
  es.numerical_rank = 0;
  for (Index i = 0; i < sigmas.size(); ++i) {
    if (sigmas(i) > es.rank_tolerance) ++es.numerical_rank;
  }
  es.n_points = n;
  es.s = sigmas.size();
  es.lambdas = sigmas / static_cast<double>(n);
  es.sigmas = std::move(sigmas);
  es.vectors = std::move(vectors);
  return es;
}

EigenSystem dense_path(const Matrix& k, Index s) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(k);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("top_eigenpairs: dense eigendecomposition failed");
  }
  const Index n = k.rows();
  Vector sigmas(s);
  Matrix vectors(n, s);
  for (Index i = 0; i < s; ++i) {
    sigmas(i) = solver.eigenvalues()(n - 1 - i);
    vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  return finalize(std::move(sigmas), std::move(vectors), n);
}

// Blocked subspace iteration with Rayleigh-Ritz extraction. The start block is
// seeded, so results are reproducible run to run.
bool subspace_path(const Matrix& k, Index s, const EigenOptions& opts, Vector& out_sigmas,
                   Matrix& out_vectors) {
  const Index n = k.rows();
  const Index b = std::min(n, 2 * s + 16);

  Rng rng(Rng::derive(opts.seed, static_cast<std::uint64_t>(n) * 2654435761ULL +
                                     static_cast<std::uint64_t>(s)));
  Matrix q(n, b);
  for (Index j = 0; j < b; ++j) {
    for (Index i = 0; i < n; ++i) q(i, j) = rng.normal();
  }
  {
    Eigen::HouseholderQR<Matrix> qr(q);
    q = qr.householderQ() * Matrix::Identity(n, b);
  }

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    Matrix z = k * q;
    Matrix rq = q.transpose() * z;
    rq = 0.5 * (rq + rq.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> small(rq);
    if (small.info() != Eigen::Success) return false;

    // Reorder Ritz pairs descending.
    Matrix u(b, b);
    Vector theta(b);
    for (Index i = 0; i < b; ++i) {
      theta(i) = small.eigenvalues()(b - 1 - i);
      u.col(i) = small.eigenvectors().col(b - 1 - i);
    }
    Matrix ritz = q * u.leftCols(s);
    Matrix k_ritz = z * u.leftCols(s);

    const double tol = opts.residual_scale * std::max(theta(0), 1.0);
    bool converged = true;
    for (Index i = 0; i < s; ++i) {
      const double res = (k_ritz.col(i) - theta(i) * ritz.col(i)).norm();
      if (res > tol) {
        converged = false;
        break;
      }
    }
    if (converged) {
      out_sigmas = theta.head(s);
      out_vectors = std::move(ritz);
      return true;
    }
    Eigen::HouseholderQR<Matrix> qr(z);
    q = qr.householderQ() * Matrix::Identity(n, b);
  }
  return false;
}

}  // namespace

EigenSystem top_eigenpairs(const GramMatrix& k, Index s, const EigenOptions& opts) {
  const Index n = k.n_points();
  if (s < 1) throw std::invalid_argument("top_eigenpairs: s must be >= 1");
  if (s > n) {
    throw std::invalid_argument("top_eigenpairs: s = " + std::to_string(s) +
                                " exceeds matrix size N = " + std::to_string(n));
  }
  if (n <= opts.dense_threshold || 2 * s + 16 >= n / 2) {
    return dense_path(k.values, s);
  }
  Vector sigmas;
  Matrix vectors;
  if (subspace_path(k.values, s, opts, sigmas, vectors)) {
    return finalize(std::move(sigmas), std::move(vectors), n);
  }
  return dense_path(k.values, s);
}

double eval_eigenfunction(const EigenSystem& es, const KernelSpec& spec, const Dataset& train,
                          Index i, const Eigen::Ref<const Vector>& x) {
  if (i < 0 || i >= es.s) throw std::out_of_range("eval_eigenfunction: eigenpair index out of range");
  if (train.size() != es.n_points) {
    throw std::invalid_argument("eval_eigenfunction: training set size does not match eigensystem");
  }
  if (!es.usable(i)) {
    throw std::domain_error("eval_eigenfunction: eigenpair " + std::to_string(i) +
                            " is below the rank tolerance; its eigenfunction is undefined");
  }
  double acc = 0.0;
  for (Index j = 0; j < es.n_points; ++j) {
    acc += es.vectors(j, i) * eval_kernel(spec, train.x.row(j).transpose(), x);
  }
  return acc / std::sqrt(es.sigmas(i));
}

Matrix eigenfunction_features(const EigenSystem& es, const CrossGram& cross) {
  if (cross.rows() != es.n_points) {
    throw std::invalid_argument("eigenfunction_features: cross-Gram row count " +
                                std::to_string(cross.rows()) + " does not match N = " +
                                std::to_string(es.n_points));
  }
  Vector inv_sqrt(es.s);
  for (Index i = 0; i < es.s; ++i) {
    if (!es.usable(i)) {
      throw std::domain_error("eigenfunction_features: eigenpair " + std::to_string(i) +
                              " is below the rank tolerance");
    }
    inv_sqrt(i) = 1.0 / std::sqrt(es.sigmas(i));
  }
  return cross.values.transpose() * es.vectors * inv_sqrt.asDiagonal();
}

void write_spectrum_csv(const EigenSystem& es, std::ostream& out) {
  out << "index,sigma,lambda\n";
  char buf[80];
  for (Index i = 0; i < es.s; ++i) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g\n", static_cast<long long>(i + 1),
                  es.sigmas(i), es.lambdas(i));
    out << buf;
  }
}

}  // namespace sssl
