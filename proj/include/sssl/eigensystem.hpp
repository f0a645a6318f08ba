#pragma once

#include <cstdint>
#include <iosfwd>

#include "sssl/kernel.hpp"
#include "sssl/types.hpp"

namespace sssl {

// Top-s eigenpairs (sigma_i, v^i) of a Gram matrix K, together with the
// induced operator eigenvalues lambda_i = sigma_i / N. The eigenfunction
// attached to pair i is phi_i(.) = (1/sqrt(sigma_i)) sum_j v^i_j k(x_j, .).
//
// Pairs with sigma_i <= rank_tolerance are numerically null: they stay in the
// arrays (flagged via usable()) but eigenfunction evaluation refuses them,
// since the 1/sqrt(sigma_i) factor would amplify noise.
struct EigenSystem {
  Vector sigmas;   // length s, descending, clamped to >= 0
  Matrix vectors;  // N x s, orthonormal columns, sign-normalized
  Vector lambdas;  // sigmas / N, the one place this division happens
  Index n_points = 0;
  Index s = 0;
  double rank_tolerance = 0.0;  // 1e-10 * sigma_1
  Index numerical_rank = 0;     // pairs above tolerance among the s computed

  bool usable(Index i) const { return sigmas(i) > rank_tolerance; }
};

struct EigenOptions {
  // Below this size (or when s is a large fraction of N) the dense
  // symmetric solver runs; above it, seeded subspace iteration with a
  // residual check, falling back to dense if it stalls.
  Index dense_threshold = 1024;
  int max_iterations = 100;
  double residual_scale = 1e-6;  // accept when |K v - sigma v| <= scale * max(sigma_1, 1)
  std::uint64_t seed = 0x535354a7c0ffee11ULL;
};

// Throws std::invalid_argument if s < 1 or s > N. Contract: residual
// |K v^i - sigma_i v^i| <= residual_scale * max(sigma_1, 1), orthonormal
// columns, descending sigmas, all sigmas >= -1e-8 * N before clamping.
EigenSystem top_eigenpairs(const GramMatrix& k, Index s, const EigenOptions& opts = {});

// phi_i evaluated at an arbitrary point via the kernel expansion.
// Throws std::domain_error when pair i is below the rank tolerance.
double eval_eigenfunction(const EigenSystem& es, const KernelSpec& spec, const Dataset& train,
                          Index i, const Eigen::Ref<const Vector>& x);

// Feature matrix Phi with Phi(i, j) = phi_j(point i of the cross-Gram's
// column set ... rows of `cross` run over training points):
// Phi = cross^T * V * diag(1/sqrt(sigma)). Throws if any pair is null.
Matrix eigenfunction_features(const EigenSystem& es, const CrossGram& cross);

// CSV rows "index,sigma,lambda", 1-based index.
void write_spectrum_csv(const EigenSystem& es, std::ostream& out);

}  // namespace sssl
