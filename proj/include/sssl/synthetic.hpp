#pragma once

#include <cstdint>
#include <functional>

#include "sssl/kernel.hpp"
#include "sssl/types.hpp"

namespace sssl {

// One-dimensional testbed with uniform samples on [0,1], eigenfunctions
// phi_k(x) = sqrt(2) cos(k pi x) (orthonormal under the uniform measure,
// bounded by sqrt(2)), and spectrum lambda_k = a^2 k^(-p) truncated at k_max.
// The amplitude a^2 = 1 / (2 sum_k k^(-p)) makes k(x,x) <= 1 with equality
// at x = 0. Everything downstream of the spec is exactly computable.
struct SyntheticSpec {
  double p = 3.0;            // spectrum decay, must exceed 2
  Index k_max = 64;          // basis truncation
  double r = 1.0;            // RKHS-norm budget for g
  Vector alpha;              // coefficients of g, length k_max
  double residual_amp = 0.0; // sup-norm of f - g
  std::uint64_t seed = 0;

  double a_squared() const;
  // Throws std::invalid_argument when the coefficient budget
  // sum alpha_k^2 / lambda_k > r^2 or any field is malformed.
  void validate() const;
};

// Coefficients with uniform RKHS energy across the modes,
// alpha_k proportional to sqrt(lambda_k), saturating |g| = r.
Vector flat_rkhs_alpha(Index k_max, double p, double r);

struct GroundTruth {
  std::function<double(double)> f;  // labeling function
  std::function<double(double)> g;  // best RKHS-ball approximation of f
  double eps_sq = 0.0;              // E[(f-g)^2] by fixed-order quadrature
  double eps_max_sq = 0.0;          // sup (f-g)^2
};

struct SyntheticData {
  Dataset data;       // x uniform on [0,1], labels y = f(x)
  GroundTruth truth;
  KernelSpec kernel;  // cosine_mixture with weights lambda_k
};

// Deterministic given (spec, n_samples): same seed, same dataset.
SyntheticData make_synthetic(const SyntheticSpec& spec, Index n_samples);

// (lambda_1, ..., lambda_{k_max}) with lambda_k = a^2 k^(-p).
Vector population_spectrum(const SyntheticSpec& spec);

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Monte-Carlo estimate of E_x[(prediction(x) - f(x))^2] over fresh uniform
// draws. The predictor maps a query Dataset to a prediction vector. Throws
// unless n_mc >= 100.
McEstimate true_generalization_error(const std::function<Vector(const Dataset&)>& predictor,
                                     const GroundTruth& truth, Index n_mc, std::uint64_t seed);

// eps_max^2 ln(N) / (n eps^2), the scale the worst-case residual assumption
// compares against; reported without judging a threshold.
double worst_case_residual_ratio(const GroundTruth& truth, Index n_unlabeled, Index n_labeled);

}  // namespace sssl
