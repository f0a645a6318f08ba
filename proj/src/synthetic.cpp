#include "sssl/synthetic.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "sssl/rng.hpp"

namespace sssl {
namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr Index kQuadratureIntervals = 1 << 14;  // Simpson nodes: 2^14 + 1

double simpson_mean(const std::function<double(double)>& fn) {
  // Mean of fn over [0,1] by composite Simpson on a fixed grid, so the
  // ground truth is reproducible bit-for-bit.
  const Index m = kQuadratureIntervals;
  const double h = 1.0 / static_cast<double>(m);
  double acc = fn(0.0) + fn(1.0);
  for (Index i = 1; i < m; ++i) {
    acc += fn(static_cast<double>(i) * h) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  return acc * h / 3.0;
}

double grid_max_abs(const std::function<double(double)>& fn) {
  const Index m = kQuadratureIntervals;
  double best = 0.0;
  for (Index i = 0; i <= m; ++i) {
    best = std::max(best, std::abs(fn(static_cast<double>(i) / static_cast<double>(m))));
  }
  return best;
}

}  // namespace

double SyntheticSpec::a_squared() const {
  double sum = 0.0;
  for (Index k = 1; k <= k_max; ++k) sum += std::pow(static_cast<double>(k), -p);
  return 1.0 / (2.0 * sum);
}

void SyntheticSpec::validate() const {
  if (!(p > 2.0)) throw std::invalid_argument("SyntheticSpec: p must exceed 2");
  if (k_max < 1) throw std::invalid_argument("SyntheticSpec: k_max must be >= 1");
  if (!(r > 0.0)) throw std::invalid_argument("SyntheticSpec: R must be positive");
  if (residual_amp < 0.0) {
    throw std::invalid_argument("SyntheticSpec: residual_amp must be non-negative");
  }
  if (alpha.size() != k_max) {
    throw std::invalid_argument("SyntheticSpec: alpha must have length k_max");
  }
  if (!alpha.allFinite()) throw std::invalid_argument("SyntheticSpec: alpha must be finite");

  const double a2 = a_squared();
  double norm_sq = 0.0;
  for (Index k = 1; k <= k_max; ++k) {
    const double lambda = a2 * std::pow(static_cast<double>(k), -p);
    norm_sq += alpha(k - 1) * alpha(k - 1) / lambda;
  }
  if (norm_sq > r * r * (1.0 + 1e-9)) {
    throw std::invalid_argument("SyntheticSpec: |g|_H^2 = " + std::to_string(norm_sq) +
                                " exceeds R^2 = " + std::to_string(r * r));
  }
}

Vector flat_rkhs_alpha(Index k_max, double p, double r) {
  if (k_max < 1 || !(p > 2.0) || !(r > 0.0)) {
    throw std::invalid_argument("flat_rkhs_alpha: bad arguments");
  }
  double sum = 0.0;
  for (Index k = 1; k <= k_max; ++k) sum += std::pow(static_cast<double>(k), -p);
  const double a2 = 1.0 / (2.0 * sum);
  Vector alpha(k_max);
  for (Index k = 1; k <= k_max; ++k) {
    const double lambda = a2 * std::pow(static_cast<double>(k), -p);
    alpha(k - 1) = r * std::sqrt(lambda / static_cast<double>(k_max));
  }
  return alpha;
}

Vector population_spectrum(const SyntheticSpec& spec) {
  spec.validate();
  const double a2 = spec.a_squared();
  Vector lambdas(spec.k_max);
  for (Index k = 1; k <= spec.k_max; ++k) {
    lambdas(k - 1) = a2 * std::pow(static_cast<double>(k), -spec.p);
  }
  return lambdas;
}

SyntheticData make_synthetic(const SyntheticSpec& spec, Index n_samples) {
  spec.validate();
  if (n_samples < 1) throw std::invalid_argument("make_synthetic: N must be >= 1");

  const Index k_max = spec.k_max;
  const Vector alpha = spec.alpha;
  const double amp = spec.residual_amp;

  auto g = [alpha, k_max](double x) {
    double acc = 0.0;
    for (Index k = 1; k <= k_max; ++k) {
      acc += alpha(k - 1) * std::sqrt(2.0) * std::cos(static_cast<double>(k) * kPi * x);
    }
    return acc;
  };
  // Residual shape: a unit-sup-norm cosine one frequency above the basis, so
  // it is orthogonal to the RKHS under the uniform measure.
  auto resid = [k_max](double x) {
    return std::cos(static_cast<double>(k_max + 1) * kPi * x);
  };
  auto f = [g, resid, amp](double x) { return g(x) + amp * resid(x); };

  GroundTruth truth;
  truth.f = f;
  truth.g = g;
  truth.eps_sq = amp * amp * simpson_mean([resid](double x) {
    const double v = resid(x);
    return v * v;
  });
  const double sup = grid_max_abs(resid);
  truth.eps_max_sq = amp * amp * sup * sup;

  Rng rng(Rng::derive(spec.seed, 0x73796e7468ULL));
  Matrix x(n_samples, 1);
  for (Index i = 0; i < n_samples; ++i) x(i, 0) = rng.uniform();
  Vector y(n_samples);
  for (Index i = 0; i < n_samples; ++i) y(i) = f(x(i, 0));

  SyntheticData out;
  out.data = Dataset(std::move(x), std::move(y));
  out.truth = std::move(truth);
  out.kernel = cosine_mixture_kernel(population_spectrum(spec));
  return out;
}

McEstimate true_generalization_error(const std::function<Vector(const Dataset&)>& predictor,
                                     const GroundTruth& truth, Index n_mc, std::uint64_t seed) {
  if (n_mc < 100) throw std::invalid_argument("true_generalization_error: n_mc must be >= 100");
  Rng rng(Rng::derive(seed, 0x6d63657674ULL));
  Matrix x(n_mc, 1);
  for (Index i = 0; i < n_mc; ++i) x(i, 0) = rng.uniform();
  Dataset queries(x);
  const Vector pred = predictor(queries);
  if (pred.size() != n_mc) {
    throw std::invalid_argument("true_generalization_error: predictor returned wrong length");
  }
  double mean = 0.0, m2 = 0.0;
  for (Index i = 0; i < n_mc; ++i) {
    const double e = pred(i) - truth.f(queries.x(i, 0));
    const double sq = e * e;
    const double delta = sq - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (sq - mean);
  }
  McEstimate est;
  est.value = mean;
  const double var = m2 / static_cast<double>(n_mc - 1);
  est.std_error = std::sqrt(var / static_cast<double>(n_mc));
  return est;
}

double worst_case_residual_ratio(const GroundTruth& truth, Index n_unlabeled, Index n_labeled) {
  if (n_unlabeled < 2 || n_labeled < 1) {
    throw std::invalid_argument("worst_case_residual_ratio: needs N >= 2 and n >= 1");
  }
  if (truth.eps_sq <= 0.0) return 0.0;
  return truth.eps_max_sq * std::log(static_cast<double>(n_unlabeled)) /
         (static_cast<double>(n_labeled) * truth.eps_sq);
}

}  // namespace sssl
