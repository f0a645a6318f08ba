#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <numeric>

#include "sssl/diagnostics.hpp"
#include "sssl/eigensystem.hpp"
#include "sssl/models.hpp"
#include "sssl/synthetic.hpp"

using namespace sssl;

namespace {

SyntheticSpec base_spec(double p = 3.0, Index k_max = 64, double r = 1.0) {
  SyntheticSpec spec;
  spec.p = p;
  spec.k_max = k_max;
  spec.r = r;
  spec.alpha = flat_rkhs_alpha(k_max, p, r);
  return spec;
}

}  // namespace

TEST_CASE("spec validation") {
  SyntheticSpec spec = base_spec();
  CHECK_NOTHROW(spec.validate());

  SyntheticSpec bad_p = spec;
  bad_p.p = 2.0;
  CHECK_THROWS_AS(bad_p.validate(), std::invalid_argument);

  SyntheticSpec bad_len = spec;
  bad_len.alpha = Vector::Zero(3);
  CHECK_THROWS_AS(bad_len.validate(), std::invalid_argument);

  SyntheticSpec over_budget = spec;
  over_budget.alpha *= 10.0;  // blows the RKHS-norm budget
  CHECK_THROWS_AS(over_budget.validate(), std::invalid_argument);

  SyntheticSpec neg_amp = spec;
  neg_amp.residual_amp = -0.1;
  CHECK_THROWS_AS(neg_amp.validate(), std::invalid_argument);
}

TEST_CASE("rkhs norm of the default coefficients saturates the budget") {
  const SyntheticSpec spec = base_spec(3.0, 64, 1.5);
  const Vector lambdas = population_spectrum(spec);
  double norm_sq = 0.0;
  for (Index k = 0; k < 64; ++k) norm_sq += spec.alpha(k) * spec.alpha(k) / lambdas(k);
  CHECK(norm_sq == doctest::Approx(1.5 * 1.5).epsilon(1e-9));
}

TEST_CASE("population spectrum closed form") {
  SyntheticSpec spec = base_spec(3.0, 3);
  spec.alpha = flat_rkhs_alpha(3, 3.0, 1.0);
  const Vector lambdas = population_spectrum(spec);
  const double c = spec.a_squared();
  CHECK(lambdas(0) == doctest::Approx(c).epsilon(1e-12));
  CHECK(lambdas(1) == doctest::Approx(c / 8.0).epsilon(1e-12));
  CHECK(lambdas(2) == doctest::Approx(c / 27.0).epsilon(1e-12));
  CHECK(lambdas(0) / lambdas(1) == doctest::Approx(std::pow(2.0, 3.0)).epsilon(1e-12));

  const PowerLawFit fit = fit_power_law(population_spectrum(base_spec(2.7, 32)));
  CHECK(std::abs(fit.p - 2.7) <= 1e-9);
}

TEST_CASE("zero residual means f equals g exactly") {
  SyntheticSpec spec = base_spec();
  spec.residual_amp = 0.0;
  const SyntheticData sd = make_synthetic(spec, 50);
  CHECK(sd.truth.eps_sq == 0.0);
  CHECK(sd.truth.eps_max_sq == 0.0);
  for (double x : {0.0, 0.31, 0.77, 1.0}) {
    CHECK(sd.truth.f(x) == sd.truth.g(x));
  }
}

TEST_CASE("quadrature ground truth: eps^2 = amp^2/2, eps_max^2 = amp^2") {
  SyntheticSpec spec = base_spec();
  spec.residual_amp = 0.2;
  const SyntheticData sd = make_synthetic(spec, 10);
  CHECK(sd.truth.eps_sq == doctest::Approx(0.5 * 0.2 * 0.2).epsilon(1e-8));
  CHECK(sd.truth.eps_max_sq == doctest::Approx(0.2 * 0.2).epsilon(1e-12));
  CHECK(sd.truth.eps_sq <= sd.truth.eps_max_sq);

  // The residual is orthogonal to g under the uniform measure, so labels
  // differ from g by exactly amp * cos((k_max+1) pi x).
  for (Index i = 0; i < sd.data.size(); ++i) {
    const double x = sd.data.x(i, 0);
    CHECK((*sd.data.y)(i) == doctest::Approx(sd.truth.f(x)).epsilon(1e-14));
  }
}

TEST_CASE("determinism and sampling range") {
  SyntheticSpec spec = base_spec();
  spec.seed = 77;
  const SyntheticData a = make_synthetic(spec, 200);
  const SyntheticData b = make_synthetic(spec, 200);
  CHECK((a.data.x - b.data.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((*a.data.y - *b.data.y).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.data.x.minCoeff() >= 0.0);
  CHECK(a.data.x.maxCoeff() < 1.0);

  spec.seed = 78;
  const SyntheticData c = make_synthetic(spec, 200);
  CHECK((a.data.x - c.data.x).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("kernel diagonal stays within the boundedness assumption") {
  const SyntheticSpec spec = base_spec(2.5, 48);
  const SyntheticData sd = make_synthetic(spec, 300);
  Vector x(1);
  for (Index i = 0; i < sd.data.size(); ++i) {
    x(0) = sd.data.x(i, 0);
    const double diag = eval_kernel(sd.kernel, x, x);
    CHECK(diag <= 1.0 + 1e-12);
    CHECK(diag > 0.0);
  }
  // Equality is attained at x = 0 where every cosine peaks.
  x(0) = 0.0;
  CHECK(eval_kernel(sd.kernel, x, x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constructed gram matrices are PSD") {
  const SyntheticSpec spec = base_spec();
  const SyntheticData sd = make_synthetic(spec, 100);
  const GramMatrix k = gram_matrix(sd.kernel, sd.data);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(k.values);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-8 * 100.0);
}

TEST_CASE("population eigenfunctions: sup norm sqrt(2), Monte-Carlo orthonormality") {
  // sup |sqrt(2) cos(k pi x)| = sqrt(2), attained at x = 0.
  for (Index k = 1; k <= 5; ++k) {
    double sup = 0.0;
    for (Index i = 0; i <= 5000; ++i) {
      const double x = static_cast<double>(i) / 5000.0;
      sup = std::max(sup, std::abs(std::sqrt(2.0) * std::cos(k * 3.141592653589793 * x)));
    }
    CHECK(sup == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  }

  SyntheticSpec spec = base_spec();
  spec.seed = 1;
  const Index n = 10000;
  const SyntheticData sd = make_synthetic(spec, n);
  const double tol = 3.0 / std::sqrt(static_cast<double>(n));
  for (Index j = 1; j <= 4; ++j) {
    for (Index k = j; k <= 4; ++k) {
      double acc = 0.0;
      for (Index i = 0; i < n; ++i) {
        const double x = sd.data.x(i, 0);
        acc += 2.0 * std::cos(j * 3.141592653589793 * x) * std::cos(k * 3.141592653589793 * x);
      }
      acc /= static_cast<double>(n);
      CHECK(std::abs(acc - (j == k ? 1.0 : 0.0)) <= tol);
    }
  }
}

TEST_CASE("empirical eigenvalues approach the population spectrum") {
  SyntheticSpec spec = base_spec();
  const Vector pop = population_spectrum(spec);

  double prev_err = std::numeric_limits<double>::infinity();
  for (Index n : {200, 1000, 5000}) {
    double worst = 0.0;
    for (int seed = 0; seed < 3; ++seed) {
      spec.seed = 300 + static_cast<std::uint64_t>(seed);
      const SyntheticData sd = make_synthetic(spec, n);
      const EigenSystem es = top_eigenpairs(gram_matrix(sd.kernel, sd.data), 5);
      for (Index i = 0; i < 5; ++i) {
        worst = std::max(worst, std::abs(es.lambdas(i) - pop(i)) / pop(i));
      }
    }
    CHECK(worst < prev_err);
    prev_err = worst;
    if (n == 5000) CHECK(worst <= 0.20);
  }
}

TEST_CASE("monte-carlo generalization error") {
  SyntheticSpec spec = base_spec();
  spec.residual_amp = 0.1;
  const SyntheticData sd = make_synthetic(spec, 10);

  // A perfect predictor scores zero.
  auto perfect = [&](const Dataset& q) {
    Vector out(q.size());
    for (Index i = 0; i < q.size(); ++i) out(i) = sd.truth.f(q.x(i, 0));
    return out;
  };
  const McEstimate zero = true_generalization_error(perfect, sd.truth, 5000, 1);
  CHECK(zero.value == 0.0);

  // Zero predictor against g = phi_1: error is E[phi_1^2] = 1.
  SyntheticSpec unit = base_spec(3.0, 64, 2.0);
  unit.alpha = Vector::Zero(64);
  unit.alpha(0) = 1.0;
  unit.validate();
  const SyntheticData one = make_synthetic(unit, 10);
  auto zero_pred = [](const Dataset& q) { return Vector(Vector::Zero(q.size())); };
  const McEstimate est = true_generalization_error(zero_pred, one.truth, 20000, 2);
  CHECK(std::abs(est.value - 1.0) <= 3.0 * est.std_error);
  CHECK(est.std_error > 0.0);

  CHECK_THROWS_AS(true_generalization_error(zero_pred, one.truth, 50, 3), std::invalid_argument);
}

TEST_CASE("near-noiseless rank-1 recovery through the full pipeline") {
  SyntheticSpec spec = base_spec(3.0, 64, 2.0);
  spec.alpha = Vector::Zero(64);
  spec.alpha(0) = 0.8;
  spec.seed = 200;
  const SyntheticData sd = make_synthetic(spec, 1500);
  auto train = std::make_shared<const Dataset>(sd.data);
  const GramMatrix k = gram_matrix(sd.kernel, *train);
  const EigenSystem es = top_eigenpairs(k, 1);

  std::vector<Index> labeled(100);
  std::iota(labeled.begin(), labeled.end(), Index{0});
  Vector y(100);
  for (Index i = 0; i < 100; ++i) y(i) = (*train->y)(i);

  const SsslModel model =
      fit_sssl(es, cross_gram(sd.kernel, *train, labeled), y, 1, sd.kernel, train);
  auto predictor = [&](const Dataset& q) { return predict_sssl(model, q); };
  const McEstimate err = true_generalization_error(predictor, sd.truth, 20000, 999);
  // g has second moment 0.64; recovery error must be below 1e-3 of that scale.
  CHECK(err.value <= 1e-3 * 0.64);
}

TEST_CASE("a0 ratio") {
  SyntheticSpec spec = base_spec();
  spec.residual_amp = 0.1;
  const SyntheticData sd = make_synthetic(spec, 10);
  const double expected =
      sd.truth.eps_max_sq * std::log(1000.0) / (50.0 * sd.truth.eps_sq);
  CHECK(worst_case_residual_ratio(sd.truth, 1000, 50) == doctest::Approx(expected).epsilon(1e-12));
  spec.residual_amp = 0.0;
  const SyntheticData nores = make_synthetic(spec, 10);
  CHECK(worst_case_residual_ratio(nores.truth, 1000, 50) == 0.0);
}
