#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <numeric>

#include "sssl/models.hpp"
#include "sssl/rng.hpp"

using namespace sssl;

namespace {

Dataset random_dataset(Rng& rng, Index n, Index d) {
  Matrix x(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) x(i, j) = rng.uniform(-1.0, 1.0);
  }
  return Dataset(std::move(x));
}

Vector random_labels(Rng& rng, Index n) {
  Vector y(n);
  for (Index i = 0; i < n; ++i) y(i) = rng.uniform(-2.0, 2.0);
  return y;
}

std::vector<Index> iota_indices(Index n) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  return idx;
}

struct Instance {
  std::shared_ptr<const Dataset> data;
  KernelSpec spec;
  GramMatrix gram;
  EigenSystem es;
};

Instance make_instance(Rng& rng, Index n, Index d, double bandwidth, Index s) {
  Instance inst;
  inst.data = std::make_shared<const Dataset>(random_dataset(rng, n, d));
  inst.spec = rbf_kernel(bandwidth);
  inst.gram = gram_matrix(inst.spec, *inst.data);
  inst.es = top_eigenpairs(inst.gram, s);
  return inst;
}

}  // namespace

TEST_CASE("constant kernel with one eigenfunction fits the label mean") {
  Matrix x(5, 1);
  x << 1.0, 2.0, 3.0, 4.0, 5.0;
  auto data = std::make_shared<const Dataset>(Dataset(std::move(x)));
  const KernelSpec spec = linear_normalized_kernel();
  const GramMatrix k = gram_matrix(spec, *data);

  Vector y(3);
  y << 2.0, -1.0, 5.0;
  const SsslModel model = fit_sssl(k, cross_gram(spec, *data, {0, 1, 2}), y, 1, spec, data);

  Vector q(1);
  q << 9.0;
  CHECK(predict_sssl(model, q) == doctest::Approx(y.mean()).epsilon(1e-10));
}

TEST_CASE("full basis with all points labeled interpolates") {
  Rng rng(53);
  for (int rep = 0; rep < 8; ++rep) {
    const Index n = 8;
    Instance inst = make_instance(rng, n, 3, 0.9, n);
    REQUIRE(inst.es.numerical_rank == n);
    const Vector y = random_labels(rng, n);
    const SsslModel model =
        fit_sssl(inst.es, cross_gram(inst.spec, *inst.data, iota_indices(n)), y, n, inst.spec,
                 inst.data);
    const Vector pred = predict_sssl(model, *inst.data);
    for (Index i = 0; i < n; ++i) CHECK(std::abs(pred(i) - y(i)) <= 1e-6);
  }
}

TEST_CASE("gamma matches an independent least-squares oracle") {
  Rng rng(59);
  const Index n = 5;
  Instance inst = make_instance(rng, n, 2, 1.1, n);
  const Vector y = random_labels(rng, n);
  const std::vector<Index> labeled = iota_indices(n);
  const CrossGram kb = cross_gram(inst.spec, *inst.data, labeled);

  const SsslModel model = fit_sssl(inst.es, kb, y, 2, inst.spec, inst.data);

  // Oracle: assemble Phi explicitly and solve through a different
  // decomposition.
  EigenSystem es2 = inst.es;
  es2.sigmas = inst.es.sigmas.head(2);
  es2.vectors = inst.es.vectors.leftCols(2);
  es2.lambdas = inst.es.lambdas.head(2);
  es2.s = 2;
  const Matrix phi = eigenfunction_features(es2, kb);
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(phi);
  const Vector oracle = cod.solve(y);
  CHECK((model.gamma - oracle).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("closed form equals the minimum-norm solve on full-rank instances") {
  Rng rng(61);
  for (int rep = 0; rep < 30; ++rep) {
    const Index n = 4 + static_cast<Index>(rng.index(12));
    const Index n_labeled = 2 + static_cast<Index>(rng.index(static_cast<std::size_t>(n - 1)));
    Instance inst = make_instance(rng, n, 2, rng.uniform(0.6, 1.6), n);
    const Index s = 1 + static_cast<Index>(rng.index(static_cast<std::size_t>(
                            std::min(n_labeled, inst.es.numerical_rank))));
    std::vector<Index> labeled = iota_indices(n);
    Rng shuffle_rng(rng.next_u64());
    shuffle_rng.shuffle(labeled);
    labeled.resize(static_cast<std::size_t>(n_labeled));

    const CrossGram kb = cross_gram(inst.spec, *inst.data, labeled);
    Vector y = random_labels(rng, n_labeled);
    const SsslModel model = fit_sssl(inst.es, kb, y, s, inst.spec, inst.data);
    const Vector closed = sssl_closed_form_gamma(inst.es, kb, y, s);
    CHECK((model.gamma - closed).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("label-scale equivariance") {
  Rng rng(67);
  Instance inst = make_instance(rng, 7, 2, 1.0, 5);
  const std::vector<Index> labeled = {0, 2, 4, 6};
  const CrossGram kb = cross_gram(inst.spec, *inst.data, labeled);
  Vector y = random_labels(rng, 4);

  const SsslModel base = fit_sssl(inst.es, kb, y, 3, inst.spec, inst.data);
  const SsslModel scaled = fit_sssl(inst.es, kb, Vector(3.0 * y), 3, inst.spec, inst.data);
  CHECK((scaled.gamma - 3.0 * base.gamma).cwiseAbs().maxCoeff() <= 1e-9);

  const Vector p1 = predict_sssl(base, *inst.data);
  const Vector p2 = predict_sssl(scaled, *inst.data);
  CHECK((p2 - 3.0 * p1).cwiseAbs().maxCoeff() <= 1e-9);

  const double mse1 = regression_error(p1, Vector(Vector::Zero(7)), Metric::mse);
  const double mse2 = regression_error(p2, Vector(Vector::Zero(7)), Metric::mse);
  CHECK(mse2 == doctest::Approx(9.0 * mse1).epsilon(1e-9));
}

TEST_CASE("training residual is monotone non-increasing in s") {
  Rng rng(71);
  Instance inst = make_instance(rng, 9, 2, 0.8, 9);
  const std::vector<Index> labeled = iota_indices(6);
  const CrossGram kb = cross_gram(inst.spec, *inst.data, labeled);
  Vector y = random_labels(rng, 6);
  const Dataset labeled_ds = inst.data->select(labeled);

  double prev = std::numeric_limits<double>::infinity();
  for (Index s = 1; s <= std::min<Index>(6, inst.es.numerical_rank); ++s) {
    const SsslModel model = fit_sssl(inst.es, kb, y, s, inst.spec, inst.data);
    const Vector pred = predict_sssl(model, labeled_ds);
    const double objective = (pred - y).squaredNorm();
    CHECK(objective <= prev + 1e-10);
    prev = objective;
  }
}

TEST_CASE("predictions are invariant to eigenvector sign flips") {
  Rng rng(73);
  Instance inst = make_instance(rng, 8, 2, 1.0, 5);
  const std::vector<Index> labeled = {1, 3, 5, 7};
  const CrossGram kb = cross_gram(inst.spec, *inst.data, labeled);
  Vector y = random_labels(rng, 4);

  const SsslModel base = fit_sssl(inst.es, kb, y, 4, inst.spec, inst.data);

  EigenSystem flipped = inst.es;
  flipped.vectors.col(2) = -flipped.vectors.col(2);
  const SsslModel other = fit_sssl(flipped, kb, y, 4, inst.spec, inst.data);

  const Vector p1 = predict_sssl(base, *inst.data);
  const Vector p2 = predict_sssl(other, *inst.data);
  CHECK((p1 - p2).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("pointwise and batch prediction paths agree") {
  Rng rng(79);
  Instance inst = make_instance(rng, 10, 3, 1.2, 6);
  const std::vector<Index> labeled = iota_indices(5);
  Vector y = random_labels(rng, 5);
  const SsslModel model =
      fit_sssl(inst.es, cross_gram(inst.spec, *inst.data, labeled), y, 4, inst.spec, inst.data);

  const Dataset queries = random_dataset(rng, 10, 3);
  const Vector batch = predict_sssl(model, queries);
  for (Index i = 0; i < queries.size(); ++i) {
    const double single = predict_sssl(model, queries.x.row(i).transpose());
    CHECK(std::abs(single - batch(i)) <= 1e-10);
  }

  SsslModel zero = model;
  zero.gamma.setZero();
  zero.weights.setZero();
  for (Index i = 0; i < 3; ++i) {
    CHECK(predict_sssl(zero, queries.x.row(i).transpose()) == 0.0);
  }
}

TEST_CASE("fit_sssl input validation") {
  Rng rng(83);
  Instance inst = make_instance(rng, 6, 2, 1.0, 6);
  const CrossGram kb = cross_gram(inst.spec, *inst.data, {0, 1});
  Vector y(2);
  y << 1.0, -1.0;
  CHECK_THROWS_AS(fit_sssl(inst.es, kb, y, inst.es.numerical_rank + 1, inst.spec, inst.data),
                  std::invalid_argument);
  CHECK_THROWS_AS(fit_sssl(inst.es, kb, Vector(), 2, inst.spec, inst.data),
                  std::invalid_argument);
  CHECK_THROWS_AS(fit_sssl(inst.es, kb, y, 0, inst.spec, inst.data), std::invalid_argument);
}

TEST_CASE("krr closed-form single point") {
  Matrix x(1, 1);
  x << 0.0;
  auto pts = std::make_shared<const Dataset>(Dataset(std::move(x)));
  Vector y(1);
  y << 2.0;
  const KernelSpec spec = rbf_kernel(1.0);
  const KrrModel model = fit_krr(gram_matrix(spec, *pts), y, 1.0, spec, pts);
  CHECK(model.dual_coeffs(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(predict_krr(model, pts->x.row(0).transpose()) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("krr shrinks to zero under a huge ridge") {
  Rng rng(89);
  auto pts = std::make_shared<const Dataset>(random_dataset(rng, 6, 2));
  const Vector y = random_labels(rng, 6);
  const KernelSpec spec = rbf_kernel(0.8);
  const KrrModel model = fit_krr(gram_matrix(spec, *pts), y, 1e6, spec, pts);
  const Vector pred = predict_krr(model, *pts);
  const double bound = y.norm() * 6.0 / 1e6;
  for (Index i = 0; i < 6; ++i) CHECK(std::abs(pred(i)) <= bound);
}

TEST_CASE("krr matches a dense-solve oracle") {
  Rng rng(97);
  auto pts = std::make_shared<const Dataset>(random_dataset(rng, 6, 3));
  const Vector y = random_labels(rng, 6);
  const KernelSpec spec = rbf_kernel(1.0);
  const GramMatrix k = gram_matrix(spec, *pts);
  const double ridge = 0.05;
  const KrrModel model = fit_krr(k, y, ridge, spec, pts);

  Matrix system = k.values + ridge * Matrix::Identity(6, 6);
  const Vector oracle = Eigen::FullPivLU<Matrix>(system).solve(y);
  CHECK((model.dual_coeffs - oracle).cwiseAbs().maxCoeff() <= 1e-8);

  CHECK_THROWS_AS(fit_krr(k, y, 0.0, spec, pts), std::invalid_argument);
  CHECK_THROWS_AS(fit_krr(k, y, -1.0, spec, pts), std::invalid_argument);
}

TEST_CASE("laprls with zero laplacian weight reduces to krr on the labeled block") {
  Rng rng(101);
  for (int rep = 0; rep < 6; ++rep) {
    const Index n = 10;
    auto data = std::make_shared<const Dataset>(random_dataset(rng, n, 2));
    const KernelSpec spec = rbf_kernel(1.0);
    const GramMatrix k = gram_matrix(spec, *data);
    const std::vector<Index> labeled = {0, 1, 2, 3};
    Vector y = random_labels(rng, 4);
    const double ridge = 0.01;

    const LapRlsModel lap = fit_laprls(k, labeled, y, ridge, 0.0, 3, 1.0, spec, data);
    // The stated system with weight 0 solves (K_ll + n ridge I) c_l = y_l.
    const Dataset labeled_ds = data->select(labeled);
    const KrrModel krr = fit_krr(gram_matrix(spec, labeled_ds), y, ridge * 4.0, spec,
                                 std::make_shared<const Dataset>(labeled_ds));

    const Dataset queries = random_dataset(rng, 5, 2);
    const Vector p_lap = predict_laprls(lap, queries);
    const Vector p_krr = predict_krr(krr, queries);
    CHECK((p_lap - p_krr).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("identical unlabeled points receive identical laprls predictions") {
  Matrix x(6, 2);
  x << 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.4, 0.7, 0.4, 0.7;
  auto data = std::make_shared<const Dataset>(Dataset(std::move(x)));
  const KernelSpec spec = rbf_kernel(0.8);
  const GramMatrix k = gram_matrix(spec, *data);
  Vector y(3);
  y << 1.0, -1.0, 0.5;
  const LapRlsModel model = fit_laprls(k, {0, 1, 2}, y, 0.1, 1.0, 2, 0.8, spec, data);
  // Points 4 and 5 coincide.
  const double p4 = predict_laprls(model, data->x.row(4).transpose());
  const double p5 = predict_laprls(model, data->x.row(5).transpose());
  CHECK(p4 == doctest::Approx(p5).epsilon(1e-12));
  CHECK(model.dual_coeffs(4) == doctest::Approx(model.dual_coeffs(5)).epsilon(1e-10));
}

TEST_CASE("laprls dual coefficients match an explicit dense solve") {
  Rng rng(103);
  const Index n = 8;
  auto data = std::make_shared<const Dataset>(random_dataset(rng, n, 2));
  const KernelSpec spec = rbf_kernel(1.0);
  const GramMatrix k = gram_matrix(spec, *data);
  const std::vector<Index> labeled = {0, 1, 2};
  Vector y = random_labels(rng, 3);
  const double ridge = 0.05;
  const double weight = 0.4;
  const int graph_k = 3;
  const double graph_bw = 0.9;

  const LapRlsModel model = fit_laprls(k, labeled, y, ridge, weight, graph_k, graph_bw, spec, data);

  const Matrix lap = Matrix(knn_heat_laplacian(*data, graph_k, graph_bw));
  const double nl = 3.0;
  Matrix j_mat = Matrix::Zero(n, n);
  for (Index i : labeled) j_mat(i, i) = 1.0;
  Vector y_ext = Vector::Zero(n);
  for (std::size_t t = 0; t < labeled.size(); ++t) y_ext(labeled[t]) = y(static_cast<Index>(t));

  const Matrix system = j_mat * k.values + ridge * nl * Matrix::Identity(n, n) +
                        weight * (nl / (static_cast<double>(n) * n)) * lap * k.values;
  const Vector oracle = Eigen::FullPivLU<Matrix>(system).solve(j_mat * y_ext);
  CHECK((model.dual_coeffs - oracle).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("laprls rejects unusable systems") {
  Matrix x(4, 1);
  x << 1.0, 2.0, 3.0, 4.0;
  auto data = std::make_shared<const Dataset>(Dataset(std::move(x)));
  const KernelSpec spec = linear_normalized_kernel();  // rank-1 gram
  const GramMatrix k = gram_matrix(spec, *data);
  Vector y(2);
  y << 1.0, -1.0;
  CHECK_THROWS_AS(fit_laprls(k, {0, 1}, y, 0.0, 0.0, 2, 1.0, spec, data), std::invalid_argument);
  CHECK_THROWS_AS(fit_laprls(k, {0, 1}, y, 1e-300, 0.0, 2, 1.0, spec, data), std::runtime_error);
}

TEST_CASE("regression error metric") {
  Vector a(2), b(2);
  a << 0.0, 0.0;
  b << 1.0, 1.0;
  CHECK(regression_error(a, a, Metric::mse) == 0.0);
  CHECK(regression_error(a, b, Metric::mse) == doctest::Approx(1.0));
  Vector p(3), t(3);
  p << 1.0, 2.0, 3.0;
  t << 2.0, 2.0, 2.0;
  CHECK(regression_error(p, t, Metric::mse) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(regression_error(p, t, Metric::rmse) == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
  CHECK_THROWS_AS(regression_error(Vector(), Vector(), Metric::mse), std::invalid_argument);
}
