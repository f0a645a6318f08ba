#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

#include "sssl/kernel.hpp"
#include "sssl/rng.hpp"

using namespace sssl;

namespace {

Dataset random_dataset(Rng& rng, Index n, Index d, double lo = -2.0, double hi = 2.0) {
  Matrix x(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) x(i, j) = rng.uniform(lo, hi);
  }
  return Dataset(std::move(x));
}

}  // namespace

TEST_CASE("rbf kernel closed-form values") {
  const KernelSpec spec = rbf_kernel(1.0);
  Vector x(1), y(1);
  x << 0.0;
  y << 1.0;
  CHECK(eval_kernel(spec, x, x) == 1.0);
  CHECK(eval_kernel(spec, x, y) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));

  Vector a(3), b(3);
  a << 0.3, -1.2, 0.5;
  CHECK(eval_kernel(rbf_kernel(0.7), a, a) == 1.0);
}

TEST_CASE("normalized linear kernel on orthogonal vectors") {
  Vector x(2), y(2);
  x << 1.0, 0.0;
  y << 0.0, 1.0;
  CHECK(eval_kernel(linear_normalized_kernel(), x, y) == 0.0);
  CHECK(eval_kernel(linear_normalized_kernel(), x, x) == 1.0);
}

TEST_CASE("kernel symmetry and boundedness over random inputs") {
  Rng rng(7);
  const KernelSpec specs[] = {rbf_kernel(0.8), linear_normalized_kernel(),
                              polynomial_normalized_kernel(3)};
  for (int rep = 0; rep < 200; ++rep) {
    Vector x(4), y(4);
    for (Index j = 0; j < 4; ++j) {
      x(j) = rng.uniform(-3.0, 3.0);
      y(j) = rng.uniform(-3.0, 3.0);
    }
    for (const auto& spec : specs) {
      const double xy = eval_kernel(spec, x, y);
      const double yx = eval_kernel(spec, y, x);
      CHECK(xy == yx);
      CHECK(std::abs(xy) <= 1.0 + 1e-12);
      CHECK(std::abs(eval_kernel(spec, x, x)) <= 1.0 + 1e-12);
    }
    const double r = eval_kernel(specs[0], x, y);
    CHECK(r > 0.0);
    CHECK(r <= 1.0);
    if ((x - y).norm() > 0.0) CHECK(r < 1.0);
  }
}

TEST_CASE("kernel argument validation") {
  Vector x(2), y(3);
  x << 1.0, 2.0;
  y << 1.0, 2.0, 3.0;
  CHECK_THROWS_AS(eval_kernel(rbf_kernel(1.0), x, y), std::invalid_argument);
  CHECK_THROWS_AS(rbf_kernel(0.0), std::invalid_argument);
  CHECK_THROWS_AS(rbf_kernel(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(polynomial_normalized_kernel(0), std::invalid_argument);

  Vector zero = Vector::Zero(2);
  CHECK_THROWS_AS(eval_kernel(linear_normalized_kernel(), zero, x), std::domain_error);
}

TEST_CASE("gram matrix small cases") {
  const KernelSpec spec = rbf_kernel(1.0);
  {
    Matrix x(1, 2);
    x << 0.5, -0.5;
    const GramMatrix k = gram_matrix(spec, Dataset(x));
    CHECK(k.values.rows() == 1);
    CHECK(k.values(0, 0) == 1.0);
  }
  {
    Matrix x(2, 2);
    x << 1.0, 2.0, 1.0, 2.0;
    const GramMatrix k = gram_matrix(spec, Dataset(x));
    CHECK(k.values(0, 1) == 1.0);
    CHECK(k.values(1, 0) == 1.0);
    CHECK(k.values(0, 0) == 1.0);
  }
  CHECK_THROWS_AS(gram_matrix(spec, Dataset(Matrix(0, 2))), std::invalid_argument);
}

TEST_CASE("gram matrix matches element-wise evaluation and is bit-symmetric") {
  Rng rng(11);
  const Dataset data = random_dataset(rng, 3, 2);
  const KernelSpec spec = rbf_kernel(0.9);
  const GramMatrix k = gram_matrix(spec, data);
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 3; ++j) {
      const double direct =
          eval_kernel(spec, data.x.row(std::min(i, j)).transpose(),
                      data.x.row(std::max(i, j)).transpose());
      CHECK(k.values(i, j) == direct);
      CHECK(k.values(i, j) == k.values(j, i));
    }
  }
}

TEST_CASE("gram matrices are PSD within tolerance") {
  Rng rng(13);
  for (int rep = 0; rep < 12; ++rep) {
    const Index n = 5 + static_cast<Index>(rng.index(46));
    const Dataset data = random_dataset(rng, n, 3);
    const KernelSpec spec = rep % 2 == 0 ? rbf_kernel(rng.uniform(0.3, 2.0))
                                         : polynomial_normalized_kernel(2);
    const GramMatrix k = gram_matrix(spec, data);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(k.values);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-8 * static_cast<double>(n));
  }
}

TEST_CASE("cross gram against the full gram matrix") {
  Rng rng(17);
  const Dataset data = random_dataset(rng, 4, 2);
  const KernelSpec spec = rbf_kernel(1.1);
  const GramMatrix k = gram_matrix(spec, data);

  SUBCASE("all indices reproduces the gram matrix bit-for-bit") {
    const CrossGram c = cross_gram(spec, data, {0, 1, 2, 3});
    for (Index i = 0; i < 4; ++i) {
      for (Index j = 0; j < 4; ++j) CHECK(c.values(i, j) == k.values(i, j));
    }
  }
  SUBCASE("single index selects one column") {
    const CrossGram c = cross_gram(spec, data, {0});
    CHECK(c.cols() == 1);
    for (Index i = 0; i < 4; ++i) CHECK(c.values(i, 0) == k.values(i, 0));
  }
  SUBCASE("permuted selection") {
    const CrossGram c = cross_gram(spec, data, {2, 0});
    for (Index i = 0; i < 4; ++i) {
      CHECK(c.values(i, 0) == k.values(i, 2));
      CHECK(c.values(i, 1) == k.values(i, 0));
    }
  }
  SUBCASE("index validation") {
    CHECK_THROWS_AS(cross_gram(spec, data, {4}), std::out_of_range);
    CHECK_THROWS_AS(cross_gram(spec, data, {-1}), std::out_of_range);
    CHECK_THROWS_AS(cross_gram(spec, data, {}), std::invalid_argument);
  }
}

TEST_CASE("cosine mixture kernel") {
  Vector w(3);
  w << 0.25, 0.125, 0.0625;
  const KernelSpec spec = cosine_mixture_kernel(w);

  Vector x(1), y(1);
  x << 0.0;
  y << 0.0;
  // At x = y = 0 every cosine is 1, so k(0,0) = 2 * sum(w).
  CHECK(eval_kernel(spec, x, y) == doctest::Approx(2.0 * w.sum()).epsilon(1e-14));

  Rng rng(23);
  Matrix pts(6, 1);
  for (Index i = 0; i < 6; ++i) pts(i, 0) = rng.uniform();
  const Dataset data{Matrix(pts)};
  const GramMatrix k = gram_matrix(spec, data);
  for (Index i = 0; i < 6; ++i) {
    for (Index j = 0; j < 6; ++j) {
      const double direct = eval_kernel(spec, data.x.row(std::min(i, j)).transpose(),
                                        data.x.row(std::max(i, j)).transpose());
      CHECK(k.values(i, j) == direct);
    }
  }

  Vector bad(2);
  bad << 0.6, 0.0;
  CHECK_THROWS_AS(cosine_mixture_kernel(bad), std::invalid_argument);  // 2*sum > 1
  Vector neg(1);
  neg << -0.1;
  CHECK_THROWS_AS(cosine_mixture_kernel(neg), std::invalid_argument);
}

TEST_CASE("kernel_block agrees with eval_kernel for every kind") {
  Rng rng(29);
  const Dataset rows = random_dataset(rng, 7, 3, 0.05, 0.95);
  const Dataset cols = random_dataset(rng, 5, 3, 0.05, 0.95);
  Vector w(4);
  w << 0.2, 0.1, 0.05, 0.025;
  const KernelSpec specs[] = {rbf_kernel(0.6), linear_normalized_kernel(),
                              polynomial_normalized_kernel(2)};
  for (const auto& spec : specs) {
    const Matrix block = kernel_block(spec, rows, cols);
    for (Index i = 0; i < rows.size(); ++i) {
      for (Index j = 0; j < cols.size(); ++j) {
        const double direct =
            eval_kernel(spec, rows.x.row(i).transpose(), cols.x.row(j).transpose());
        CHECK(block(i, j) == doctest::Approx(direct).epsilon(1e-12));
      }
    }
  }
  // 1-d mixture kind.
  const Dataset r1(Matrix(rows.x.col(0)));
  const Dataset c1(Matrix(cols.x.col(0)));
  const KernelSpec mix = cosine_mixture_kernel(w);
  const Matrix block = kernel_block(mix, r1, c1);
  for (Index i = 0; i < r1.size(); ++i) {
    for (Index j = 0; j < c1.size(); ++j) {
      const double direct = eval_kernel(mix, r1.x.row(i).transpose(), c1.x.row(j).transpose());
      CHECK(block(i, j) == doctest::Approx(direct).epsilon(1e-12));
    }
  }
}

TEST_CASE("median pairwise distance") {
  Matrix x(3, 1);
  x << 0.0, 1.0, 3.0;
  // Pairwise distances 1, 2, 3 -> median 2.
  CHECK(median_pairwise_distance(Dataset(x)) == doctest::Approx(2.0));

  Matrix same = Matrix::Zero(4, 2);
  CHECK(median_pairwise_distance(Dataset(same)) == 1.0);  // degenerate fallback
}

TEST_CASE("gram_from_matrix validation") {
  Matrix ok(2, 2);
  ok << 1.0, 0.3, 0.3, 0.9;
  CHECK_NOTHROW(gram_from_matrix(ok));
  Matrix asym(2, 2);
  asym << 1.0, 0.3, 0.1, 0.9;
  CHECK_THROWS_AS(gram_from_matrix(asym), std::invalid_argument);
  Matrix big_diag(2, 2);
  big_diag << 2.0, 0.1, 0.1, 0.5;
  CHECK_THROWS_AS(gram_from_matrix(big_diag), std::invalid_argument);
}
