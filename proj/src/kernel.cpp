#include "sssl/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "sssl/rng.hpp"

namespace sssl {
namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

void check_dims(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("eval_kernel: dimension mismatch (" + std::to_string(x.size()) +
                                " vs " + std::to_string(y.size()) + ")");
  }
}

// cos(k pi x) features scaled by sqrt(2), k = 1..K.
Vector mixture_features(const Vector& weights, double x) {
  const Index k_max = weights.size();
  Vector f(k_max);
  for (Index k = 0; k < k_max; ++k) {
    f(k) = std::sqrt(2.0) * std::cos(static_cast<double>(k + 1) * kPi * x);
  }
  return f;
}

double mixture_dot(const Vector& weights, const Vector& fx, const Vector& fy) {
  double acc = 0.0;
  for (Index k = 0; k < weights.size(); ++k) acc += weights(k) * fx(k) * fy(k);
  return acc;
}

double normalized_linear(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  const double nx = x.norm();
  const double ny = y.norm();
  if (nx == 0.0 || ny == 0.0) {
    throw std::domain_error("linear_normalized kernel undefined at the zero vector");
  }
  return x.dot(y) / (nx * ny);
}

double normalized_polynomial(int degree, const Eigen::Ref<const Vector>& x,
                             const Eigen::Ref<const Vector>& y) {
  const double raw = std::pow(1.0 + x.dot(y), degree);
  const double sx = std::pow(1.0 + x.squaredNorm(), degree);
  const double sy = std::pow(1.0 + y.squaredNorm(), degree);
  return raw / std::sqrt(sx * sy);
}

}  // namespace

void KernelSpec::validate() const {
  switch (kind) {
    case KernelKind::rbf:
      if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
        throw std::invalid_argument("rbf kernel requires a positive finite bandwidth");
      }
      break;
    case KernelKind::linear_normalized:
      break;
    case KernelKind::polynomial_normalized:
      if (degree < 1) {
        throw std::invalid_argument("polynomial kernel requires degree >= 1");
      }
      break;
    case KernelKind::cosine_mixture: {
      if (mixture_weights.size() < 1) {
        throw std::invalid_argument("cosine_mixture kernel requires at least one weight");
      }
      if ((mixture_weights.array() < 0.0).any() || !mixture_weights.allFinite()) {
        throw std::invalid_argument("cosine_mixture weights must be finite and non-negative");
      }
      if (2.0 * mixture_weights.sum() > 1.0 + 1e-12) {
        throw std::invalid_argument("cosine_mixture weights violate 2*sum(w) <= 1, so k(x,x) "
                                    "could exceed 1");
      }
      break;
    }
  }
}

KernelSpec rbf_kernel(double bandwidth) {
  KernelSpec s;
  s.kind = KernelKind::rbf;
  s.bandwidth = bandwidth;
  s.validate();
  return s;
}

KernelSpec linear_normalized_kernel() {
  KernelSpec s;
  s.kind = KernelKind::linear_normalized;
  return s;
}

KernelSpec polynomial_normalized_kernel(int degree) {
  KernelSpec s;
  s.kind = KernelKind::polynomial_normalized;
  s.degree = degree;
  s.validate();
  return s;
}

KernelSpec cosine_mixture_kernel(Vector weights) {
  KernelSpec s;
  s.kind = KernelKind::cosine_mixture;
  s.mixture_weights = std::move(weights);
  s.validate();
  return s;
}

double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& y) {
  spec.validate();
  check_dims(x, y);
  switch (spec.kind) {
    case KernelKind::rbf: {
      const double d2 = (x - y).squaredNorm();
      return std::exp(-d2 / (2.0 * spec.bandwidth * spec.bandwidth));
    }
    case KernelKind::linear_normalized:
      return normalized_linear(x, y);
    case KernelKind::polynomial_normalized:
      return normalized_polynomial(spec.degree, x, y);
    case KernelKind::cosine_mixture: {
      if (x.size() != 1) {
        throw std::invalid_argument("cosine_mixture kernel is defined on 1-d inputs");
      }
      const Vector fx = mixture_features(spec.mixture_weights, x(0));
      const Vector fy = mixture_features(spec.mixture_weights, y(0));
      return mixture_dot(spec.mixture_weights, fx, fy);
    }
  }
  throw std::logic_error("unreachable kernel kind");
}

GramMatrix gram_matrix(const KernelSpec& spec, const Dataset& data) {
  spec.validate();
  const Index n = data.size();
  if (n < 1) throw std::invalid_argument("gram_matrix: empty dataset");

  Matrix k(n, n);
  if (spec.kind == KernelKind::cosine_mixture) {
    if (data.feature_dim() != 1) {
      throw std::invalid_argument("cosine_mixture kernel is defined on 1-d inputs");
    }
    std::vector<Vector> feats(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      feats[static_cast<std::size_t>(i)] = mixture_features(spec.mixture_weights, data.x(i, 0));
    }
    for (Index i = 0; i < n; ++i) {
      for (Index j = i; j < n; ++j) {
        k(i, j) = mixture_dot(spec.mixture_weights, feats[static_cast<std::size_t>(i)],
                              feats[static_cast<std::size_t>(j)]);
      }
    }
  } else {
    for (Index i = 0; i < n; ++i) {
      for (Index j = i; j < n; ++j) {
        k(i, j) = eval_kernel(spec, data.x.row(i).transpose(), data.x.row(j).transpose());
      }
    }
  }
  // Mirror the upper triangle for exact symmetry.
  for (Index i = 1; i < n; ++i) {
    for (Index j = 0; j < i; ++j) k(i, j) = k(j, i);
  }
  return GramMatrix{std::move(k)};
}

GramMatrix gram_from_matrix(Matrix values) {
  if (values.rows() != values.cols() || values.rows() < 1) {
    throw std::invalid_argument("gram_from_matrix: matrix must be square and non-empty");
  }
  if (!values.allFinite()) {
    throw std::invalid_argument("gram_from_matrix: entries must be finite");
  }
  const Index n = values.rows();
  for (Index i = 0; i < n; ++i) {
    if (std::abs(values(i, i)) > 1.0 + 1e-9) {
      throw std::invalid_argument("gram_from_matrix: diagonal entry outside [-1, 1]");
    }
    for (Index j = i + 1; j < n; ++j) {
      if (std::abs(values(i, j) - values(j, i)) > 1e-12 * std::max(1.0, std::abs(values(i, j)))) {
        throw std::invalid_argument("gram_from_matrix: matrix is not symmetric");
      }
      values(j, i) = values(i, j);
    }
  }
  return GramMatrix{std::move(values)};
}

CrossGram cross_gram(const KernelSpec& spec, const Dataset& all_points,
                     const std::vector<Index>& labeled) {
  spec.validate();
  if (labeled.empty()) throw std::invalid_argument("cross_gram: empty labeled set");
  validate_indices(labeled, all_points.size());

  const Index n = all_points.size();
  const Index m = static_cast<Index>(labeled.size());
  Matrix k(n, m);
  if (spec.kind == KernelKind::cosine_mixture) {
    if (all_points.feature_dim() != 1) {
      throw std::invalid_argument("cosine_mixture kernel is defined on 1-d inputs");
    }
    std::vector<Vector> feats(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      feats[static_cast<std::size_t>(i)] =
          mixture_features(spec.mixture_weights, all_points.x(i, 0));
    }
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < m; ++j) {
        const Index c = labeled[static_cast<std::size_t>(j)];
        // Same argument order as gram_matrix's upper triangle.
        const Index a = std::min(i, c), b = std::max(i, c);
        k(i, j) = mixture_dot(spec.mixture_weights, feats[static_cast<std::size_t>(a)],
                              feats[static_cast<std::size_t>(b)]);
      }
    }
  } else {
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < m; ++j) {
        const Index c = labeled[static_cast<std::size_t>(j)];
        const Index a = std::min(i, c), b = std::max(i, c);
        k(i, j) = eval_kernel(spec, all_points.x.row(a).transpose(),
                              all_points.x.row(b).transpose());
      }
    }
  }
  return CrossGram{std::move(k)};
}

Matrix kernel_block(const KernelSpec& spec, const Dataset& rows, const Dataset& cols) {
  spec.validate();
  if (rows.feature_dim() != cols.feature_dim()) {
    throw std::invalid_argument("kernel_block: dimension mismatch");
  }
  const Index m = rows.size();
  const Index n = cols.size();
  switch (spec.kind) {
    case KernelKind::rbf: {
      const Vector sr = rows.x.rowwise().squaredNorm();
      const Vector sc = cols.x.rowwise().squaredNorm();
      Matrix d2 = (-2.0 * rows.x * cols.x.transpose()).colwise() + sr;
      d2.rowwise() += sc.transpose();
      d2 = d2.cwiseMax(0.0);
      return (-d2 / (2.0 * spec.bandwidth * spec.bandwidth)).array().exp().matrix();
    }
    case KernelKind::linear_normalized: {
      const Vector nr = rows.x.rowwise().norm();
      const Vector nc = cols.x.rowwise().norm();
      if ((nr.array() == 0.0).any() || (nc.array() == 0.0).any()) {
        throw std::domain_error("linear_normalized kernel undefined at the zero vector");
      }
      Matrix g = rows.x * cols.x.transpose();
      g.array().colwise() /= nr.array();
      g.array().rowwise() /= nc.transpose().array();
      return g;
    }
    case KernelKind::polynomial_normalized: {
      const Vector dr = (rows.x.rowwise().squaredNorm().array() + 1.0)
                            .pow(spec.degree / 2.0)
                            .matrix();
      const Vector dc = (cols.x.rowwise().squaredNorm().array() + 1.0)
                            .pow(spec.degree / 2.0)
                            .matrix();
      Matrix g = ((rows.x * cols.x.transpose()).array() + 1.0).pow(spec.degree).matrix();
      g.array().colwise() /= dr.array();
      g.array().rowwise() /= dc.transpose().array();
      return g;
    }
    case KernelKind::cosine_mixture: {
      if (rows.feature_dim() != 1) {
        throw std::invalid_argument("cosine_mixture kernel is defined on 1-d inputs");
      }
      const Index k_max = spec.mixture_weights.size();
      Matrix fr(m, k_max), fc(n, k_max);
      for (Index i = 0; i < m; ++i) {
        fr.row(i) = mixture_features(spec.mixture_weights, rows.x(i, 0)).transpose();
      }
      for (Index j = 0; j < n; ++j) {
        fc.row(j) = mixture_features(spec.mixture_weights, cols.x(j, 0)).transpose();
      }
      return fr * spec.mixture_weights.asDiagonal() * fc.transpose();
    }
  }
  throw std::logic_error("unreachable kernel kind");
}

double median_pairwise_distance(const Dataset& data, std::uint64_t seed, Index max_pairs) {
  const Index n = data.size();
  if (n < 2) return 1.0;
  std::vector<double> dists;
  const Index total = n * (n - 1) / 2;
  if (total <= max_pairs) {
    dists.reserve(static_cast<std::size_t>(total));
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        dists.push_back((data.x.row(i) - data.x.row(j)).norm());
      }
    }
  } else {
    Rng rng(Rng::derive(seed, 0x6d65646eULL));
    dists.reserve(static_cast<std::size_t>(max_pairs));
    for (Index t = 0; t < max_pairs; ++t) {
      const Index i = static_cast<Index>(rng.index(static_cast<std::size_t>(n)));
      Index j = static_cast<Index>(rng.index(static_cast<std::size_t>(n - 1)));
      if (j >= i) ++j;
      dists.push_back((data.x.row(i) - data.x.row(j)).norm());
    }
  }
  const std::size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid), dists.end());
  const double med = dists[mid];
  return med > 0.0 ? med : 1.0;
}

}  // namespace sssl
