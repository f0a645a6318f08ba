#pragma once

#include <cstdint>
#include <vector>

#include "sssl/types.hpp"

namespace sssl {

// Every kind is a bounded Mercer kernel with |k(x,x)| <= 1: rbf has k(x,x)=1,
// the linear/polynomial variants are normalized by sqrt(k0(x,x) k0(y,y)), and
// cosine_mixture calibrates its weights at construction time.
enum class KernelKind {
  rbf,                    // exp(-|x-y|^2 / (2 b^2))
  linear_normalized,      // <x,y> / (|x||y|)
  polynomial_normalized,  // (1 + <x,y>)^d, normalized
  cosine_mixture,         // sum_k w_k 2 cos(k pi x) cos(k pi y), 1-d inputs
};

struct KernelSpec {
  KernelKind kind = KernelKind::rbf;
  double bandwidth = 1.0;  // rbf only
  int degree = 2;          // polynomial only
  Vector mixture_weights;  // cosine_mixture only; w_k >= 0, 2*sum w_k <= 1

  // Throws std::invalid_argument on a malformed spec.
  void validate() const;
};

KernelSpec rbf_kernel(double bandwidth);
KernelSpec linear_normalized_kernel();
KernelSpec polynomial_normalized_kernel(int degree);
KernelSpec cosine_mixture_kernel(Vector weights);

// Pointwise kernel evaluation. Symmetric in (x, y); |result| <= 1.
// Throws on dimension mismatch or invalid spec.
double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& y);

// N x N kernel matrix. Assembled as upper triangle + mirror, so it is
// bit-exactly symmetric regardless of evaluation order.
struct GramMatrix {
  Matrix values;
  Index n_points() const { return values.rows(); }
};

// N x n kernel similarities between all points and a labeled subset.
struct CrossGram {
  Matrix values;
  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
};

GramMatrix gram_matrix(const KernelSpec& spec, const Dataset& data);

// Wraps a caller-supplied symmetric PSD matrix (diag in [-1,1]); used by
// tests and by consumers that already hold a kernel matrix.
GramMatrix gram_from_matrix(Matrix values);

// Column j holds kernel values against point labeled[j]. Shares the entry
// evaluation path with gram_matrix, so labeled = 0..N-1 reproduces the Gram
// matrix bit-for-bit.
CrossGram cross_gram(const KernelSpec& spec, const Dataset& all_points,
                     const std::vector<Index>& labeled);

// Kernel block between two point sets (rows x cols). Vectorized; entries agree
// with eval_kernel to floating-point roundoff. Used for batch prediction.
Matrix kernel_block(const KernelSpec& spec, const Dataset& rows, const Dataset& cols);

// Median of pairwise distances, subsampled beyond max_pairs. The usual
// starting point for rbf bandwidth grids.
double median_pairwise_distance(const Dataset& data, std::uint64_t seed = 0,
                                Index max_pairs = 20000);

}  // namespace sssl
