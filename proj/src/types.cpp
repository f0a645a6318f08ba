#include "sssl/types.hpp"

#include <stdexcept>
#include <string>

namespace sssl {

Dataset::Dataset(Matrix features, std::optional<Vector> labels)
    : x(std::move(features)), y(std::move(labels)) {
  if (!x.allFinite()) {
    throw std::invalid_argument("Dataset: features contain NaN or Inf");
  }
  if (y) {
    if (y->size() != x.rows()) {
      throw std::invalid_argument("Dataset: label length " + std::to_string(y->size()) +
                                  " does not match point count " + std::to_string(x.rows()));
    }
    if (!y->allFinite()) {
      throw std::invalid_argument("Dataset: labels contain NaN or Inf");
    }
  }
}

Dataset Dataset::select(const std::vector<Index>& rows) const {
  validate_indices(rows, size());
  Matrix xs(static_cast<Index>(rows.size()), feature_dim());
  for (Index i = 0; i < xs.rows(); ++i) xs.row(i) = x.row(rows[static_cast<std::size_t>(i)]);
  std::optional<Vector> ys;
  if (y) {
    Vector v(xs.rows());
    for (Index i = 0; i < xs.rows(); ++i) v(i) = (*y)(rows[static_cast<std::size_t>(i)]);
    ys = std::move(v);
  }
  return Dataset(std::move(xs), std::move(ys));
}

void validate_indices(const std::vector<Index>& indices, Index n) {
  for (Index idx : indices) {
    if (idx < 0 || idx >= n) {
      throw std::out_of_range("index " + std::to_string(idx) + " outside [0, " +
                              std::to_string(n) + ")");
    }
  }
}

}  // namespace sssl
