#pragma once

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace sssl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// A collection of points (rows of `x`), with optional labels aligned by row.
// All entries must be finite; validated on construction.
struct Dataset {
  Matrix x;                 // N x d
  std::optional<Vector> y;  // length N when present

  Dataset() = default;
  explicit Dataset(Matrix features, std::optional<Vector> labels = std::nullopt);

  Index size() const { return x.rows(); }
  Index feature_dim() const { return x.cols(); }

  // Row-subset copy; labels follow when present.
  Dataset select(const std::vector<Index>& rows) const;
};

// Throws std::out_of_range unless every index lies in [0, n).
void validate_indices(const std::vector<Index>& indices, Index n);

}  // namespace sssl
