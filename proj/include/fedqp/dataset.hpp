#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedqp/vector_ops.hpp"

namespace fedqp {

/// Row-major feature matrix with one integer class label per row. Doubles
/// as a mini-batch.
struct Dataset {
  std::size_t dim = 0;
  Vector features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * dim, dim};
  }

  /// Copy of the rows at `indices`, in that order.
  Dataset gather(std::span<const std::size_t> indices) const;

  bool operator==(const Dataset&) const = default;
};

/// Throws ValidationError unless feature/label counts agree.
void check_consistent(const Dataset& d);

}  // namespace fedqp
