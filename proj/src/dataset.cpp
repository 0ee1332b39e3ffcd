#include "fedqp/dataset.hpp"

#include <string>

#include "fedqp/errors.hpp"

namespace fedqp {

Dataset Dataset::gather(std::span<const std::size_t> indices) const {
  Dataset out;
  out.dim = dim;
  out.features.reserve(indices.size() * dim);
  out.labels.reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= size()) {
      throw ValidationError("sample index " + std::to_string(idx) +
                            " out of range");
    }
    const auto r = row(idx);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.labels.push_back(labels[idx]);
  }
  return out;
}

void check_consistent(const Dataset& d) {
  if (d.features.size() != d.labels.size() * d.dim) {
    throw ValidationError("dataset has " + std::to_string(d.features.size()) +
                          " feature values for " +
                          std::to_string(d.labels.size()) + " rows of dim " +
                          std::to_string(d.dim));
  }
}

}  // namespace fedqp
