#include "fedqp/vector_ops.hpp"

#include <cmath>
#include <string>

#include "fedqp/errors.hpp"

namespace fedqp {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": length mismatch (" +
                     std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

}  // namespace

double dot(std::span<const double> x, std::span<const double> y) {
  require_same_length(x.size(), y.size(), "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

double norm_sq(std::span<const double> x) { return dot(x, x); }

double norm(std::span<const double> x) { return std::sqrt(norm_sq(x)); }

void axpy_inplace(double a, std::span<const double> x, std::span<double> y) {
  require_same_length(x.size(), y.size(), "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = a * x[i] + y[i];
}

bool all_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace fedqp
