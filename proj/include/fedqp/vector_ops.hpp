#pragma once

#include <span>
#include <vector>

namespace fedqp {

using Vector = std::vector<double>;

// All reductions accumulate strictly left to right so results are
// reproducible bit-for-bit across runs and platforms.

double dot(std::span<const double> x, std::span<const double> y);
double norm_sq(std::span<const double> x);
double norm(std::span<const double> x);

/// y <- a * x + y, in place.
void axpy_inplace(double a, std::span<const double> x, std::span<double> y);

bool all_finite(std::span<const double> x);

}  // namespace fedqp
