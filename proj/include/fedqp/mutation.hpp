#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "fedqp/layered_params.hpp"
#include "fedqp/random.hpp"

namespace fedqp {

enum class MutationDistribution { signed_gradient, gaussian };
std::string to_string(MutationDistribution d);
MutationDistribution parse_mutation_distribution(const std::string& s);

/// Which model the corrected mutation is added to.
enum class MutationBase { global_model, local_model };
std::string to_string(MutationBase b);
MutationBase parse_mutation_base(const std::string& s);

struct MutationConfig {
  double alpha = 1.0;
  double qp_probability = 0.5;
  MutationDistribution distribution = MutationDistribution::signed_gradient;
  double degenerate_eps = 1e-12;
  MutationBase base = MutationBase::global_model;

  void validate() const;
  bool operator==(const MutationConfig&) const = default;
};

/// signed_gradient: s * alpha * grad with s uniform on {+1, -1}.
/// gaussian: alpha * |grad| / sqrt(d) * z, z ~ N(0, I_d).
Vector generate_raw_mutation(std::span<const double> layer_grad,
                             const MutationConfig& cfg, RandomSource& rng);

struct QpResult {
  Vector corrected;
  double lambda = 0.0;
  bool was_active = false;
};

/// Euclidean projection of `mut` onto the halfspace {m : <m, grad> >= 0}.
///
/// The problem  min |m - mut|^2  s.t. <m, grad> >= 0  has the Lagrangian
/// stationarity condition m = mut + lambda * grad, and its dual
///   min_{lambda >= 0}  1/2 lambda^2 |grad|^2 + lambda <mut, grad>
/// is a scalar quadratic with minimiser
///   lambda = max(0, -<mut, grad> / |grad|^2).
/// When |grad|^2 < eps the input is returned unchanged with lambda = 0.
///
/// If rounding leaves <corrected, grad> slightly negative, lambda is nudged
/// upward until the computed inner product is non-negative, so projecting
/// the result again is an exact no-op.
QpResult qp_correct(std::span<const double> mut, std::span<const double> grad,
                    double eps);

struct MutationOutcome {
  LayeredParams model;
  /// Layers whose QP correction moved the mutation (lambda > 0).
  std::size_t qp_activations = 0;
  /// Layers that were submitted to the QP step (coin flip succeeded).
  std::size_t qp_attempts = 0;
};

/// For every layer L: raw = generate_raw_mutation(grad.L); with probability
/// p the raw mutation is replaced by qp_correct(raw, grad.L). Returns
/// base + corrected mutation. The coin is flipped once per layer.
MutationOutcome mutate_model(const LayeredParams& base,
                             const LayeredParams& grad,
                             const MutationConfig& cfg, RandomSource& rng);

}  // namespace fedqp
