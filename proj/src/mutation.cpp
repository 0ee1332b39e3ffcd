#include "fedqp/mutation.hpp"

#include <cmath>
#include <limits>

#include "fedqp/errors.hpp"

namespace fedqp {

std::string to_string(MutationDistribution d) {
  return d == MutationDistribution::signed_gradient ? "signed_gradient"
                                                    : "gaussian";
}

MutationDistribution parse_mutation_distribution(const std::string& s) {
  if (s == "signed_gradient") return MutationDistribution::signed_gradient;
  if (s == "gaussian") return MutationDistribution::gaussian;
  throw ValidationError("unknown mutation distribution '" + s +
                        "' (expected signed_gradient or gaussian)");
}

std::string to_string(MutationBase b) {
  return b == MutationBase::global_model ? "global" : "local";
}

MutationBase parse_mutation_base(const std::string& s) {
  if (s == "global") return MutationBase::global_model;
  if (s == "local") return MutationBase::local_model;
  throw ValidationError("unknown mutation base '" + s +
                        "' (expected global or local)");
}

void MutationConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw ValidationError("alpha must be finite and >= 0");
  }
  if (!(qp_probability >= 0.0 && qp_probability <= 1.0)) {
    throw ValidationError("qp_probability must lie in [0, 1]");
  }
  if (!(degenerate_eps > 0.0)) {
    throw ValidationError("degenerate_eps must be > 0");
  }
}

Vector generate_raw_mutation(std::span<const double> layer_grad,
                             const MutationConfig& cfg, RandomSource& rng) {
  Vector out(layer_grad.size());
  if (cfg.distribution == MutationDistribution::signed_gradient) {
    const double s = static_cast<double>(rng.sign()) * cfg.alpha;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * layer_grad[i];
    return out;
  }
  if (out.empty()) return out;
  const double scale = cfg.alpha * norm(layer_grad) /
                       std::sqrt(static_cast<double>(out.size()));
  for (auto& v : out) v = scale * rng.normal();
  return out;
}

QpResult qp_correct(std::span<const double> mut, std::span<const double> grad,
                    double eps) {
  const double d = dot(mut, grad);
  QpResult r{Vector(mut.begin(), mut.end()), 0.0, false};
  const double gg = norm_sq(grad);
  if (gg < eps || d >= 0.0) return r;

  double lambda = -d / gg;
  auto project = [&](double lam) {
    for (std::size_t i = 0; i < mut.size(); ++i) {
      r.corrected[i] = mut[i] + lam * grad[i];
    }
    return dot(r.corrected, grad);
  };
  double residual = project(lambda);
  for (int iter = 0; residual < 0.0 && iter < 64; ++iter) {
    const double step = std::max(-residual / gg,
                                 lambda * std::numeric_limits<double>::epsilon());
    lambda += step;
    residual = project(lambda);
  }
  r.lambda = lambda;
  r.was_active = lambda > 0.0;
  return r;
}

MutationOutcome mutate_model(const LayeredParams& base,
                             const LayeredParams& grad,
                             const MutationConfig& cfg, RandomSource& rng) {
  cfg.validate();
  require_compatible(base, grad, "mutate_model");
  MutationOutcome out{base, 0, 0};
  for (std::size_t l = 0; l < grad.num_layers(); ++l) {
    const auto& g = grad[l].data;
    Vector m = generate_raw_mutation(g, cfg, rng);
    if (rng.bernoulli(cfg.qp_probability)) {
      ++out.qp_attempts;
      auto qp = qp_correct(m, g, cfg.degenerate_eps);
      if (qp.was_active) ++out.qp_activations;
      m = std::move(qp.corrected);
    }
    auto& w = out.model[l].data;
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = w[k] + m[k];
  }
  return out;
}

}  // namespace fedqp
