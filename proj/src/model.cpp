#include "fedqp/model.hpp"

#include <algorithm>
#include <cmath>

#include "fedqp/errors.hpp"

namespace fedqp {

std::string to_string(Architecture a) {
  return a == Architecture::logreg ? "logreg" : "mlp";
}

Architecture parse_architecture(const std::string& s) {
  if (s == "logreg") return Architecture::logreg;
  if (s == "mlp") return Architecture::mlp;
  throw ValidationError("unknown architecture '" + s +
                        "' (expected logreg or mlp)");
}

void ModelSpec::validate() const {
  if (input_dim == 0) throw ValidationError("input_dim must be positive");
  if (num_classes < 2) throw ValidationError("num_classes must be >= 2");
  if (architecture == Architecture::mlp && hidden_dim == 0) {
    throw ValidationError("hidden_dim must be positive");
  }
}

std::vector<std::pair<std::string, std::size_t>> ModelSpec::layout() const {
  if (architecture == Architecture::logreg) {
    return {{"W", input_dim * num_classes}, {"b", num_classes}};
  }
  return {{"W1", input_dim * hidden_dim},
          {"b1", hidden_dim},
          {"W2", hidden_dim * num_classes},
          {"b2", num_classes}};
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning_rate must be finite and >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ValidationError("momentum must lie in [0, 1)");
  }
  if (batch_size == 0) throw ValidationError("batch_size must be >= 1");
  if (local_epochs == 0) throw ValidationError("local_epochs must be >= 1");
}

namespace {

void check_params(const ModelSpec& spec, const LayeredParams& params) {
  const auto layout = spec.layout();
  bool ok = layout.size() == params.num_layers();
  for (std::size_t i = 0; ok && i < layout.size(); ++i) {
    ok = params[i].name == layout[i].first &&
         params[i].data.size() == layout[i].second;
  }
  if (!ok) throw ShapeError("parameters do not match the " +
                            to_string(spec.architecture) + " layout");
}

void check_batch(const ModelSpec& spec, const Dataset& batch) {
  check_consistent(batch);
  if (batch.size() == 0) throw ValidationError("batch is empty");
  if (batch.dim != spec.input_dim) {
    throw ShapeError("batch dim " + std::to_string(batch.dim) +
                     " != model input_dim " + std::to_string(spec.input_dim));
  }
  for (int y : batch.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= spec.num_classes) {
      throw ValidationError("label " + std::to_string(y) + " out of range [0, " +
                            std::to_string(spec.num_classes) + ")");
    }
  }
}

// out[r][c] = bias[c] + sum_k in[r][k] * w[k][c]
void affine(const Vector& in, std::size_t rows, std::size_t in_dim,
            const Vector& w, const Vector& bias, std::size_t out_dim,
            Vector& out) {
  out.assign(rows * out_dim, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double* o = out.data() + r * out_dim;
    for (std::size_t c = 0; c < out_dim; ++c) o[c] = bias[c];
    const double* x = in.data() + r * in_dim;
    for (std::size_t k = 0; k < in_dim; ++k) {
      const double xk = x[k];
      const double* wk = w.data() + k * out_dim;
      for (std::size_t c = 0; c < out_dim; ++c) o[c] += xk * wk[c];
    }
  }
}

struct Activations {
  Vector hidden;  // post-ReLU, mlp only
  Matrix logits;
};

Activations run_forward(const ModelSpec& spec, const LayeredParams& params,
                        const Dataset& batch) {
  Activations act;
  const std::size_t n = batch.size();
  act.logits.rows = n;
  act.logits.cols = spec.num_classes;
  if (spec.architecture == Architecture::logreg) {
    affine(batch.features, n, spec.input_dim, params[0].data, params[1].data,
           spec.num_classes, act.logits.data);
  } else {
    affine(batch.features, n, spec.input_dim, params[0].data, params[1].data,
           spec.hidden_dim, act.hidden);
    for (double& h : act.hidden) h = h > 0.0 ? h : 0.0;
    affine(act.hidden, n, spec.hidden_dim, params[2].data, params[3].data,
           spec.num_classes, act.logits.data);
  }
  return act;
}

// Softmax of row r written into `probs`; returns -log p[label].
double softmax_xent(const Matrix& logits, std::size_t r, int label,
                    double* probs) {
  const double* z = logits.data.data() + r * logits.cols;
  double zmax = z[0];
  for (std::size_t c = 1; c < logits.cols; ++c) zmax = std::max(zmax, z[c]);
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.cols; ++c) {
    probs[c] = std::exp(z[c] - zmax);
    sum += probs[c];
  }
  for (std::size_t c = 0; c < logits.cols; ++c) probs[c] /= sum;
  return std::log(sum) - (z[label] - zmax);
}

// Gradient plus the batch loss, sharing one forward pass.
std::pair<LayeredParams, double> loss_and_grad(const ModelSpec& spec,
                                               const LayeredParams& params,
                                               const Dataset& batch) {
  const auto act = run_forward(spec, params, batch);
  const std::size_t n = batch.size();
  const std::size_t C = spec.num_classes;
  const double inv_n = 1.0 / static_cast<double>(n);

  Vector dz(n * C);
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double* d = dz.data() + r * C;
    loss += softmax_xent(act.logits, r, batch.labels[r], d);
    d[batch.labels[r]] -= 1.0;
    for (std::size_t c = 0; c < C; ++c) d[c] *= inv_n;
  }
  loss *= inv_n;

  // dW[k][c] = sum_r in[r][k] dz[r][c]; db[c] = sum_r dz[r][c]
  auto outer = [n](const Vector& in, std::size_t in_dim, const Vector& d,
                   std::size_t out_dim, Vector& dw, Vector& db) {
    dw.assign(in_dim * out_dim, 0.0);
    db.assign(out_dim, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const double* x = in.data() + r * in_dim;
      const double* g = d.data() + r * out_dim;
      for (std::size_t c = 0; c < out_dim; ++c) db[c] += g[c];
      for (std::size_t k = 0; k < in_dim; ++k) {
        const double xk = x[k];
        double* w = dw.data() + k * out_dim;
        for (std::size_t c = 0; c < out_dim; ++c) w[c] += xk * g[c];
      }
    }
  };

  LayeredParams grad = LayeredParams::zeros_like(params);
  if (spec.architecture == Architecture::logreg) {
    outer(batch.features, spec.input_dim, dz, C, grad[0].data, grad[1].data);
    return {std::move(grad), loss};
  }

  const std::size_t H = spec.hidden_dim;
  outer(act.hidden, H, dz, C, grad[2].data, grad[3].data);
  const Vector& w2 = params[2].data;
  Vector dh(n * H, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double* g = dz.data() + r * C;
    const double* h = act.hidden.data() + r * H;
    double* out = dh.data() + r * H;
    for (std::size_t k = 0; k < H; ++k) {
      if (h[k] <= 0.0) continue;
      const double* wk = w2.data() + k * C;
      double acc = 0.0;
      for (std::size_t c = 0; c < C; ++c) acc += wk[c] * g[c];
      out[k] = acc;
    }
  }
  outer(batch.features, spec.input_dim, dh, H, grad[0].data, grad[1].data);
  return {std::move(grad), loss};
}

}  // namespace

LayeredParams init_params(const ModelSpec& spec, RandomSource& rng) {
  spec.validate();
  LayeredParams params;
  auto weights = [&rng](std::size_t fan_in, std::size_t n) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Vector w(n);
    for (double& v : w) v = s * rng.normal();
    return w;
  };
  if (spec.architecture == Architecture::logreg) {
    params.add_layer("W", weights(spec.input_dim, spec.input_dim * spec.num_classes));
    params.add_layer("b", Vector(spec.num_classes, 0.0));
  } else {
    params.add_layer("W1", weights(spec.input_dim, spec.input_dim * spec.hidden_dim));
    params.add_layer("b1", Vector(spec.hidden_dim, 0.0));
    params.add_layer("W2", weights(spec.hidden_dim, spec.hidden_dim * spec.num_classes));
    params.add_layer("b2", Vector(spec.num_classes, 0.0));
  }
  return params;
}

ForwardResult forward_loss(const ModelSpec& spec, const LayeredParams& params,
                           const Dataset& batch) {
  check_params(spec, params);
  check_batch(spec, batch);
  auto act = run_forward(spec, params, batch);
  Vector probs(spec.num_classes);
  double loss = 0.0;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    loss += softmax_xent(act.logits, r, batch.labels[r], probs.data());
  }
  return {loss / static_cast<double>(batch.size()), std::move(act.logits)};
}

LayeredParams backward(const ModelSpec& spec, const LayeredParams& params,
                       const Dataset& batch) {
  check_params(spec, params);
  check_batch(spec, batch);
  return loss_and_grad(spec, params, batch).first;
}

LocalTrainResult local_train(const ModelSpec& spec, const LayeredParams& params,
                             const Dataset& data,
                             std::span<const std::size_t> indices,
                             const TrainConfig& cfg, RandomSource& rng) {
  cfg.validate();
  check_params(spec, params);
  if (indices.empty()) throw ValidationError("client dataset is empty");

  LocalTrainResult result{params, 0.0};
  LayeredParams velocity = LayeredParams::zeros_like(params);
  std::vector<std::size_t> order(indices.begin(), indices.end());
  double loss_sum = 0.0;
  std::size_t steps = 0;

  for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const Dataset batch = data.gather(
          std::span<const std::size_t>(order.data() + start, stop - start));
      check_batch(spec, batch);
      auto [grad, loss] = loss_and_grad(spec, result.params, batch);
      loss_sum += loss;
      ++steps;
      for (std::size_t l = 0; l < grad.num_layers(); ++l) {
        auto& v = velocity[l].data;
        auto& w = result.params[l].data;
        const auto& g = grad[l].data;
        for (std::size_t k = 0; k < v.size(); ++k) {
          v[k] = cfg.momentum * v[k] + g[k];
          w[k] = w[k] - cfg.learning_rate * v[k];
        }
      }
    }
  }
  result.mean_loss = loss_sum / static_cast<double>(steps);
  return result;
}

std::vector<int> predict(const ModelSpec& spec, const LayeredParams& params,
                         const Dataset& data) {
  check_params(spec, params);
  check_consistent(data);
  if (data.dim != spec.input_dim) throw ShapeError("data dim != input_dim");
  const auto act = run_forward(spec, params, data);
  std::vector<int> out(data.size());
  for (std::size_t r = 0; r < data.size(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < act.logits.cols; ++c) {
      if (act.logits.at(r, c) > act.logits.at(r, best)) best = c;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

double evaluate(const ModelSpec& spec, const LayeredParams& params,
                const Dataset& test_set) {
  if (test_set.size() == 0) throw ValidationError("test set is empty");
  const auto pred = predict(spec, params, test_set);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == test_set.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

}  // namespace fedqp
