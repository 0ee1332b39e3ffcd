#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedqp/dataset.hpp"
#include "fedqp/layered_params.hpp"
#include "fedqp/random.hpp"

namespace fedqp {

enum class Architecture { logreg, mlp };

std::string to_string(Architecture a);
Architecture parse_architecture(const std::string& s);

/// Small classifier description. Parameter layout:
///   logreg: W (input_dim x num_classes, row-major), b (num_classes)
///   mlp:    W1 (input_dim x hidden_dim), b1 (hidden_dim),
///           W2 (hidden_dim x num_classes), b2 (num_classes), ReLU hidden
struct ModelSpec {
  Architecture architecture = Architecture::mlp;
  std::size_t input_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t num_classes = 10;

  void validate() const;
  /// (layer name, length) pairs in canonical order.
  std::vector<std::pair<std::string, std::size_t>> layout() const;

  bool operator==(const ModelSpec&) const = default;
};

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.5;
  std::size_t batch_size = 50;
  std::size_t local_epochs = 5;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vector data;

  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct ForwardResult {
  double loss = 0.0;
  Matrix logits;
};

/// Weights ~ N(0, 1/fan_in), biases zero.
LayeredParams init_params(const ModelSpec& spec, RandomSource& rng);

/// Mean softmax cross-entropy over the batch.
ForwardResult forward_loss(const ModelSpec& spec, const LayeredParams& params,
                           const Dataset& batch);

/// Gradient of forward_loss with respect to every parameter.
LayeredParams backward(const ModelSpec& spec, const LayeredParams& params,
                       const Dataset& batch);

struct LocalTrainResult {
  LayeredParams params;
  /// Mean of the mini-batch losses seen during training.
  double mean_loss = 0.0;
};

/// Mini-batch SGD with momentum (v <- mu*v + g; w <- w - lr*v) over
/// `local_epochs` shuffled passes of the client's samples. The momentum
/// buffer starts at zero on every call.
LocalTrainResult local_train(const ModelSpec& spec, const LayeredParams& params,
                             const Dataset& data,
                             std::span<const std::size_t> indices,
                             const TrainConfig& cfg, RandomSource& rng);

/// Class index with the largest logit; ties go to the lowest index.
std::vector<int> predict(const ModelSpec& spec, const LayeredParams& params,
                         const Dataset& data);

/// Fraction of samples whose argmax prediction equals the label.
double evaluate(const ModelSpec& spec, const LayeredParams& params,
                const Dataset& test_set);

}  // namespace fedqp
