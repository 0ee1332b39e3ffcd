#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedqp/vector_ops.hpp"

namespace fedqp {

struct Layer {
  std::string name;
  Vector data;

  bool operator==(const Layer&) const = default;
};

/// Ordered list of named flat parameter vectors, one per model layer.
/// Used for global models, global gradients, mutations and mutated models.
class LayeredParams {
 public:
  LayeredParams() = default;
  explicit LayeredParams(std::vector<Layer> layers);

  /// Same layout as `shape`, every entry zero.
  static LayeredParams zeros_like(const LayeredParams& shape);

  void add_layer(std::string name, Vector data);

  std::size_t num_layers() const { return layers_.size(); }
  std::size_t num_values() const;
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  const Layer& operator[](std::size_t i) const { return layers_[i]; }
  Layer& operator[](std::size_t i) { return layers_[i]; }

  const Vector& layer(const std::string& name) const;
  Vector& layer(const std::string& name);

  bool operator==(const LayeredParams&) const = default;

 private:
  std::vector<Layer> layers_;
};

/// Name of the first layer at which `a` and `b` differ in name or length,
/// or nullopt when they are arithmetic-compatible.
std::optional<std::string> first_mismatch(const LayeredParams& a,
                                          const LayeredParams& b);
bool compatible(const LayeredParams& a, const LayeredParams& b);
/// Throws ShapeError naming the first offending layer.
void require_compatible(const LayeredParams& a, const LayeredParams& b,
                        const char* op);

/// Layer-wise a * x + y. Inputs are left untouched.
LayeredParams axpy(double a, const LayeredParams& x, const LayeredParams& y);
LayeredParams add(const LayeredParams& x, const LayeredParams& y);
LayeredParams subtract(const LayeredParams& x, const LayeredParams& y);
LayeredParams scale(double a, const LayeredParams& x);

/// Sum of squared entries over every layer, accumulated layer by layer.
double norm_sq(const LayeredParams& x);
double dot(const LayeredParams& x, const LayeredParams& y);
bool all_finite(const LayeredParams& x);

// Binary format (little-endian):
//   magic "FQLP" | u32 version=1 | u32 layer_count
//   per layer: u32 name_len | name bytes | u64 value_count
//   values of every layer, in layer order, as IEEE-754 binary64
void write_params(std::ostream& out, const LayeredParams& params);
LayeredParams read_params(std::istream& in);
void save_params(const std::string& path, const LayeredParams& params);
LayeredParams load_params(const std::string& path);

}  // namespace fedqp
