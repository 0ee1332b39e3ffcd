#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace fedqp {

/// Seedable random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The initial state is a SplitMix64 mix of the seed and the
/// FNV-1a hash of the stream label, so every logical actor (a client in a
/// round, a mutated model, the selector) gets its own stream regardless of
/// the order in which streams are created.
///
/// Distribution transforms are implemented here instead of using the
/// <random> distributions, whose outputs are implementation-defined.
class RandomSource {
 public:
  RandomSource(std::uint64_t seed, std::string stream);

  std::uint64_t seed() const { return seed_; }
  const std::string& stream() const { return stream_; }

  /// Independent child stream labelled "<stream>/<label>".
  RandomSource derive(std::string_view label) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  /// Standard normal (Marsaglia polar method).
  double normal();
  /// log of a Gamma(shape, 1) draw; stays finite for tiny shapes.
  double log_gamma_draw(double shape);
  bool bernoulli(double p) { return uniform() < p; }
  /// +1 or -1 with equal probability.
  int sign();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_index(i)]);
    }
  }

 private:
  std::uint64_t seed_;
  std::string stream_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace fedqp
