#include "fedqp/random.hpp"

#include <cmath>
#include <limits>

#include "fedqp/errors.hpp"

namespace fedqp {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RandomSource::RandomSource(std::uint64_t seed, std::string stream)
    : seed_(seed),
      stream_(std::move(stream)),
      engine_(splitmix64(splitmix64(seed) ^ fnv1a64(stream_))) {}

RandomSource RandomSource::derive(std::string_view label) const {
  return RandomSource(seed_, stream_ + "/" + std::string(label));
}

double RandomSource::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RandomSource::uniform_index(std::uint64_t n) {
  if (n == 0) throw ValidationError("uniform_index: n must be positive");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double RandomSource::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

double RandomSource::log_gamma_draw(double shape) {
  if (!(shape > 0.0)) throw ValidationError("gamma shape must be positive");
  // Marsaglia-Tsang; shapes below one use Gamma(a) = Gamma(a+1) * U^(1/a),
  // kept in log space so U^(1/a) cannot underflow to zero.
  double boost = 0.0;
  if (shape < 1.0) {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    boost = std::log(u) / shape;
    shape += 1.0;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return std::log(d * v) + boost;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
      return std::log(d * v) + boost;
    }
  }
}

int RandomSource::sign() { return (engine_() >> 63) != 0 ? 1 : -1; }

}  // namespace fedqp
