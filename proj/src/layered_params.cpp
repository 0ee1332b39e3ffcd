#include "fedqp/layered_params.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "fedqp/errors.hpp"

namespace fedqp {

LayeredParams::LayeredParams(std::vector<Layer> layers)
    : layers_(std::move(layers)) {}

LayeredParams LayeredParams::zeros_like(const LayeredParams& shape) {
  LayeredParams out;
  for (const auto& l : shape.layers_) {
    out.add_layer(l.name, Vector(l.data.size(), 0.0));
  }
  return out;
}

void LayeredParams::add_layer(std::string name, Vector data) {
  for (const auto& l : layers_) {
    if (l.name == name) throw ValidationError("duplicate layer name: " + name);
  }
  layers_.push_back(Layer{std::move(name), std::move(data)});
}

std::size_t LayeredParams::num_values() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.data.size();
  return n;
}

const Vector& LayeredParams::layer(const std::string& name) const {
  for (const auto& l : layers_) {
    if (l.name == name) return l.data;
  }
  throw ValidationError("no layer named " + name);
}

Vector& LayeredParams::layer(const std::string& name) {
  return const_cast<Vector&>(std::as_const(*this).layer(name));
}

std::optional<std::string> first_mismatch(const LayeredParams& a,
                                          const LayeredParams& b) {
  const auto n = std::min(a.num_layers(), b.num_layers());
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i].name != b[i].name || a[i].data.size() != b[i].data.size()) {
      return a[i].name;
    }
  }
  if (a.num_layers() > n) return a[n].name;
  if (b.num_layers() > n) return b[n].name;
  return std::nullopt;
}

bool compatible(const LayeredParams& a, const LayeredParams& b) {
  return !first_mismatch(a, b).has_value();
}

void require_compatible(const LayeredParams& a, const LayeredParams& b,
                        const char* op) {
  if (auto bad = first_mismatch(a, b)) {
    throw ShapeError(std::string(op) + ": shape mismatch at layer '" + *bad +
                     "'");
  }
}

LayeredParams axpy(double a, const LayeredParams& x, const LayeredParams& y) {
  require_compatible(x, y, "axpy");
  LayeredParams out = y;
  for (std::size_t i = 0; i < out.num_layers(); ++i) {
    axpy_inplace(a, x[i].data, out[i].data);
  }
  return out;
}

LayeredParams add(const LayeredParams& x, const LayeredParams& y) {
  require_compatible(x, y, "add");
  LayeredParams out = x;
  for (std::size_t i = 0; i < out.num_layers(); ++i) {
    auto& o = out[i].data;
    const auto& v = y[i].data;
    for (std::size_t k = 0; k < o.size(); ++k) o[k] = o[k] + v[k];
  }
  return out;
}

LayeredParams subtract(const LayeredParams& x, const LayeredParams& y) {
  require_compatible(x, y, "subtract");
  LayeredParams out = x;
  for (std::size_t i = 0; i < out.num_layers(); ++i) {
    auto& o = out[i].data;
    const auto& v = y[i].data;
    for (std::size_t k = 0; k < o.size(); ++k) o[k] = o[k] - v[k];
  }
  return out;
}

LayeredParams scale(double a, const LayeredParams& x) {
  LayeredParams out = x;
  for (auto& l : out.layers()) {
    for (double& v : l.data) v *= a;
  }
  return out;
}

double norm_sq(const LayeredParams& x) {
  double acc = 0.0;
  for (const auto& l : x.layers()) {
    for (double v : l.data) acc += v * v;
  }
  return acc;
}

double dot(const LayeredParams& x, const LayeredParams& y) {
  require_compatible(x, y, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.num_layers(); ++i) {
    const auto& a = x[i].data;
    const auto& b = y[i].data;
    for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  }
  return acc;
}

bool all_finite(const LayeredParams& x) {
  for (const auto& l : x.layers()) {
    if (!all_finite(std::span<const double>(l.data))) return false;
  }
  return true;
}

namespace {

constexpr char kMagic[4] = {'F', 'Q', 'L', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xffu);
  }
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw ValidationError("params stream truncated");
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace

void write_params(std::ostream& out, const LayeredParams& params) {
  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.num_layers()));
  for (const auto& l : params.layers()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.name.size()));
    out.write(l.name.data(), static_cast<std::streamsize>(l.name.size()));
    put_le<std::uint64_t>(out, l.data.size());
  }
  for (const auto& l : params.layers()) {
    for (double v : l.data) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw std::runtime_error("failed writing params");
}

LayeredParams read_params(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw ValidationError("not a FQLP params stream");
  }
  if (const auto version = get_le<std::uint32_t>(in); version != kVersion) {
    throw ValidationError("unsupported params version " +
                          std::to_string(version));
  }
  const auto count = get_le<std::uint32_t>(in);
  std::vector<std::pair<std::string, std::uint64_t>> header;
  header.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get_le<std::uint32_t>(in);
    std::string name(len, '\0');
    if (len > 0 && !in.read(name.data(), len)) {
      throw ValidationError("params stream truncated");
    }
    header.emplace_back(std::move(name), get_le<std::uint64_t>(in));
  }
  LayeredParams out;
  for (auto& [name, n] : header) {
    Vector data(n);
    for (auto& v : data) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
    out.add_layer(std::move(name), std::move(data));
  }
  return out;
}

void save_params(const std::string& path, const LayeredParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_params(out, params);
}

LayeredParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_params(in);
}

}  // namespace fedqp
