#include <doctest.h>

#include <bit>
#include <cstring>
#include <sstream>

#include "fedqp/errors.hpp"
#include "fedqp/layered_params.hpp"
#include "fedqp/random.hpp"
#include "fedqp/vector_ops.hpp"

using namespace fedqp;

namespace {

LayeredParams random_params(RandomSource& rng, std::vector<std::size_t> sizes) {
  LayeredParams p;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    Vector v(sizes[i]);
    for (auto& x : v) x = rng.normal() * 3.0;
    p.add_layer("L" + std::to_string(i), std::move(v));
  }
  return p;
}

bool bit_equal(const LayeredParams& a, const LayeredParams& b) {
  if (!compatible(a, b)) return false;
  for (std::size_t l = 0; l < a.num_layers(); ++l) {
    if (std::memcmp(a[l].data.data(), b[l].data.data(),
                    a[l].data.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("axpy examples") {
  RandomSource rng(7, "axpy");
  const auto X = random_params(rng, {3, 5});
  const auto Y = random_params(rng, {3, 5});

  CHECK(axpy(0.0, X, Y) == Y);
  CHECK(axpy(1.0, X, scale(-1.0, X)) == LayeredParams::zeros_like(X));

  LayeredParams x({{"L1", {1, 2}}});
  LayeredParams y({{"L1", {3, 4}}});
  const auto r = axpy(2.0, x, y);
  CHECK(r.layer("L1") == Vector{5, 8});
  // inputs untouched
  CHECK(x.layer("L1") == Vector{1, 2});
  CHECK(y.layer("L1") == Vector{3, 4});
}

TEST_CASE("axpy matches an elementwise loop bit for bit") {
  RandomSource rng(11, "axpy-prop");
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_params(rng, {1 + rng.uniform_index(9), 1 + rng.uniform_index(4)});
    auto y = x;
    for (auto& l : y.layers()) for (auto& v : l.data) v = rng.normal();
    const double a = rng.normal();
    LayeredParams expect = y;
    for (std::size_t l = 0; l < x.num_layers(); ++l) {
      for (std::size_t k = 0; k < x[l].data.size(); ++k) {
        expect[l].data[k] = a * x[l].data[k] + y[l].data[k];
      }
    }
    CHECK(bit_equal(axpy(a, x, y), expect));
  }
}

TEST_CASE("axpy rejects incompatible shapes naming the layer") {
  LayeredParams a({{"W", {1, 2}}, {"b", {0}}});
  LayeredParams b({{"W", {1, 2}}, {"b", {0, 1}}});
  LayeredParams c({{"W", {1, 2}}, {"c", {0}}});
  CHECK_THROWS_AS(axpy(1.0, a, b), ShapeError);
  try {
    axpy(1.0, a, b);
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
  CHECK(first_mismatch(a, c).value() == "b");
  CHECK_FALSE(first_mismatch(a, a).has_value());
}

TEST_CASE("dot examples") {
  CHECK(dot(Vector{1, 0}, Vector{0, 1}) == 0.0);
  CHECK(dot(Vector{1, 2, 3}, Vector{1, 2, 3}) == 14.0);
  CHECK(dot(Vector{}, Vector{}) == 0.0);
  CHECK_THROWS_AS(dot(Vector{1}, Vector{1, 2}), ShapeError);
}

TEST_CASE("dot and norm_sq properties") {
  RandomSource rng(3, "dot-prop");
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = rng.uniform_index(20);
    Vector x(n), y(n);
    for (auto& v : x) v = rng.normal();
    for (auto& v : y) v = rng.normal();
    double loop = 0.0;
    for (std::size_t i = 0; i < n; ++i) loop += x[i] * y[i];
    CHECK(dot(x, y) == loop);
    CHECK(std::abs(dot(x, y) - dot(y, x)) <= 1e-12 * (1.0 + std::abs(loop)));
    CHECK(norm_sq(x) == dot(x, x));
    CHECK(norm_sq(x) >= 0.0);
  }
  CHECK(norm_sq(Vector{0, 0, 0}) == 0.0);
  CHECK(norm_sq(Vector{3, 4}) == 25.0);
}

TEST_CASE("all_finite") {
  CHECK(all_finite(Vector{1.0, -2.0}));
  CHECK_FALSE(all_finite(Vector{1.0, std::nan("")}));
  CHECK_FALSE(all_finite(Vector{INFINITY}));
}

TEST_CASE("random source replays identically and streams are independent") {
  RandomSource a(42, "client/3");
  RandomSource b(42, "client/3");
  RandomSource c(42, "client/4");
  RandomSource d(43, "client/3");
  bool differs_c = false, differs_d = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    CHECK(va == b.next_u64());
    differs_c |= va != c.next_u64();
    differs_d |= va != d.next_u64();
  }
  CHECK(differs_c);
  CHECK(differs_d);

  // Derived streams do not depend on the parent's consumption.
  RandomSource parent(5, "root");
  const auto child1 = parent.derive("x").next_u64();
  for (int i = 0; i < 10; ++i) parent.next_u64();
  CHECK(parent.derive("x").next_u64() == child1);
  CHECK(RandomSource(5, "root/x").next_u64() == child1);
}

TEST_CASE("random source pinned outputs") {
  // Frozen values: any change to seeding or the engine shows up here.
  RandomSource r(0, "");
  const auto first = r.next_u64();
  RandomSource r2(0, "");
  CHECK(r2.next_u64() == first);
  std::mt19937_64 ref(splitmix64(splitmix64(0) ^ fnv1a64("")));
  CHECK(ref() == first);
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("random distributions are sane") {
  RandomSource r(9, "dist");
  const int n = 200000;
  double s = 0, ss = 0, u = 0;
  int plus = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    ss += z * z;
    const double v = r.uniform();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    u += v;
    plus += r.sign() > 0;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(ss / n - 1.0) < 0.02);
  CHECK(std::abs(u / n - 0.5) < 0.005);
  CHECK(std::abs(plus / double(n) - 0.5) < 0.005);

  // Gamma(shape) has mean shape.
  for (double shape : {0.1, 0.5, 1.0, 3.0}) {
    double m = 0.0;
    const int k = 100000;
    for (int i = 0; i < k; ++i) m += std::exp(r.log_gamma_draw(shape));
    CHECK(std::abs(m / k - shape) < 0.03 * std::max(1.0, shape));
  }
  for (int i = 0; i < 1000; ++i) CHECK(r.uniform_index(7) < 7);
  CHECK_THROWS_AS(r.uniform_index(0), ValidationError);
}

TEST_CASE("params serialization round-trips bit-exactly") {
  RandomSource rng(1, "ser");
  for (int trial = 0; trial < 10; ++trial) {
    auto p = random_params(rng, {rng.uniform_index(40), 1 + rng.uniform_index(3), 0});
    p[0].data.push_back(-0.0);
    p[0].data.push_back(std::numeric_limits<double>::denorm_min());
    std::stringstream buf;
    write_params(buf, p);
    const auto q = read_params(buf);
    CHECK(bit_equal(p, q));
  }
  std::stringstream bad("nope");
  CHECK_THROWS_AS(read_params(bad), ValidationError);
}

TEST_CASE("params binary layout is as documented") {
  LayeredParams p({{"W", {1.0}}});
  std::stringstream buf;
  write_params(buf, p);
  const std::string s = buf.str();
  REQUIRE(s.size() == 4 + 4 + 4 + 4 + 1 + 8 + 8);
  CHECK(s.substr(0, 4) == "FQLP");
  CHECK(s[4] == 1);
  CHECK(s[8] == 1);
  CHECK(s[12] == 1);
  CHECK(s[16] == 'W');
  CHECK(s[17] == 1);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= std::uint64_t(static_cast<unsigned char>(s[25 + i])) << (8 * i);
  }
  CHECK(std::bit_cast<double>(bits) == 1.0);
}

TEST_CASE("layered params lookup") {
  LayeredParams p;
  p.add_layer("a", {1});
  CHECK_THROWS_AS(p.add_layer("a", {2}), ValidationError);
  CHECK_THROWS_AS(p.layer("zz"), ValidationError);
  CHECK(p.num_values() == 1);
}
