#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fedqp/data.hpp"
#include "fedqp/errors.hpp"

using namespace fedqp;

namespace {

void check_is_partition(const ClientPartition& p, std::size_t n) {
  std::vector<std::size_t> all;
  for (const auto& a : p.assignments) {
    CHECK(std::is_sorted(a.begin(), a.end()));
    all.insert(all.end(), a.begin(), a.end());
  }
  std::sort(all.begin(), all.end());
  REQUIRE(all.size() == n);
  for (std::size_t i = 0; i < n; ++i) REQUIRE(all[i] == i);
}

std::vector<int> balanced_labels(std::size_t classes, std::size_t per_class) {
  std::vector<int> y;
  for (std::size_t i = 0; i < classes * per_class; ++i) {
    y.push_back(static_cast<int>(i % classes));
  }
  return y;
}

}  // namespace

TEST_CASE("generate: sizes, balance, determinism") {
  SyntheticSpec s{5, 4, 30, 2.0, 0.5};
  RandomSource a(1, "gen"), b(1, "gen");
  const auto d = generate(s, a);
  CHECK(d.size() == 150);
  CHECK(d.dim == 4);
  check_consistent(d);
  std::vector<int> hist(5, 0);
  for (int y : d.labels) ++hist[y];
  CHECK(hist == std::vector<int>(5, 30));
  CHECK(generate(s, b) == d);
}

TEST_CASE("generate: vanishing noise puts samples on their class means") {
  SyntheticSpec s{6, 3, 4, 5.0, 1e-12};
  RandomSource rng(2, "gen");
  const auto d = generate(s, rng);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto mean = s.class_mean(static_cast<std::size_t>(d.labels[i]));
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(d.row(i)[k] == doctest::Approx(mean[k]).epsilon(1e-9));
    }
  }
}

TEST_CASE("class means are class_separation apart") {
  SyntheticSpec s{4, 3, 1, 2.5, 1.0};
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a + 1; b < 4; ++b) {
      const auto ma = s.class_mean(a), mb = s.class_mean(b);
      double d2 = 0.0;
      for (std::size_t k = 0; k < 3; ++k) d2 += (ma[k] - mb[k]) * (ma[k] - mb[k]);
      // Antipodal pair (0, 3) is sqrt(2) further apart.
      const double expect = (b == a + 3) ? 2.5 * std::sqrt(2.0) : 2.5;
      CHECK(std::sqrt(d2) == doctest::Approx(expect));
    }
  }
  CHECK_THROWS_AS((SyntheticSpec{7, 3, 1, 1.0, 1.0}.validate()), ValidationError);
  CHECK_THROWS_AS((SyntheticSpec{2, 3, 1, 0.0, 1.0}.validate()), ValidationError);
  CHECK_THROWS_AS((SyntheticSpec{2, 3, 1, 1.0, 0.0}.validate()), ValidationError);
}

TEST_CASE("split_holdout is stratified and disjoint") {
  SyntheticSpec s{4, 2, 50, 2.0, 1.0};
  RandomSource rng(3, "split");
  const auto d = generate(s, rng);
  const auto split = split_holdout(d, 0.1, rng);
  CHECK(split.test.size() == 20);
  CHECK(split.train.size() == 180);
  std::vector<int> hist(4, 0);
  for (int y : split.test.labels) ++hist[y];
  CHECK(hist == std::vector<int>(4, 5));
}

TEST_CASE("iid partition splits evenly") {
  const auto labels = balanced_labels(10, 10);
  RandomSource rng(4, "iid");
  const auto p = partition(labels, {10, PartitionMode::iid, 1.0}, rng);
  for (const auto& a : p.assignments) CHECK(a.size() == 10);
  check_is_partition(p, 100);

  const auto odd = balanced_labels(3, 11);  // 33 samples, 5 clients
  const auto q = partition(odd, {5, PartitionMode::iid, 1.0}, rng);
  CHECK(q.client_sizes() == std::vector<std::size_t>{7, 7, 7, 6, 6});
  check_is_partition(q, 33);
}

TEST_CASE("partition is a set partition for every mode and beta") {
  const auto labels = balanced_labels(10, 100);
  for (double beta : {0.1, 0.5, 1.0, 1000.0}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      for (auto mode : {PartitionMode::iid, PartitionMode::dirichlet}) {
        RandomSource rng(seed, "part");
        const auto p = partition(labels, {37, mode, beta}, rng);
        CHECK(p.num_clients() == 37);
        check_is_partition(p, labels.size());
        for (auto n : p.client_sizes()) CHECK(n >= 1);
      }
    }
  }
}

TEST_CASE("dirichlet repair leaves no empty clients even when forced") {
  // 25 samples across 20 clients at beta=0.01: most draws concentrate mass.
  const auto labels = balanced_labels(5, 5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RandomSource rng(seed, "repair");
    const auto p = partition(labels, {20, PartitionMode::dirichlet, 0.01}, rng);
    check_is_partition(p, 25);
    for (auto n : p.client_sizes()) CHECK(n >= 1);
  }
  const auto exact = balanced_labels(2, 3);
  RandomSource rng(1, "exact");
  const auto p = partition(exact, {6, PartitionMode::dirichlet, 0.05}, rng);
  for (auto n : p.client_sizes()) CHECK(n == 1);
}

TEST_CASE("partition determinism and errors") {
  const auto labels = balanced_labels(4, 25);
  RandomSource a(9, "p"), b(9, "p");
  const PartitionSpec spec{8, PartitionMode::dirichlet, 0.3};
  CHECK(partition(labels, spec, a) == partition(labels, spec, b));
  RandomSource c(1, "p");
  CHECK_THROWS_AS(partition(labels, {101, PartitionMode::iid, 1.0}, c), ValidationError);
  CHECK_THROWS_AS(partition(labels, {4, PartitionMode::dirichlet, 0.0}, c), ValidationError);
  CHECK_THROWS_AS(partition(labels, {0, PartitionMode::iid, 1.0}, c), ValidationError);
}

TEST_CASE("large beta approaches the global class mix") {
  const auto labels = balanced_labels(10, 500);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RandomSource rng(seed, "beta1000");
    const auto p = partition(labels, {10, PartitionMode::dirichlet, 1000.0}, rng);
    const auto rep = heterogeneity_report(p, labels);
    for (std::size_t c = 0; c < 10; ++c) {
      const double n = static_cast<double>(p.assignments[c].size());
      for (std::size_t k = 0; k < 10; ++k) {
        CHECK(std::abs(rep.counts[c][k] / n - 0.1) < 0.05);
      }
    }
  }
}

TEST_CASE("heterogeneity report examples") {
  const auto labels = balanced_labels(4, 2000);
  RandomSource rng(5, "het");
  const auto iid = partition(labels, {4, PartitionMode::iid, 1.0}, rng);
  CHECK(heterogeneity_report(iid, labels).mean_divergence < 0.05);

  ClientPartition one_class;
  one_class.assignments.resize(4);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    one_class.assignments[labels[i]].push_back(i);
  }
  const auto r = heterogeneity_report(one_class, labels);
  CHECK(r.mean_divergence == doctest::Approx(3.0 / 4.0));
  CHECK(r.counts[2][2] == 2000);
  CHECK(r.counts[2][1] == 0);

  ClientPartition single;
  single.assignments.push_back({});
  for (std::size_t i = 0; i < labels.size(); ++i) single.assignments[0].push_back(i);
  CHECK(heterogeneity_report(single, labels).mean_divergence == 0.0);
}

TEST_CASE("smaller beta means more heterogeneity on average") {
  const auto labels = balanced_labels(10, 500);
  auto mean_div = [&](double beta) {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      RandomSource rng(seed, "mono");
      const auto p = partition(labels, {20, PartitionMode::dirichlet, beta}, rng);
      total += heterogeneity_report(p, labels).mean_divergence;
    }
    return total / 10.0;
  };
  const double d01 = mean_div(0.1), d1 = mean_div(1.0), d1000 = mean_div(1000.0);
  CHECK(d01 > d1);
  CHECK(d1 > d1000);
}

TEST_CASE("delimited import") {
  std::istringstream in(
      "# synthetic export\n"
      "x0,x1,label\n"
      "0.5,1.5,0\n"
      "-1,2e-1,2\n"
      "\n"
      "3;4;1\n");
  const auto d = read_delimited(in);
  CHECK(d.dim == 2);
  CHECK(d.labels == std::vector<int>{0, 2, 1});
  CHECK(d.features == Vector{0.5, 1.5, -1.0, 0.2, 3.0, 4.0});

  std::istringstream ragged("1,2,0\n1,0\n");
  CHECK_THROWS_AS(read_delimited(ragged), ValidationError);
  std::istringstream badlabel("1,2,0.5\n");
  CHECK_THROWS_AS(read_delimited(badlabel), ValidationError);
  std::istringstream empty("a,b\n");
  CHECK_THROWS_AS(read_delimited(empty), ValidationError);
}

TEST_CASE("partition export round-trips") {
  const auto labels = balanced_labels(3, 20);
  RandomSource rng(6, "exp");
  const auto p = partition(labels, {7, PartitionMode::dirichlet, 0.5}, rng);
  std::stringstream buf;
  write_partition(buf, p);
  CHECK(read_partition(buf) == p);
  std::istringstream bad("0 3: 1 2\n");
  CHECK_THROWS_AS(read_partition(bad), ValidationError);
}
