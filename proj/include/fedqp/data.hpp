#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fedqp/dataset.hpp"
#include "fedqp/random.hpp"

namespace fedqp {

/// Class-conditional Gaussian data. Class c has mean
///   (class_separation / sqrt(2)) * s_c * e_{c mod input_dim},
/// with s_c = +1 for c < input_dim and -1 otherwise, so distinct classes
/// sit exactly class_separation apart (or sqrt(2) times that for the
/// antipodal pairs c, c + input_dim). At most 2 * input_dim classes.
struct SyntheticSpec {
  std::size_t num_classes = 10;
  std::size_t input_dim = 32;
  std::size_t samples_per_class = 500;
  double class_separation = 3.5;
  double noise_std = 1.0;

  void validate() const;
  Vector class_mean(std::size_t c) const;
  bool operator==(const SyntheticSpec&) const = default;
};

/// Samples are interleaved by class: row i has label i % num_classes.
Dataset generate(const SyntheticSpec& spec, RandomSource& rng);

struct HoldoutSplit {
  Dataset train;
  Dataset test;
};

/// Stratified split: round(test_fraction * n_c) samples of every class go
/// to the test set. Row order within each part follows the source order.
HoldoutSplit split_holdout(const Dataset& data, double test_fraction,
                           RandomSource& rng);

enum class PartitionMode { iid, dirichlet };
std::string to_string(PartitionMode m);
PartitionMode parse_partition_mode(const std::string& s);

struct PartitionSpec {
  std::size_t num_clients = 100;
  PartitionMode mode = PartitionMode::dirichlet;
  double beta = 0.5;

  void validate() const;
  bool operator==(const PartitionSpec&) const = default;
};

struct ClientPartition {
  /// Sample indices held by each client, ascending.
  std::vector<std::vector<std::size_t>> assignments;

  std::size_t num_clients() const { return assignments.size(); }
  std::vector<std::size_t> client_sizes() const;
  bool operator==(const ClientPartition&) const = default;
};

/// iid: shuffled equal split, the remainder handed out one per client from
/// client 0. dirichlet: per class, proportions ~ Dir(beta, ..., beta) over
/// clients cut a shuffled list of that class's indices into contiguous
/// ranges at rounded cumulative boundaries. Clients left empty then take one
/// sample at a time from the currently largest client.
ClientPartition partition(std::span<const int> labels, const PartitionSpec& spec,
                          RandomSource& rng);

struct HeterogeneityReport {
  /// counts[client][class]
  std::vector<std::vector<std::size_t>> counts;
  /// Total-variation distance of each client's label distribution from the
  /// global one.
  std::vector<double> client_divergence;
  double mean_divergence = 0.0;
};

HeterogeneityReport heterogeneity_report(const ClientPartition& p,
                                         std::span<const int> labels);

/// Delimited text import. One sample per row: features, then the integer
/// label in the last column. Separators may be commas, semicolons, tabs or
/// spaces. Lines starting with '#' are comments; a first non-comment line
/// that does not parse as numbers is treated as a header and skipped.
Dataset read_delimited(std::istream& in);
Dataset load_delimited(const std::string& path);

/// Audit format: one line per client, "<client> <n>: <idx> <idx> ...".
void write_partition(std::ostream& out, const ClientPartition& p);
ClientPartition read_partition(std::istream& in);

}  // namespace fedqp
