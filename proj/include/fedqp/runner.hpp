#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fedqp/config.hpp"
#include "fedqp/engine.hpp"

namespace fedqp {

/// Builds the dataset, the held-out test split and the device partition for
/// one seed. Streams: "data/generate", "data/split", "data/partition".
FederatedData prepare_data(const RunConfig& cfg, std::uint64_t seed);

/// Engine config with the seed set and the model shape fixed to the data.
EngineConfig engine_for(const RunConfig& cfg, std::uint64_t seed,
                        const FederatedData& data);

/// File name for each seed entry: "metrics-<seed>.csv", with a "-<k>"
/// suffix for the k-th repeat of a seed.
std::vector<std::string> metrics_names(const std::vector<std::uint64_t>& seeds);

/// Metrics table, one row per round. Leading '#' lines carry provenance.
void write_metrics(std::ostream& out, const std::vector<RoundMetrics>& log,
                   Strategy strategy, const std::string& hash,
                   std::uint64_t seed);

struct MetricsFile {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> strategy;
  std::vector<RoundMetrics> rows;
};
MetricsFile read_metrics(std::istream& in);
MetricsFile load_metrics(const std::filesystem::path& path);

struct RunOptions {
  /// Defaults to "<config hash>-<UTC timestamp>".
  std::optional<std::string> run_id;
  /// Extra manifest fields, used by sweeps.
  nlohmann::json manifest_extra = nlohmann::json::object();
};

struct RunSummary {
  std::filesystem::path run_dir;
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  std::vector<double> final_accuracy;
  double mean_accuracy = 0.0;
  /// Sample standard deviation (n - 1); zero for a single seed.
  double std_accuracy = 0.0;
  /// Mean over seeds of the partition's mean total-variation divergence.
  double mean_divergence = 0.0;
  /// qp_activations averaged over rounds and seeds.
  double mean_qp_activations = 0.0;
};

/// Writes <output_dir>/<run-id>/{manifest.json, metrics-<seed>.csv,
/// curve.csv, summary.json} and returns the summary.
RunSummary run(const RunConfig& cfg, const RunOptions& opts = {});

enum class SweepAxis { qp_probability, beta, clients_per_round, strategy };
std::string to_string(SweepAxis a);
SweepAxis parse_sweep_axis(const std::string& s);
/// Dotted config key the axis controls.
std::string axis_key(SweepAxis a);

struct SweepSpec {
  SweepAxis axis = SweepAxis::qp_probability;
  /// Raw values as given on the command line, e.g. "0.5" or "fedavg".
  std::vector<std::string> values;
};

/// Splits "a,b,c" into its entries.
std::vector<std::string> split_values(const std::string& list);

struct SweepResult {
  std::filesystem::path sweep_dir;
  std::string base_hash;
  std::vector<RunSummary> runs;
};

/// One run() per value with everything else fixed. Output layout:
///   <output_dir>/<sweep-id>/sweep.json, comparison.csv,
///   <sweep-id>/<axis>=<value>/... (one run directory each)
SweepResult sweep(const RunConfig& base, const SweepSpec& spec,
                  const std::optional<std::string>& sweep_id = std::nullopt);

/// Summary recomputed from the metrics files in `run_dir`.
RunSummary summarize_run_dir(const std::filesystem::path& run_dir);

/// Human-readable report for a run or sweep directory.
std::string report(const std::filesystem::path& dir);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// Mean and sample standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& v);

}  // namespace fedqp
