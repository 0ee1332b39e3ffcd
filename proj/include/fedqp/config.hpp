#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedqp/data.hpp"
#include "fedqp/engine.hpp"

namespace fedqp {

struct DataConfig {
  /// "synthetic" or "csv".
  std::string source = "synthetic";
  std::string csv_path;
  SyntheticSpec synthetic;
  double test_fraction = 0.1;
  PartitionMode partition_mode = PartitionMode::dirichlet;
  double beta = 0.5;

  bool operator==(const DataConfig&) const = default;
};

struct RunConfig {
  EngineConfig engine;
  DataConfig data;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "runs";

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

/// Every key with its default value. Config files may only contain keys
/// that appear here.
nlohmann::json default_config_json();

nlohmann::json to_json(const RunConfig& cfg);

/// Strict conversion: unknown keys and type errors raise ValidationError
/// naming the offending key. Missing keys take their defaults.
RunConfig from_json(const nlohmann::json& j);

/// Overlay "a.b.c=value" onto `j`. The value is parsed as JSON when possible
/// and taken as a plain string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Precedence: overrides > file > defaults. An empty path means "no file".
RunConfig load_config(const std::string& path,
                      const std::vector<std::string>& overrides = {});

/// FNV-1a over the canonical JSON of everything except seeds and
/// output_dir, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);
std::string config_hash(const nlohmann::json& j);

}  // namespace fedqp
