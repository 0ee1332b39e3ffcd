#include "fedqp/config.hpp"

#include <cstdio>
#include <fstream>
#include <type_traits>

#include "fedqp/errors.hpp"
#include "fedqp/random.hpp"

namespace fedqp {

using nlohmann::json;

void RunConfig::validate() const {
  engine.validate();
  data.synthetic.validate();
  if (data.source != "synthetic" && data.source != "csv") {
    throw ValidationError("data.source: expected synthetic or csv");
  }
  if (data.source == "csv" && data.csv_path.empty()) {
    throw ValidationError("data.csv_path: required when data.source is csv");
  }
  if (!(data.test_fraction > 0.0 && data.test_fraction < 1.0)) {
    throw ValidationError("data.test_fraction: must lie in (0, 1)");
  }
  PartitionSpec{engine.num_devices, data.partition_mode, data.beta}.validate();
  if (seeds.empty()) throw ValidationError("seeds: must be nonempty");
}

json to_json(const RunConfig& c) {
  const auto& e = c.engine;
  const auto& s = c.data.synthetic;
  return json{
      {"engine",
       {{"rounds", e.num_rounds},
        {"num_devices", e.num_devices},
        {"clients_per_round", e.clients_per_round},
        {"strategy", to_string(e.strategy)},
        {"aggregation", to_string(e.aggregation)},
        {"record_wall_time", e.record_wall_time},
        {"workers", e.workers}}},
      {"train",
       {{"learning_rate", e.train.learning_rate},
        {"momentum", e.train.momentum},
        {"batch_size", e.train.batch_size},
        {"local_epochs", e.train.local_epochs}}},
      {"mutation",
       {{"alpha", e.mutation.alpha},
        {"qp_probability", e.mutation.qp_probability},
        {"distribution", to_string(e.mutation.distribution)},
        {"degenerate_eps", e.mutation.degenerate_eps},
        {"base", to_string(e.mutation.base)}}},
      {"model",
       {{"architecture", to_string(e.model.architecture)},
        {"hidden_dim", e.model.hidden_dim}}},
      {"data",
       {{"source", c.data.source},
        {"csv_path", c.data.csv_path},
        {"num_classes", s.num_classes},
        {"input_dim", s.input_dim},
        {"samples_per_class", s.samples_per_class},
        {"class_separation", s.class_separation},
        {"noise_std", s.noise_std},
        {"test_fraction", c.data.test_fraction},
        {"partition",
         {{"mode", to_string(c.data.partition_mode)}, {"beta", c.data.beta}}}}},
      {"seeds", c.seeds},
      {"output_dir", c.output_dir}};
}

json default_config_json() { return to_json(RunConfig{}); }

namespace {

void check_keys(const json& given, const json& schema, const std::string& path) {
  if (!given.is_object()) {
    throw ValidationError((path.empty() ? std::string("config") : path) +
                          ": expected an object");
  }
  for (const auto& [key, value] : given.items()) {
    const std::string full = path.empty() ? key : path + "." + key;
    if (!schema.contains(key)) {
      throw ValidationError(full + ": unknown key");
    }
    if (schema.at(key).is_object()) check_keys(value, schema.at(key), full);
  }
}

void merge(json& dst, const json& src) {
  for (const auto& [key, value] : src.items()) {
    if (value.is_object() && dst.contains(key) && dst[key].is_object()) {
      merge(dst[key], value);
    } else {
      dst[key] = value;
    }
  }
}

class Reader {
 public:
  explicit Reader(const json& root) : root_(root) {}

  const json& at(const std::string& path) const {
    const json* node = &root_;
    std::size_t start = 0;
    while (true) {
      const auto dot = path.find('.', start);
      const auto key = path.substr(start, dot - start);
      node = &node->at(key);
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    return *node;
  }

  template <typename T>
  T get(const std::string& path) const {
    const json& v = at(path);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ValidationError(path + ": expected a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ValidationError(path + ": expected true/false");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0)) {
          throw ValidationError(path + ": expected a non-negative integer");
        }
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ValidationError(path + ": expected a string");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ValidationError(path + ": " + e.what());
    }
  }

  template <typename Fn>
  auto parse(const std::string& path, Fn&& fn) const {
    const auto s = get<std::string>(path);
    try {
      return fn(s);
    } catch (const ValidationError& e) {
      throw ValidationError(path + ": " + e.what());
    }
  }

 private:
  const json& root_;
};

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ValidationError(key + ": " + what);
}

}  // namespace

RunConfig from_json(const json& given) {
  const json schema = default_config_json();
  check_keys(given, schema, "");
  json full = schema;
  merge(full, given);
  const Reader r(full);

  RunConfig c;
  auto& e = c.engine;
  e.num_rounds = r.get<std::size_t>("engine.rounds");
  e.num_devices = r.get<std::size_t>("engine.num_devices");
  e.clients_per_round = r.get<std::size_t>("engine.clients_per_round");
  e.strategy = r.parse("engine.strategy", parse_strategy);
  e.aggregation = r.parse("engine.aggregation", parse_aggregation_weighting);
  e.record_wall_time = r.get<bool>("engine.record_wall_time");
  e.workers = r.get<std::size_t>("engine.workers");

  e.train.learning_rate = r.get<double>("train.learning_rate");
  e.train.momentum = r.get<double>("train.momentum");
  e.train.batch_size = r.get<std::size_t>("train.batch_size");
  e.train.local_epochs = r.get<std::size_t>("train.local_epochs");

  e.mutation.alpha = r.get<double>("mutation.alpha");
  e.mutation.qp_probability = r.get<double>("mutation.qp_probability");
  e.mutation.distribution =
      r.parse("mutation.distribution", parse_mutation_distribution);
  e.mutation.degenerate_eps = r.get<double>("mutation.degenerate_eps");
  e.mutation.base = r.parse("mutation.base", parse_mutation_base);

  e.model.architecture = r.parse("model.architecture", parse_architecture);
  e.model.hidden_dim = r.get<std::size_t>("model.hidden_dim");

  auto& d = c.data;
  d.source = r.get<std::string>("data.source");
  d.csv_path = r.get<std::string>("data.csv_path");
  d.synthetic.num_classes = r.get<std::size_t>("data.num_classes");
  d.synthetic.input_dim = r.get<std::size_t>("data.input_dim");
  d.synthetic.samples_per_class = r.get<std::size_t>("data.samples_per_class");
  d.synthetic.class_separation = r.get<double>("data.class_separation");
  d.synthetic.noise_std = r.get<double>("data.noise_std");
  d.test_fraction = r.get<double>("data.test_fraction");
  d.partition_mode = r.parse("data.partition.mode", parse_partition_mode);
  d.beta = r.get<double>("data.partition.beta");

  // For synthetic data the model shape follows the generator; csv sources
  // fix it once the file has been read.
  e.model.input_dim = d.synthetic.input_dim;
  e.model.num_classes = d.synthetic.num_classes;

  const json& seeds = r.at("seeds");
  if (!seeds.is_array()) throw ValidationError("seeds: expected a list");
  c.seeds.clear();
  for (const auto& s : seeds) {
    if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<long long>() < 0)) {
      throw ValidationError("seeds: entries must be non-negative integers");
    }
    c.seeds.push_back(s.get<std::uint64_t>());
  }
  c.output_dir = r.get<std::string>("output_dir");

  require(e.num_devices >= 1, "engine.num_devices", "must be >= 1");
  require(e.clients_per_round >= 1 && e.clients_per_round <= e.num_devices,
          "engine.clients_per_round", "must lie in [1, engine.num_devices]");
  require(e.workers >= 1, "engine.workers", "must be >= 1");
  require(e.train.learning_rate >= 0.0, "train.learning_rate", "must be >= 0");
  require(e.train.momentum >= 0.0 && e.train.momentum < 1.0, "train.momentum",
          "must lie in [0, 1)");
  require(e.train.batch_size >= 1, "train.batch_size", "must be >= 1");
  require(e.train.local_epochs >= 1, "train.local_epochs", "must be >= 1");
  require(e.mutation.alpha >= 0.0, "mutation.alpha", "must be >= 0");
  require(e.mutation.qp_probability >= 0.0 && e.mutation.qp_probability <= 1.0,
          "mutation.qp_probability",
          "value " + std::to_string(e.mutation.qp_probability) +
              " is outside the range [0, 1]");
  require(e.mutation.degenerate_eps > 0.0, "mutation.degenerate_eps",
          "must be > 0");
  require(d.synthetic.num_classes >= 2, "data.num_classes", "must be >= 2");
  require(d.synthetic.input_dim >= 1, "data.input_dim", "must be >= 1");
  require(d.synthetic.class_separation > 0.0, "data.class_separation",
          "must be > 0");
  require(d.synthetic.noise_std > 0.0, "data.noise_std", "must be > 0");
  require(d.test_fraction > 0.0 && d.test_fraction < 1.0, "data.test_fraction",
          "must lie in (0, 1)");
  require(d.beta > 0.0, "data.partition.beta", "must be > 0");
  require(!c.seeds.empty(), "seeds", "must be nonempty");
  c.validate();
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("--set expects key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const auto part = key.substr(start, dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    if (!node->contains(part) || !(*node)[part].is_object()) {
      (*node)[part] = json::object();
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

RunConfig load_config(const std::string& path,
                      const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ValidationError(path + ": cannot open config file");
    try {
      j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
      throw ValidationError(path + ": parse error: " + e.what());
    }
    if (j.is_null()) j = json::object();
  }
  for (const auto& o : overrides) apply_override(j, o);
  return from_json(j);
}

std::string config_hash(const json& j) {
  json copy = j;
  copy.erase("seeds");
  copy.erase("output_dir");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(copy.dump())));
  return buf;
}

std::string config_hash(const RunConfig& cfg) {
  return config_hash(to_json(cfg));
}

}  // namespace fedqp
