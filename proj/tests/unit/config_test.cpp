#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fedqp/config.hpp"
#include "fedqp/errors.hpp"

using namespace fedqp;
using nlohmann::json;

namespace {

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("empty config resolves to the documented defaults") {
  const auto c = from_json(json::object());
  CHECK(c.engine.train.learning_rate == 0.01);
  CHECK(c.engine.train.momentum == 0.5);
  CHECK(c.engine.train.batch_size == 50);
  CHECK(c.engine.train.local_epochs == 5);
  CHECK(c.engine.num_devices == 100);
  CHECK(c.engine.clients_per_round == 10);
  CHECK(c.engine.strategy == Strategy::fedqp);
  CHECK(c.engine.aggregation == AggregationWeighting::uniform);
  CHECK(c.engine.mutation.distribution == MutationDistribution::signed_gradient);
  CHECK(c.engine.mutation.base == MutationBase::global_model);
  CHECK(c.engine.mutation.degenerate_eps == 1e-12);
  CHECK(c.engine.model.architecture == Architecture::mlp);
  CHECK(c.data.test_fraction == 0.1);
  CHECK(c.seeds == std::vector<std::uint64_t>{1});
  CHECK(c == RunConfig{});
  CHECK(load_config("") == RunConfig{});
}

TEST_CASE("invalid values are rejected naming the key") {
  auto msg = message_of([] { from_json(json{{"mutation", {{"qp_probability", 1.5}}}}); });
  CHECK(msg.find("mutation.qp_probability") != std::string::npos);
  CHECK(msg.find("[0, 1]") != std::string::npos);

  msg = message_of([] { from_json(json{{"engine", {{"bogus", 1}}}}); });
  CHECK(msg == "engine.bogus: unknown key");

  msg = message_of([] { from_json(json{{"train", {{"batch_size", "fifty"}}}}); });
  CHECK(msg.find("train.batch_size") != std::string::npos);

  msg = message_of([] { from_json(json{{"engine", {{"strategy", "fedprox"}}}}); });
  CHECK(msg.find("engine.strategy") != std::string::npos);

  msg = message_of([] { from_json(json{{"engine", {{"clients_per_round", 200}}}}); });
  CHECK(msg.find("engine.clients_per_round") != std::string::npos);

  msg = message_of([] { from_json(json{{"seeds", json::array()}}); });
  CHECK(msg.find("seeds") != std::string::npos);

  CHECK_THROWS_AS(from_json(json{{"train", {{"momentum", 1.0}}}}), ValidationError);
  CHECK_THROWS_AS(from_json(json{{"data", {{"partition", {{"beta", 0}}}}}}), ValidationError);
  CHECK_THROWS_AS(from_json(json{{"data", {{"source", "csv"}}}}), ValidationError);
  CHECK_THROWS_AS(from_json(json{{"train", 3}}), ValidationError);
}

TEST_CASE("serialize then reload gives the same config") {
  json j{{"engine", {{"rounds", 7}, {"strategy", "fedmut"}, {"aggregation", "by_sample_count"}}},
         {"mutation", {{"alpha", 0.25}, {"distribution", "gaussian"}, {"base", "local"}}},
         {"model", {{"architecture", "logreg"}}},
         {"data", {{"num_classes", 3}, {"input_dim", 5}, {"partition", {{"mode", "iid"}}}}},
         {"seeds", {3, 1, 4}}};
  const auto c = from_json(j);
  CHECK(from_json(to_json(c)) == c);
  CHECK(config_hash(from_json(to_json(c))) == config_hash(c));

  // Holds for the defaults and across a spread of overrides.
  for (const char* o : {"mutation.qp_probability=0.75", "train.learning_rate=0.1",
                        "data.partition.beta=1000", "engine.workers=4"}) {
    json k = json::object();
    apply_override(k, o);
    const auto d = from_json(k);
    CHECK(from_json(to_json(d)) == d);
  }
}

TEST_CASE("overrides take precedence over the file") {
  const auto dir = std::filesystem::temp_directory_path() / "fedqp_config_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "cfg.json").string();
  {
    std::ofstream out(path);
    out << "// comment\n{\"engine\": {\"rounds\": 3, \"strategy\": \"fedavg\"}}\n";
  }
  const auto c = load_config(path, {"engine.strategy=fedqp", "seeds=[5,6]"});
  CHECK(c.engine.num_rounds == 3);
  CHECK(c.engine.strategy == Strategy::fedqp);
  CHECK(c.seeds == std::vector<std::uint64_t>{5, 6});
  CHECK_THROWS_AS(load_config(path, {"engine.nope=1"}), ValidationError);
  CHECK_THROWS_AS(load_config(path, {"noequals"}), ValidationError);
  CHECK_THROWS_AS(load_config((dir / "missing.json").string()), ValidationError);
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_config(path), ValidationError);
}

TEST_CASE("config hash ignores seeds and output_dir only") {
  RunConfig a;
  RunConfig b = a;
  b.seeds = {9, 10};
  b.output_dir = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  b.engine.mutation.alpha = 0.5;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
}
