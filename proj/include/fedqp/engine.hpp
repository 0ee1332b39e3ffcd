#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fedqp/data.hpp"
#include "fedqp/layered_params.hpp"
#include "fedqp/model.hpp"
#include "fedqp/mutation.hpp"
#include "fedqp/random.hpp"

namespace fedqp {

enum class Strategy { fedavg, fedmut, fedqp };
std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& s);

enum class AggregationWeighting { uniform, by_sample_count };
std::string to_string(AggregationWeighting w);
AggregationWeighting parse_aggregation_weighting(const std::string& s);

struct EngineConfig {
  std::size_t num_rounds = 100;
  std::size_t num_devices = 100;
  std::size_t clients_per_round = 10;
  Strategy strategy = Strategy::fedqp;
  MutationConfig mutation;
  TrainConfig train;
  ModelSpec model;
  std::uint64_t seed = 1;
  AggregationWeighting aggregation = AggregationWeighting::uniform;
  /// When false the wall_ms column is written as 0 so metrics files stay
  /// byte-identical across runs.
  bool record_wall_time = false;
  /// Worker threads for the K local trainings of a round. Results do not
  /// depend on this value.
  std::size_t workers = 1;

  void validate() const;
  bool operator==(const EngineConfig&) const = default;
};

/// Training data as seen by the server: the pooled training rows, the
/// per-device index sets into them, and a held-out test set.
struct FederatedData {
  Dataset train;
  Dataset test;
  ClientPartition partition;
};

struct RoundMetrics {
  std::size_t round = 0;
  double test_accuracy = 0.0;
  double mean_train_loss = 0.0;
  double global_grad_norm = 0.0;
  std::size_t qp_activations = 0;
  std::int64_t wall_ms = 0;

  bool operator==(const RoundMetrics&) const = default;
};

struct ServerState {
  std::size_t round = 0;
  LayeredParams current;
  LayeredParams previous;
  /// K mutated models; empty for fedavg.
  std::vector<LayeredParams> pool;
  std::vector<RoundMetrics> metrics;
};

/// K distinct ids drawn uniformly without replacement from [0, D), sorted.
std::vector<std::size_t> select_clients(std::size_t num_devices,
                                        std::size_t k, RandomSource& rng);

/// Weighted mean with weights normalised to sum to one; models are summed in
/// index order.
LayeredParams aggregate(const std::vector<LayeredParams>& models,
                        const std::vector<double>& weights);

/// Round-over-round displacement of the global model, w_new - w_old.
LayeredParams compute_global_gradient(const LayeredParams& w_new,
                                      const LayeredParams& w_old);

/// Round 0 state: global model from init_params, previous = current, and for
/// mutation strategies K pool entries equal to the initial model.
ServerState init_state(const EngineConfig& cfg);

/// One round of the protocol:
///   1. select K clients; pair pool slot perm[i] with the i-th selected id
///   2. train each dispatched model on its client's data
///   3. aggregate into the new global model
///   4. global gradient = new - previous round's model
///   5-7. (fedmut/fedqp) rebuild the pool: mutate, QP-correct with
///        probability p (0 for fedmut), add to the base model
///   8. previous <- current, current <- new
/// RNG streams are keyed by round and slot, so the result does not depend
/// on cfg.workers.
void run_round(ServerState& state, const EngineConfig& cfg,
               const FederatedData& data);

/// Runs cfg.num_rounds rounds from init_state and returns the metrics log.
std::vector<RoundMetrics> run_experiment(const EngineConfig& cfg,
                                         const FederatedData& data);

/// Same, but also hands back the final state.
ServerState run_experiment_state(const EngineConfig& cfg,
                                 const FederatedData& data);

}  // namespace fedqp
