#include "fedqp/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <thread>

#include "fedqp/errors.hpp"

namespace fedqp {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::fedavg: return "fedavg";
    case Strategy::fedmut: return "fedmut";
    case Strategy::fedqp: return "fedqp";
  }
  return "?";
}

Strategy parse_strategy(const std::string& s) {
  if (s == "fedavg") return Strategy::fedavg;
  if (s == "fedmut") return Strategy::fedmut;
  if (s == "fedqp") return Strategy::fedqp;
  throw ValidationError("unknown strategy '" + s +
                        "' (expected fedavg, fedmut or fedqp)");
}

std::string to_string(AggregationWeighting w) {
  return w == AggregationWeighting::uniform ? "uniform" : "by_sample_count";
}

AggregationWeighting parse_aggregation_weighting(const std::string& s) {
  if (s == "uniform") return AggregationWeighting::uniform;
  if (s == "by_sample_count") return AggregationWeighting::by_sample_count;
  throw ValidationError("unknown aggregation weighting '" + s +
                        "' (expected uniform or by_sample_count)");
}

void EngineConfig::validate() const {
  if (num_devices < 1) throw ValidationError("num_devices must be >= 1");
  if (clients_per_round < 1 || clients_per_round > num_devices) {
    throw ValidationError("clients_per_round must lie in [1, num_devices]");
  }
  if (workers < 1) throw ValidationError("workers must be >= 1");
  mutation.validate();
  train.validate();
  model.validate();
}

std::vector<std::size_t> select_clients(std::size_t num_devices,
                                        std::size_t k, RandomSource& rng) {
  if (k > num_devices) {
    throw ValidationError("cannot select " + std::to_string(k) +
                          " clients from " + std::to_string(num_devices));
  }
  std::vector<std::size_t> ids(num_devices);
  for (std::size_t i = 0; i < num_devices; ++i) ids[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + rng.uniform_index(num_devices - i);
    std::swap(ids[i], ids[j]);
  }
  ids.resize(k);
  std::sort(ids.begin(), ids.end());
  return ids;
}

LayeredParams aggregate(const std::vector<LayeredParams>& models,
                        const std::vector<double>& weights) {
  if (models.empty()) throw ValidationError("aggregate: no models");
  if (weights.size() != models.size()) {
    throw ValidationError("aggregate: one weight per model required");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ValidationError("aggregate: weights must be finite and >= 0");
    }
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("aggregate: weights sum to zero");
  for (const auto& m : models) require_compatible(models.front(), m, "aggregate");

  // Anchored form: anchor + sum_i w_i (x_i - anchor). Identical inputs and
  // single-contributor weightings reproduce the input exactly.
  std::size_t anchor = 0;
  while (weights[anchor] == 0.0) ++anchor;
  LayeredParams out = models[anchor];
  for (std::size_t i = 0; i < models.size(); ++i) {
    const double w = weights[i] / total;
    if (i == anchor || w == 0.0) continue;
    for (std::size_t l = 0; l < out.num_layers(); ++l) {
      const auto& x = models[i][l].data;
      const auto& a = models[anchor][l].data;
      auto& o = out[l].data;
      for (std::size_t k = 0; k < o.size(); ++k) o[k] += w * (x[k] - a[k]);
    }
  }
  return out;
}

LayeredParams compute_global_gradient(const LayeredParams& w_new,
                                      const LayeredParams& w_old) {
  return subtract(w_new, w_old);
}

ServerState init_state(const EngineConfig& cfg) {
  cfg.validate();
  RandomSource rng(cfg.seed, "init");
  ServerState s;
  s.current = init_params(cfg.model, rng);
  s.previous = s.current;
  if (cfg.strategy != Strategy::fedavg) {
    s.pool.assign(cfg.clients_per_round, s.current);
  }
  return s;
}

namespace {

template <typename Fn>
void for_each_slot(std::size_t n, std::size_t workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t t = std::min(workers, n);
  std::vector<std::exception_ptr> errors(t);
  std::vector<std::thread> threads;
  threads.reserve(t);
  for (std::size_t w = 0; w < t; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += t) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

void run_round(ServerState& state, const EngineConfig& cfg,
               const FederatedData& data) {
  cfg.validate();
  if (data.partition.num_clients() != cfg.num_devices) {
    throw ValidationError("partition has " +
                          std::to_string(data.partition.num_clients()) +
                          " clients but num_devices is " +
                          std::to_string(cfg.num_devices));
  }
  const auto started = std::chrono::steady_clock::now();
  const std::size_t round = state.round + 1;
  const std::size_t K = cfg.clients_per_round;
  const bool mutating = cfg.strategy != Strategy::fedavg;
  if (mutating && state.pool.size() != K) {
    throw ValidationError("server pool must hold clients_per_round models");
  }
  const RandomSource round_rng =
      RandomSource(cfg.seed, "round").derive(std::to_string(round));

  // Step 1: selection and dispatch.
  auto select_rng = round_rng.derive("select");
  const auto selected = select_clients(cfg.num_devices, K, select_rng);
  std::vector<std::size_t> pool_slot(K);
  for (std::size_t i = 0; i < K; ++i) pool_slot[i] = i;
  if (mutating) {
    auto pair_rng = round_rng.derive("pairing");
    pair_rng.shuffle(pool_slot);
  }

  // Step 2: local training.
  std::vector<LayeredParams> local(K);
  std::vector<double> losses(K, 0.0);
  for_each_slot(K, cfg.workers, [&](std::size_t i) {
    const LayeredParams& dispatched =
        mutating ? state.pool[pool_slot[i]] : state.current;
    auto rng = round_rng.derive("train").derive(std::to_string(i));
    auto res = local_train(cfg.model, dispatched, data.train,
                           data.partition.assignments[selected[i]], cfg.train,
                           rng);
    local[i] = std::move(res.params);
    losses[i] = res.mean_loss;
  });

  // Step 3: aggregation.
  std::vector<double> weights(K, 1.0);
  if (cfg.aggregation == AggregationWeighting::by_sample_count) {
    for (std::size_t i = 0; i < K; ++i) {
      weights[i] = static_cast<double>(
          data.partition.assignments[selected[i]].size());
    }
  }
  LayeredParams next = aggregate(local, weights);
  if (!all_finite(next)) {
    throw std::runtime_error("global model diverged (non-finite) in round " +
                             std::to_string(round));
  }

  // Step 4: global gradient.
  const LayeredParams grad = compute_global_gradient(next, state.current);

  // Steps 5-7: rebuild the mutated pool.
  std::size_t activations = 0;
  if (mutating) {
    MutationConfig mcfg = cfg.mutation;
    if (cfg.strategy == Strategy::fedmut) mcfg.qp_probability = 0.0;
    std::vector<std::size_t> slot_activations(K, 0);
    for_each_slot(K, cfg.workers, [&](std::size_t j) {
      const LayeredParams& base =
          mcfg.base == MutationBase::global_model ? next : local[j];
      auto rng = round_rng.derive("mutate").derive(std::to_string(j));
      auto outcome = mutate_model(base, grad, mcfg, rng);
      state.pool[j] = std::move(outcome.model);
      slot_activations[j] = outcome.qp_activations;
    });
    for (std::size_t a : slot_activations) activations += a;
  }

  // Step 8: model update.
  state.previous = std::move(state.current);
  state.current = std::move(next);
  state.round = round;

  RoundMetrics m;
  m.round = round;
  m.test_accuracy = evaluate(cfg.model, state.current, data.test);
  double loss_sum = 0.0;
  for (double l : losses) loss_sum += l;
  m.mean_train_loss = loss_sum / static_cast<double>(K);
  m.global_grad_norm = std::sqrt(norm_sq(grad));
  m.qp_activations = activations;
  if (cfg.record_wall_time) {
    m.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - started)
                    .count();
  }
  state.metrics.push_back(m);
}

ServerState run_experiment_state(const EngineConfig& cfg,
                                 const FederatedData& data) {
  ServerState state = init_state(cfg);
  for (std::size_t r = 0; r < cfg.num_rounds; ++r) run_round(state, cfg, data);
  return state;
}

std::vector<RoundMetrics> run_experiment(const EngineConfig& cfg,
                                         const FederatedData& data) {
  return run_experiment_state(cfg, data).metrics;
}

}  // namespace fedqp
