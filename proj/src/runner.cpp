#include "fedqp/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "fedqp/errors.hpp"

namespace fedqp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return json::parse(in);
}

}  // namespace

std::vector<std::string> metrics_names(const std::vector<std::uint64_t>& seeds) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto repeats = static_cast<std::size_t>(
        std::count(seeds.begin(), seeds.begin() + static_cast<std::ptrdiff_t>(i), seeds[i]));
    std::string name = "metrics-" + std::to_string(seeds[i]);
    if (repeats > 0) name += "-" + std::to_string(repeats);
    names.push_back(name + ".csv");
  }
  return names;
}


FederatedData prepare_data(const RunConfig& cfg, std::uint64_t seed) {
  const RandomSource root(seed, "data");
  Dataset all;
  if (cfg.data.source == "csv") {
    all = load_delimited(cfg.data.csv_path);
  } else {
    auto rng = root.derive("generate");
    all = generate(cfg.data.synthetic, rng);
  }
  auto split_rng = root.derive("split");
  auto split = split_holdout(all, cfg.data.test_fraction, split_rng);
  auto part_rng = root.derive("partition");
  const PartitionSpec pspec{cfg.engine.num_devices, cfg.data.partition_mode,
                            cfg.data.beta};
  auto part = partition(split.train.labels, pspec, part_rng);
  return {std::move(split.train), std::move(split.test), std::move(part)};
}

EngineConfig engine_for(const RunConfig& cfg, std::uint64_t seed,
                        const FederatedData& data) {
  EngineConfig e = cfg.engine;
  e.seed = seed;
  e.model.input_dim = data.train.dim;
  int max_label = 1;
  for (int y : data.train.labels) max_label = std::max(max_label, y);
  for (int y : data.test.labels) max_label = std::max(max_label, y);
  e.model.num_classes = static_cast<std::size_t>(max_label + 1);
  return e;
}

void write_metrics(std::ostream& out, const std::vector<RoundMetrics>& log,
                   Strategy strategy, const std::string& hash,
                   std::uint64_t seed) {
  out << "# fedqp metrics\n";
  out << "# config_hash=" << hash << "\n";
  out << "# seed=" << seed << "\n";
  out << "round,strategy,accuracy,loss,grad_norm,qp_activations,wall_ms\n";
  for (const auto& m : log) {
    out << m.round << ',' << to_string(strategy) << ','
        << fmt_double(m.test_accuracy) << ',' << fmt_double(m.mean_train_loss)
        << ',' << fmt_double(m.global_grad_norm) << ',' << m.qp_activations
        << ',' << m.wall_ms << '\n';
  }
}

MetricsFile read_metrics(std::istream& in) {
  MetricsFile f;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# config_hash=", 0) == 0) f.config_hash = line.substr(14);
      if (line.rfind("# seed=", 0) == 0) f.seed = std::stoull(line.substr(7));
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) {
      throw ValidationError("malformed metrics row: " + line);
    }
    RoundMetrics m;
    m.round = std::stoull(cells[0]);
    f.strategy.push_back(cells[1]);
    m.test_accuracy = std::stod(cells[2]);
    m.mean_train_loss = std::stod(cells[3]);
    m.global_grad_norm = std::stod(cells[4]);
    m.qp_activations = std::stoull(cells[5]);
    m.wall_ms = std::stoll(cells[6]);
    f.rows.push_back(m);
  }
  return f;
}

MetricsFile load_metrics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return read_metrics(in);
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

namespace {

json summary_json(const RunSummary& s) {
  return json{{"config_hash", s.config_hash},
              {"seeds", s.seeds},
              {"final_accuracy", s.final_accuracy},
              {"mean_accuracy", s.mean_accuracy},
              {"std_accuracy", s.std_accuracy},
              {"mean_divergence", s.mean_divergence},
              {"mean_qp_activations", s.mean_qp_activations}};
}

// Per-round mean/std across seeds, for plotting learning curves.
std::string curve_csv(const std::vector<std::vector<RoundMetrics>>& logs) {
  std::ostringstream out;
  out << "round,mean_accuracy,std_accuracy,mean_loss,mean_qp_activations\n";
  const std::size_t rounds = logs.empty() ? 0 : logs.front().size();
  for (std::size_t r = 0; r < rounds; ++r) {
    std::vector<double> acc, loss, act;
    for (const auto& log : logs) {
      acc.push_back(log[r].test_accuracy);
      loss.push_back(log[r].mean_train_loss);
      act.push_back(static_cast<double>(log[r].qp_activations));
    }
    const auto [ma, sa] = mean_std(acc);
    out << logs.front()[r].round << ',' << fmt_double(ma) << ','
        << fmt_double(sa) << ',' << fmt_double(mean_std(loss).first) << ','
        << fmt_double(mean_std(act).first) << '\n';
  }
  return out.str();
}

RunSummary summarize_logs(const std::vector<std::uint64_t>& seeds,
                          const std::vector<std::vector<RoundMetrics>>& logs) {
  RunSummary s;
  s.seeds = seeds;
  double act_sum = 0.0;
  std::size_t act_n = 0;
  for (const auto& log : logs) {
    s.final_accuracy.push_back(log.empty() ? 0.0 : log.back().test_accuracy);
    for (const auto& m : log) {
      act_sum += static_cast<double>(m.qp_activations);
      ++act_n;
    }
  }
  std::tie(s.mean_accuracy, s.std_accuracy) = mean_std(s.final_accuracy);
  s.mean_qp_activations = act_n == 0 ? 0.0 : act_sum / static_cast<double>(act_n);
  return s;
}

}  // namespace

RunSummary run(const RunConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  const json resolved = to_json(cfg);
  const std::string hash = config_hash(resolved);
  const std::string run_id = opts.run_id.value_or(hash + "-" + utc_timestamp());
  const fs::path dir = fs::path(cfg.output_dir) / run_id;
  fs::create_directories(dir);

  const auto names = metrics_names(cfg.seeds);
  std::vector<std::vector<RoundMetrics>> logs;
  std::vector<double> divergence;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    const std::uint64_t seed = cfg.seeds[i];
    const auto data = prepare_data(cfg, seed);
    divergence.push_back(
        heterogeneity_report(data.partition, data.train.labels).mean_divergence);
    {
      std::ofstream part(dir / ("partition-" + std::to_string(seed) + ".txt"));
      write_partition(part, data.partition);
    }
    const auto engine = engine_for(cfg, seed, data);
    auto log = run_experiment(engine, data);
    std::ofstream out(dir / names[i], std::ios::binary);
    write_metrics(out, log, cfg.engine.strategy, hash, seed);
    logs.push_back(std::move(log));
  }

  RunSummary s = summarize_logs(cfg.seeds, logs);
  s.run_dir = dir;
  s.config_hash = hash;
  s.mean_divergence = mean_std(divergence).first;

  json manifest{{"run_id", run_id},
                {"config_hash", hash},
                {"config", resolved},
                {"divergence", divergence}};
  for (const auto& [k, v] : opts.manifest_extra.items()) manifest[k] = v;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  write_text(dir / "curve.csv", curve_csv(logs));
  write_text(dir / "summary.json", summary_json(s).dump(2) + "\n");
  return s;
}

RunSummary summarize_run_dir(const fs::path& run_dir) {
  const json manifest = read_json(run_dir / "manifest.json");
  const auto cfg = from_json(manifest.at("config"));
  std::vector<std::vector<RoundMetrics>> logs;
  for (const auto& name : metrics_names(cfg.seeds)) {
    logs.push_back(load_metrics(run_dir / name).rows);
  }
  RunSummary s = summarize_logs(cfg.seeds, logs);
  s.run_dir = run_dir;
  s.config_hash = manifest.at("config_hash").get<std::string>();
  s.mean_divergence =
      mean_std(manifest.at("divergence").get<std::vector<double>>()).first;
  return s;
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::qp_probability: return "qp_probability";
    case SweepAxis::beta: return "beta";
    case SweepAxis::clients_per_round: return "clients_per_round";
    case SweepAxis::strategy: return "strategy";
  }
  return "?";
}

SweepAxis parse_sweep_axis(const std::string& s) {
  for (auto a : {SweepAxis::qp_probability, SweepAxis::beta,
                 SweepAxis::clients_per_round, SweepAxis::strategy}) {
    if (to_string(a) == s) return a;
  }
  throw ValidationError("unknown sweep axis '" + s +
                        "' (expected qp_probability, beta, clients_per_round "
                        "or strategy)");
}

std::string axis_key(SweepAxis a) {
  switch (a) {
    case SweepAxis::qp_probability: return "mutation.qp_probability";
    case SweepAxis::beta: return "data.partition.beta";
    case SweepAxis::clients_per_round: return "engine.clients_per_round";
    case SweepAxis::strategy: return "engine.strategy";
  }
  return "";
}

std::vector<std::string> split_values(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

namespace {

json erase_key(json j, const std::string& dotted) {
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const auto part = dotted.substr(start, dot - start);
    if (dot == std::string::npos) {
      node->erase(part);
      break;
    }
    node = &node->at(part);
    start = dot + 1;
  }
  return j;
}

}  // namespace

SweepResult sweep(const RunConfig& base, const SweepSpec& spec,
                  const std::optional<std::string>& sweep_id) {
  base.validate();
  if (spec.values.empty()) throw ValidationError("sweep: no values given");
  const std::string key = axis_key(spec.axis);
  const json base_json = to_json(base);

  SweepResult result;
  result.base_hash = config_hash(erase_key(base_json, key));
  const std::string id = sweep_id.value_or(
      "sweep-" + to_string(spec.axis) + "-" + result.base_hash + "-" +
      utc_timestamp());
  result.sweep_dir = fs::path(base.output_dir) / id;
  fs::create_directories(result.sweep_dir);

  // Parse every point before running any.
  std::vector<RunConfig> points;
  for (const auto& value : spec.values) {
    json j = base_json;
    apply_override(j, key + "=" + value);
    RunConfig point = from_json(j);
    point.output_dir = result.sweep_dir.string();
    if (config_hash(erase_key(to_json(point), key)) != result.base_hash) {
      throw std::logic_error("sweep point changed a non-axis parameter");
    }
    points.push_back(std::move(point));
  }

  std::ostringstream table;
  table << "axis,value,mean_accuracy,std_accuracy,mean_qp_activations,"
           "mean_divergence,config_hash,base_hash,run_dir\n";
  json runs = json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    RunOptions opts;
    opts.run_id = to_string(spec.axis) + "=" + spec.values[i];
    opts.manifest_extra = {{"sweep_axis", to_string(spec.axis)},
                           {"sweep_value", spec.values[i]},
                           {"base_hash", result.base_hash}};
    auto s = run(points[i], opts);
    table << to_string(spec.axis) << ',' << spec.values[i] << ','
          << fmt_double(s.mean_accuracy) << ',' << fmt_double(s.std_accuracy)
          << ',' << fmt_double(s.mean_qp_activations) << ','
          << fmt_double(s.mean_divergence) << ',' << s.config_hash << ','
          << result.base_hash << ',' << *opts.run_id << '\n';
    runs.push_back({{"value", spec.values[i]}, {"run_dir", *opts.run_id}});
    result.runs.push_back(std::move(s));
  }
  write_text(result.sweep_dir / "comparison.csv", table.str());
  write_text(result.sweep_dir / "sweep.json",
             json{{"axis", to_string(spec.axis)},
                  {"key", key},
                  {"base_hash", result.base_hash},
                  {"runs", runs}}
                     .dump(2) +
                 "\n");
  return result;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ValidationError("spearman: need two equal-length series of >= 2");
  }
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double mx = mean_std(rx).first;
  const double my = mean_std(ry).first;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::string report(const fs::path& dir) {
  std::ostringstream out;
  if (fs::exists(dir / "sweep.json")) {
    const json sw = read_json(dir / "sweep.json");
    const auto axis = sw.at("axis").get<std::string>();
    out << "sweep over " << axis << " (base_hash " 
        << sw.at("base_hash").get<std::string>() << ")\n";
    out << axis << "\tmean_acc\tstd_acc\tqp_activations\tdivergence\n";
    std::vector<double> xs, acts;
    bool numeric = true;
    for (const auto& r : sw.at("runs")) {
      const auto value = r.at("value").get<std::string>();
      const auto s = summarize_run_dir(dir / r.at("run_dir").get<std::string>());
      char line[256];
      std::snprintf(line, sizeof(line), "%s\t%.4f\t%.4f\t%.3f\t%.4f\n",
                    value.c_str(), s.mean_accuracy, s.std_accuracy,
                    s.mean_qp_activations, s.mean_divergence);
      out << line;
      try {
        std::size_t used = 0;
        xs.push_back(std::stod(value, &used));
        numeric = numeric && used == value.size();
      } catch (const std::exception&) {
        numeric = false;
      }
      acts.push_back(s.mean_qp_activations);
    }
    if (numeric && xs.size() >= 2) {
      char line[128];
      std::snprintf(line, sizeof(line),
                    "spearman(%s, qp_activations) = %.4f\n", axis.c_str(),
                    spearman(xs, acts));
      out << line;
    }
    return out.str();
  }
  if (!fs::exists(dir / "manifest.json")) {
    throw ValidationError(dir.string() + " is not a run or sweep directory");
  }
  const auto s = summarize_run_dir(dir);
  out << "run " << dir.filename().string() << " (config_hash " << s.config_hash
      << ")\n";
  out << "seed\tfinal_accuracy\n";
  for (std::size_t i = 0; i < s.seeds.size(); ++i) {
    char line[96];
    std::snprintf(line, sizeof(line), "%llu\t%.4f\n",
                  static_cast<unsigned long long>(s.seeds[i]),
                  s.final_accuracy[i]);
    out << line;
  }
  char line[192];
  std::snprintf(line, sizeof(line),
                "mean %.4f +- %.4f over %zu seed(s); qp_activations/round "
                "%.3f; divergence %.4f\n",
                s.mean_accuracy, s.std_accuracy, s.seeds.size(),
                s.mean_qp_activations, s.mean_divergence);
  out << line;
  return out.str();
}

}  // namespace fedqp
