#include "fedqp/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "fedqp/errors.hpp"

namespace fedqp {

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw ValidationError("num_classes must be >= 2");
  if (input_dim < 1) throw ValidationError("input_dim must be >= 1");
  if (num_classes > 2 * input_dim) {
    throw ValidationError("num_classes must be <= 2 * input_dim");
  }
  if (samples_per_class < 1) {
    throw ValidationError("samples_per_class must be >= 1");
  }
  if (!(class_separation > 0.0)) {
    throw ValidationError("class_separation must be > 0");
  }
  if (!(noise_std > 0.0)) throw ValidationError("noise_std must be > 0");
}

Vector SyntheticSpec::class_mean(std::size_t c) const {
  Vector mean(input_dim, 0.0);
  const double sign = c < input_dim ? 1.0 : -1.0;
  mean[c % input_dim] = sign * class_separation / std::sqrt(2.0);
  return mean;
}

Dataset generate(const SyntheticSpec& spec, RandomSource& rng) {
  spec.validate();
  std::vector<Vector> means;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    means.push_back(spec.class_mean(c));
  }
  Dataset out;
  out.dim = spec.input_dim;
  const std::size_t n = spec.num_classes * spec.samples_per_class;
  out.features.reserve(n * spec.input_dim);
  out.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % spec.num_classes;
    for (std::size_t k = 0; k < spec.input_dim; ++k) {
      out.features.push_back(means[c][k] + spec.noise_std * rng.normal());
    }
    out.labels.push_back(static_cast<int>(c));
  }
  return out;
}

HoldoutSplit split_holdout(const Dataset& data, double test_fraction,
                           RandomSource& rng) {
  check_consistent(data);
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw ValidationError("test_fraction must lie in [0, 1)");
  }
  int max_label = -1;
  for (int y : data.labels) {
    if (y < 0) throw ValidationError("negative label");
    max_label = std::max(max_label, y);
  }
  std::vector<std::vector<std::size_t>> by_class(
      static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
  }
  std::vector<char> is_test(data.size(), 0);
  for (auto& idx : by_class) {
    rng.shuffle(idx);
    const auto take = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < take; ++k) is_test[idx[k]] = 1;
  }
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < data.size(); ++i) {
    (is_test[i] ? test_idx : train_idx).push_back(i);
  }
  return {data.gather(train_idx), data.gather(test_idx)};
}

std::string to_string(PartitionMode m) {
  return m == PartitionMode::iid ? "iid" : "dirichlet";
}

PartitionMode parse_partition_mode(const std::string& s) {
  if (s == "iid") return PartitionMode::iid;
  if (s == "dirichlet") return PartitionMode::dirichlet;
  throw ValidationError("unknown partition mode '" + s +
                        "' (expected iid or dirichlet)");
}

void PartitionSpec::validate() const {
  if (num_clients < 1) throw ValidationError("num_clients must be >= 1");
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw ValidationError("beta must be finite and > 0");
  }
}

std::vector<std::size_t> ClientPartition::client_sizes() const {
  std::vector<std::size_t> sizes;
  sizes.reserve(assignments.size());
  for (const auto& a : assignments) sizes.push_back(a.size());
  return sizes;
}

namespace {

ClientPartition partition_iid(std::size_t n, std::size_t clients,
                              RandomSource& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  ClientPartition p;
  p.assignments.resize(clients);
  const std::size_t base = n / clients;
  const std::size_t extra = n % clients;
  std::size_t pos = 0;
  for (std::size_t c = 0; c < clients; ++c) {
    const std::size_t take = base + (c < extra ? 1 : 0);
    p.assignments[c].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                            order.begin() + static_cast<std::ptrdiff_t>(pos + take));
    pos += take;
  }
  return p;
}

std::vector<double> dirichlet(std::size_t k, double beta, RandomSource& rng) {
  std::vector<double> logs(k);
  for (auto& v : logs) v = rng.log_gamma_draw(beta);
  const double top = *std::max_element(logs.begin(), logs.end());
  std::vector<double> p(k);
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    p[i] = std::exp(logs[i] - top);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

ClientPartition partition_dirichlet(std::span<const int> labels,
                                    std::size_t clients, double beta,
                                    RandomSource& rng) {
  int max_label = -1;
  for (int y : labels) {
    if (y < 0) throw ValidationError("negative label");
    max_label = std::max(max_label, y);
  }
  std::vector<std::vector<std::size_t>> by_class(
      static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }

  ClientPartition p;
  p.assignments.resize(clients);
  for (auto& idx : by_class) {
    rng.shuffle(idx);
    const auto props = dirichlet(clients, beta, rng);
    const double n_c = static_cast<double>(idx.size());
    double cum = 0.0;
    std::size_t start = 0;
    for (std::size_t c = 0; c < clients; ++c) {
      cum += props[c];
      std::size_t stop =
          c + 1 == clients ? idx.size()
                           : static_cast<std::size_t>(std::llround(cum * n_c));
      stop = std::clamp(stop, start, idx.size());
      auto& dst = p.assignments[c];
      dst.insert(dst.end(), idx.begin() + static_cast<std::ptrdiff_t>(start),
                 idx.begin() + static_cast<std::ptrdiff_t>(stop));
      start = stop;
    }
  }

  // Empty-client repair.
  for (std::size_t c = 0; c < clients; ++c) {
    if (!p.assignments[c].empty()) continue;
    std::size_t largest = 0;
    for (std::size_t k = 1; k < clients; ++k) {
      if (p.assignments[k].size() > p.assignments[largest].size()) largest = k;
    }
    p.assignments[c].push_back(p.assignments[largest].back());
    p.assignments[largest].pop_back();
  }
  return p;
}

}  // namespace

ClientPartition partition(std::span<const int> labels, const PartitionSpec& spec,
                          RandomSource& rng) {
  spec.validate();
  if (labels.size() < spec.num_clients) {
    throw ValidationError("cannot partition " + std::to_string(labels.size()) +
                          " samples across " + std::to_string(spec.num_clients) +
                          " clients");
  }
  ClientPartition p =
      spec.mode == PartitionMode::iid
          ? partition_iid(labels.size(), spec.num_clients, rng)
          : partition_dirichlet(labels, spec.num_clients, spec.beta, rng);
  for (auto& a : p.assignments) std::sort(a.begin(), a.end());
  return p;
}

HeterogeneityReport heterogeneity_report(const ClientPartition& p,
                                         std::span<const int> labels) {
  int max_label = -1;
  for (int y : labels) max_label = std::max(max_label, y);
  const auto num_classes = static_cast<std::size_t>(max_label + 1);

  std::vector<double> global(num_classes, 0.0);
  for (int y : labels) global[static_cast<std::size_t>(y)] += 1.0;
  for (auto& g : global) g /= static_cast<double>(labels.size());

  HeterogeneityReport r;
  r.counts.assign(p.num_clients(), std::vector<std::size_t>(num_classes, 0));
  r.client_divergence.assign(p.num_clients(), 0.0);
  double total = 0.0;
  for (std::size_t c = 0; c < p.num_clients(); ++c) {
    for (std::size_t idx : p.assignments[c]) {
      ++r.counts[c][static_cast<std::size_t>(labels[idx])];
    }
    const double n = static_cast<double>(p.assignments[c].size());
    double tv = 0.0;
    if (n > 0) {
      for (std::size_t k = 0; k < num_classes; ++k) {
        tv += std::abs(static_cast<double>(r.counts[c][k]) / n - global[k]);
      }
    }
    r.client_divergence[c] = 0.5 * tv;
    total += r.client_divergence[c];
  }
  r.mean_divergence =
      p.num_clients() == 0 ? 0.0 : total / static_cast<double>(p.num_clients());
  return r;
}

namespace {

bool parse_row(const std::string& line, std::vector<double>& values) {
  values.clear();
  std::string token;
  auto flush = [&]() -> bool {
    if (token.empty()) return true;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      return false;
    }
    if (used != token.size()) return false;
    values.push_back(v);
    token.clear();
    return true;
  };
  for (char ch : line) {
    if (ch == ',' || ch == ';' || ch == '\t' || ch == ' ' || ch == '\r') {
      if (!flush()) return false;
    } else {
      token.push_back(ch);
    }
  }
  return flush();
}

}  // namespace

Dataset read_delimited(std::istream& in) {
  Dataset out;
  std::string line;
  std::vector<double> values;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const bool ok = parse_row(line, values);
    if (first && !ok) {
      first = false;
      continue;  // header
    }
    first = false;
    if (values.empty()) continue;
    if (!ok || values.size() < 2) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": expected numeric features followed by a label");
    }
    const std::size_t dim = values.size() - 1;
    if (out.dim == 0) out.dim = dim;
    if (dim != out.dim) {
      throw ValidationError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(out.dim) + " features, got " +
                            std::to_string(dim));
    }
    const double label = values.back();
    if (label < 0 || label != std::floor(label)) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": label must be a non-negative integer");
    }
    out.features.insert(out.features.end(), values.begin(), values.end() - 1);
    out.labels.push_back(static_cast<int>(label));
  }
  if (out.size() == 0) throw ValidationError("no samples in delimited input");
  return out;
}

Dataset load_delimited(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  return read_delimited(in);
}

void write_partition(std::ostream& out, const ClientPartition& p) {
  for (std::size_t c = 0; c < p.num_clients(); ++c) {
    out << c << ' ' << p.assignments[c].size() << ':';
    for (std::size_t idx : p.assignments[c]) out << ' ' << idx;
    out << '\n';
  }
}

ClientPartition read_partition(std::istream& in) {
  ClientPartition p;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::size_t client = 0, count = 0;
    char colon = 0;
    if (!(ss >> client >> count >> colon) || colon != ':' ||
        client != p.num_clients()) {
      throw ValidationError("malformed partition line: " + line);
    }
    std::vector<std::size_t> idx(count);
    for (auto& i : idx) {
      if (!(ss >> i)) throw ValidationError("short partition line: " + line);
    }
    p.assignments.push_back(std::move(idx));
  }
  return p;
}

}  // namespace fedqp
