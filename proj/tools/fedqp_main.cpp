#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedqp/config.hpp"
#include "fedqp/errors.hpp"
#include "fedqp/runner.hpp"

namespace {

// Machine-readable failure line on stderr, then a nonzero exit.
int fail(const std::string& kind, const std::string& message) {
  nlohmann::json err{{"error", kind}, {"message", message}};
  std::cerr << err.dump() << "\n";
  return kind == "usage" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator: FedAvg, FedMut and QP-guided "
               "mutation (FedQP)"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string run_id;

  auto* run_cmd = app.add_subcommand("run", "Run every seed of a config");
  run_cmd->add_option("config", config_path, "JSON config file ('-' or "
                      "omitted for defaults)");
  run_cmd->add_option("--set", overrides, "Override a config key: key=value")
      ->take_all();
  run_cmd->add_option("--run-id", run_id, "Output directory name");

  std::string axis;
  std::string values;
  auto* sweep_cmd =
      app.add_subcommand("sweep", "Run a config once per value of one axis");
  sweep_cmd->add_option("config", config_path, "JSON config file");
  sweep_cmd->add_option("--axis", axis,
                        "qp_probability | beta | clients_per_round | strategy")
      ->required();
  sweep_cmd->add_option("--values", values, "Comma-separated values")
      ->required();
  sweep_cmd->add_option("--set", overrides, "Override a config key: key=value")
      ->take_all();
  sweep_cmd->add_option("--run-id", run_id, "Sweep directory name");

  std::string report_dir;
  auto* report_cmd =
      app.add_subcommand("report", "Summarise a run or sweep directory");
  report_cmd->add_option("dir", report_dir, "Run or sweep directory")
      ->required();

  std::string print_path;
  auto* config_cmd = app.add_subcommand(
      "config", "Print the fully resolved config (defaults when no file)");
  config_cmd->add_option("config", print_path, "JSON config file");
  config_cmd->add_option("--set", overrides, "Override a config key")
      ->take_all();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    if (config_path == "-") config_path.clear();
    if (*run_cmd) {
      const auto cfg = fedqp::load_config(config_path, overrides);
      fedqp::RunOptions opts;
      if (!run_id.empty()) opts.run_id = run_id;
      const auto s = fedqp::run(cfg, opts);
      std::cout << fedqp::report(s.run_dir);
      std::cout << "output: " << s.run_dir.string() << "\n";
    } else if (*sweep_cmd) {
      const auto cfg = fedqp::load_config(config_path, overrides);
      fedqp::SweepSpec spec{fedqp::parse_sweep_axis(axis),
                            fedqp::split_values(values)};
      std::optional<std::string> id;
      if (!run_id.empty()) id = run_id;
      const auto r = fedqp::sweep(cfg, spec, id);
      std::cout << fedqp::report(r.sweep_dir);
      std::cout << "output: " << r.sweep_dir.string() << "\n";
    } else if (*report_cmd) {
      std::cout << fedqp::report(report_dir);
    } else if (*config_cmd) {
      if (print_path == "-") print_path.clear();
      const auto cfg = fedqp::load_config(print_path, overrides);
      std::cout << fedqp::to_json(cfg).dump(2) << "\n";
    }
  } catch (const fedqp::ValidationError& e) {
    return fail("invalid", e.what());
  } catch (const fedqp::ShapeError& e) {
    return fail("shape", e.what());
  } catch (const std::exception& e) {
    return fail("runtime", e.what());
  }
  return 0;
}
