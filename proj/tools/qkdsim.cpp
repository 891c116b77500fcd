// qkdsim: batch front-end for the link simulator.
//
//   qkdsim --config run.ini [--mode sweep_db] [--seed 1] [--out results.csv]
//          [--duration-s 3600] [--slots 100000000] [--direction bidirectional]
//
// Exit status: 0 on success, 2 for an invalid config or command line, 1 when
// the run itself fails.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qkdlink/config.hpp"
#include "qkdlink/experiment.hpp"
#include "qkdlink/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Decoy-state BB84 link simulator"};
  app.set_version_flag("--version", qkdlink::kVersion);

  std::string config_path;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> duration_s;
  std::optional<std::uint64_t> slots;
  std::optional<std::string> direction;

  app.add_option("--config", config_path, "Config file")->required();
  app.add_option("--mode", mode,
                 "sweep_db, fiber_point, stability_run, loss_budget or finite_key");
  app.add_option("--seed", seed, "Random seed (overrides the config)");
  app.add_option("--out", out, "Output CSV path (default results.csv)");
  app.add_option("--duration-s", duration_s, "Acquisition time per point, seconds");
  app.add_option("--slots", slots, "Monte Carlo slots per point; selects the Monte Carlo engine");
  app.add_option("--direction", direction, "unidirectional or bidirectional");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  qkdlink::Config config;
  try {
    config = qkdlink::load_config(config_path);
    if (mode) config.experiment.mode = qkdlink::parse_mode(*mode);
    if (direction) config.experiment.direction = qkdlink::parse_direction(*direction);
    if (seed) config.experiment.seed = *seed;
    if (duration_s) config.experiment.duration_s = *duration_s;
    if (slots) {
      config.experiment.n_slots = *slots;
      config.experiment.engine = qkdlink::EngineKind::MonteCarlo;
    }
    if (out) config.experiment.output_path = *out;
    if (config.experiment.output_path.empty()) config.experiment.output_path = "results.csv";
  } catch (const qkdlink::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "command line: " << e.what() << '\n';
    return 2;
  }

  const auto result = qkdlink::run_experiment(config);
  for (const auto& d : result.diagnostics) std::cerr << d << '\n';
  for (const auto& p : result.written) std::cout << p.string() << '\n';
  return result.exit_code;
}
