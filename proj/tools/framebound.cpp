// framebound: batch runner for frame-bound estimates.
//   framebound run <config.json> [--out DIR] [--threads N]
//   framebound scenario <name> [--emit-config] [--out DIR] [--threads N]

#include "framebound/config.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace fb = framebound;

namespace {

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const fb::ConfigError& ex) {
    std::cerr << "framebound: config-error: " << ex.what() << "\n";
    return fb::kConfigError;
  } catch (const fb::EnumerationLimit& ex) {
    std::cerr << "framebound: enumeration-limit: " << ex.what() << "\n";
    return 1;
  } catch (const std::exception& ex) {
    std::cerr << "framebound: internal-error: " << ex.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frame-bound estimates for generalized translation-invariant systems"};
  app.require_subcommand(1);

  std::string config_path, scenario_name, out_dir;
  unsigned threads = 0;
  bool emit = false;

  auto* run = app.add_subcommand("run", "Run a JSON configuration");
  run->add_option("config", config_path, "Configuration file")->required();
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--threads", threads, "Worker threads (default: FRAMEBOUND_THREADS or hardware)");

  auto* scen = app.add_subcommand("scenario", "Run or print a built-in scenario");
  scen->add_option("name", scenario_name, "Scenario name")->required();
  scen->add_flag("--emit-config", emit, "Print the scenario configuration and exit");
  scen->add_option("--out", out_dir, "Output directory");
  scen->add_option("--threads", threads, "Worker threads");

  CLI11_PARSE(app, argc, argv);

  fb::RunOptions opt;
  opt.threads = threads;
  if (!out_dir.empty()) opt.out_dir = out_dir;

  if (*run) return guarded([&] { return fb::run(fb::load_config(config_path), opt, std::cout); });

  return guarded([&]() -> int {
    fb::RunConfig cfg;
    try {
      cfg = fb::scenario(scenario_name);
    } catch (const std::invalid_argument& ex) {
      std::cerr << "framebound: unknown-scenario: " << ex.what() << "\n";
      return fb::kConfigError;
    }
    if (emit) {
      std::cout << cfg.raw.dump(2) << "\n";
      return fb::kOk;
    }
    return fb::run(cfg, opt, std::cout);
  });
}
