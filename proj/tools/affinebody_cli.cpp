// affinebody: simulate, compare, decompose and check.

#include <CLI11.hpp>
#include <iostream>

#include "affinebody/cli.hpp"

namespace cli = affinebody::cli;

namespace {

int load(const std::string& path, cli::ScenarioConfig& config) {
  std::string text;
  try {
    text = cli::read_file(path);
  } catch (const cli::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kIo;
  }
  try {
    config = cli::parse_config(text);
  } catch (const cli::SchemaError& e) {
    std::cerr << path << ": invalid configuration\n";
    for (const auto& v : e.violations())
      std::cerr << "  " << (v.path.empty() ? "<root>" : v.path) << ": " << v.reason << "\n";
    return cli::kUsage;
  }
  return cli::kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Affinely-rigid body simulator"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  app.fallthrough();

  std::string out;
  double h = 0.0;
  std::uint64_t seed = 42;
  bool quiet = false;
  app.add_option("--out", out, "Output path (simulate, compare)");
  app.add_option("--h", h, "Override the integrator step")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Seed for the check suite");
  app.add_flag("-q,--quiet", quiet, "Suppress progress output");

  std::string config_path;
  std::string matrix_arg;
  auto* simulate = app.add_subcommand("simulate", "Integrate a scenario and write a CSV trajectory");
  simulate->add_option("config", config_path, "Scenario JSON file")->required();
  auto* compare = app.add_subcommand("compare", "Run d'Alembert and vakonomic motion side by side");
  compare->add_option("config", config_path, "Scenario JSON file")->required();
  auto* decompose = app.add_subcommand("decompose", "Polar and two-polar factors of a placement");
  decompose->add_option("input", matrix_arg, "JSON file or inline matrix, e.g. [[2,0],[0,3]]")
      ->required();
  auto* check = app.add_subcommand("check", "Run the numerical self-check suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? cli::kOk : cli::kUsage;
  }

  cli::RunOptions opts;
  if (!out.empty()) opts.out = out;
  if (h > 0.0) opts.h = h;
  opts.seed = seed;
  opts.quiet = quiet;
  opts.log = cli::log_level_from_env();

  try {
    if (simulate->parsed() || compare->parsed()) {
      cli::ScenarioConfig config;
      if (const int rc = load(config_path, config); rc != cli::kOk) return rc;
      return simulate->parsed() ? cli::run_simulate(config, opts, std::cout, std::cerr)
                                : cli::run_compare(config, opts, std::cout, std::cerr);
    }
    if (decompose->parsed()) {
      cli::DecomposeInput input;
      try {
        input = cli::parse_decompose_input(matrix_arg);
      } catch (const cli::SchemaError& e) {
        std::cerr << e.what() << "\n";
        return cli::kUsage;
      }
      return cli::run_decompose(input, opts, std::cout, std::cerr);
    }
    if (check->parsed()) return cli::run_check(opts, std::cout, std::cerr);
  } catch (const cli::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kNumerical;
  }
  return cli::kUsage;
}
