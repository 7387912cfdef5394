// dipa: train, evaluate and inspect distilled preconditioners.

#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "dipa/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Distilled preconditioners for PnP and RED solvers"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  app.add_option("-c,--config", config, "JSON experiment config")->required()->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Override the experiment seed");
  auto* out_opt = app.add_option("-o,--out", out, "Override the output directory");

  using Command = std::function<int(const dipa::CommandOptions&, std::ostream&, std::ostream&)>;
  const std::map<std::string, std::pair<const char*, Command>> commands{
      {"train", {"Distill a preconditioner and write po.bin, history.csv, summary.csv", dipa::cmd_train}},
      {"reconstruct", {"Reconstruct one image with the configured preconditioner", dipa::cmd_reconstruct}},
      {"benchmark", {"Compare preconditioners on the held-out images", dipa::cmd_benchmark}},
      {"crossval", {"Evaluate a trained preconditioner under PnP and RED", dipa::cmd_crossval}},
      {"linearize", {"Finite-difference Jacobian of the configured preconditioner", dipa::cmd_linearize}},
      {"gen-data", {"Write the synthetic dataset as PGM files", dipa::cmd_gen_data}},
  };
  for (const auto& [name, entry] : commands) app.add_subcommand(name, entry.first);

  // --help exits 0; every other parse error is a usage error (1).
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  dipa::CommandOptions options;
  options.config = config;
  if (*seed_opt) options.seed = seed;
  if (*out_opt) options.out = out;

  for (const auto& [name, entry] : commands) {
    if (app.got_subcommand(name)) return entry.second(options, std::cout, std::cerr);
  }
  return 1;
}
