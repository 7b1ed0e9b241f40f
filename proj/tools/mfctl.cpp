// mfctl: command-line front end for the MetaFormer token-mixer toolkit.
//
//   mfctl <command> [--config PATH] [--seed N] [--out DIR] [--threads N]
//
// Commands: flops, params, train, eval, rank, infer.
// Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric abort.

#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "mf/cli/commands.hpp"
#include "mf/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"MetaFormer token-mixer toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::int64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;

  const std::pair<const char*, const char*> commands[] = {
      {"flops", "Per-stage FLOPs and parameter formulas for every mixer (CSV + SVG)"},
      {"params", "Parameter counts of each configured signature"},
      {"train", "Train a model and write checkpoint and log"},
      {"eval", "Evaluate a checkpoint and write per-case scores"},
      {"rank", "Rank submissions from per-case scores or win counts"},
      {"infer", "Sliding-window segmentation of one image"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "INI config file");
    sub->add_option("--seed", seed, "Seed for every random stream");
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--threads", threads, "OpenMP thread count");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : mf::cli::kConfigError;
  }

  mf::cli::RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = mf::cli::RunConfig::load(config_path);
    if (seed) {
      if (*seed < 0) throw mf::ConfigError("--seed must be non-negative");
      cfg.run.seed = static_cast<std::uint64_t>(*seed);
      cfg.train.seed = cfg.run.seed;
    }
    if (out) cfg.run.out = *out;
    if (threads) cfg.run.threads = *threads;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return mf::cli::exit_code_for(e);
  }
  return mf::cli::run_command(app.get_subcommands().front()->get_name(), cfg, std::cout, std::cerr);
}
