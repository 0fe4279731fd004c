// cimsim: run one experiment from a JSON config.
//
//   cimsim gaussianity --config configs/gaussianity.json --seed 7 --out runs/g7

#include "cimsim/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Compute-in-memory variation and fault simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> subset;
  std::optional<unsigned> threads;

  for (const char* name :
       {"train", "evaluate", "gaussianity", "crossbar-check", "noise-calibrate", "ecc-campaign"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed, overrides the config");
    sub->add_option("--out", out, "output directory, overrides the config");
    sub->add_option("--subset", subset, "use the first n train and test images after a seeded shuffle")
        ->check(CLI::PositiveNumber);
    sub->add_option("--threads", threads, "worker threads for Monte-Carlo loops")->check(CLI::PositiveNumber);
  }

  CLI11_PARSE(app, argc, argv);
  const std::string kind = app.get_subcommands().front()->get_name();

  cimsim::ExperimentConfig cfg;
  try {
    const auto requested = cimsim::experiment_kind_from_string(kind);
    if (!config_path.empty()) {
      cfg = cimsim::ExperimentConfig::from_json(cimsim::read_text(config_path));
    }
    if (cfg.kind_given && cfg.kind != requested)
      throw cimsim::ConfigError("config kind '" + cimsim::to_string(cfg.kind) + "' does not match subcommand '" +
                                kind + "'");
    cfg.kind = requested;
  } catch (const std::exception& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  }
  if (seed) cfg.seed = *seed;
  if (!out.empty()) cfg.output_dir = out;
  if (subset) cfg.dataset.train_subset = cfg.dataset.test_subset = *subset;
  if (threads) cfg.threads = *threads;

  return cimsim::run_experiment(cfg, std::cout);
}
