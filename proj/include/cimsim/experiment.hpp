#pragma once

// Experiment configuration, dispatch and artifact emission.

#include "cimsim/an_code.hpp"
#include "cimsim/crossbar.hpp"
#include "cimsim/io.hpp"
#include "cimsim/mnist.hpp"
#include "cimsim/nonideality.hpp"
#include "cimsim/training.hpp"
#include "cimsim/variation.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cimsim {

inline constexpr int kManifestSchemaVersion = 1;

enum class ExperimentKind { train, evaluate, gaussianity, crossbar_check, noise_calibrate, ecc_campaign };
std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& name);

struct DatasetConfig {
  std::filesystem::path path = "data/mnist";
  std::optional<std::size_t> train_subset;
  std::optional<std::size_t> test_subset;
};

struct GaussianityConfig {
  std::size_t inits = 3;
  std::size_t n_samples = 10000;
  double sigma = 0.04;
  int bins = kDefaultBins;
  std::size_t test_index = 0;
  std::vector<std::filesystem::path> models;  // empty: train one per init
};

struct EvaluateConfig {
  std::filesystem::path model;  // empty: train one first
  double sigma = 0.04;
  std::size_t trials = 100;
};

struct CrossbarCheckConfig {
  std::size_t matrices = 50;
  Eigen::Index max_dim = 300;
  int weight_bits = 8;
  int adc_bits = 8;
};

struct CalibrateConfig {
  std::size_t n = 1'000'000;
  double resistance = 1e4;  // ohms, thermal sampler
  double current = 1e-6;    // amperes, shot sampler
};

struct EccConfig {
  ANCodeConfig code;
  std::optional<int> flip_positions;  // default: every codeword bit
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::train;
  bool kind_given = false;  // the config file named a kind
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  unsigned threads = 1;

  NetworkSpec network = NetworkSpec::mlp(kMnistPixels, 128, 10, LayerKind::relu);
  TrainConfig train;
  NoiseModelConfig noise;
  CrossbarConfig crossbar;
  EccConfig ecc;
  DatasetConfig dataset;
  GaussianityConfig gaussianity;
  EvaluateConfig evaluate;
  CrossbarCheckConfig crossbar_check;
  CalibrateConfig calibrate;

  /// Checks every section the experiment kind uses.
  void validate() const;

  /// Unknown keys are rejected.
  static ExperimentConfig from_json(const std::string& text);
  /// Canonical form without output_dir and threads; hashed into the manifest.
  std::string canonical_json() const;
  std::uint64_t hash() const { return fnv1a64(canonical_json()); }
};

struct Report {
  std::vector<std::pair<std::string, CsvTable>> tables;
  std::vector<std::pair<std::string, std::string>> files;  // name, contents
  std::map<std::string, double> metrics;
};

struct Datasets {
  DatasetHandle train;
  DatasetHandle test;
};

/// MNIST from resolve_mnist_dir(cfg.dataset.path) with the configured subsets.
Datasets load_datasets(const ExperimentConfig& cfg);

/// Model number `index` trained from the master seed.
Parameters train_model(const ExperimentConfig& cfg, const DatasetHandle& train, std::uint64_t index,
                       const TrainObservers& observers = {});

Report run_train(const ExperimentConfig& cfg, const Datasets& data);
Report run_evaluate(const ExperimentConfig& cfg, const Datasets& data);
Report run_gaussianity(const ExperimentConfig& cfg, const Datasets& data);
Report run_crossbar_check(const ExperimentConfig& cfg);
Report run_noise_calibrate(const ExperimentConfig& cfg);
Report run_ecc_campaign(const ExperimentConfig& cfg);

/// Validates, runs and writes reports plus manifest.json into output_dir.
/// Returns 0 on success. An invalid config creates nothing; a failure after
/// the output directory exists is recorded in the manifest.
int run_experiment(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace cimsim
