#include "cimsim/training.hpp"

#include "cimsim/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cimsim {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (!(sigma_train >= 0.0) || !std::isfinite(sigma_train))
    throw ConfigError("sigma_train must be finite and >= 0");
}

TrainingDiverged::TrainingDiverged(int epoch, std::size_t iteration, double loss)
    : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ", iteration " +
                         std::to_string(iteration) + " (loss " + std::to_string(loss) + ")"),
      epoch_(epoch),
      iteration_(iteration) {}

namespace {

bool finite(const Gradients& g) {
  return std::all_of(g.dense.begin(), g.dense.end(), [](const DenseParams<double>& p) {
    return p.weight.allFinite() && p.bias.allFinite();
  });
}

Parameters train_loop(const NetworkSpec& net, const Matrix& inputs, std::span<const int> labels,
                      const TrainConfig& cfg, std::optional<Parameters> initial,
                      const TrainObservers& observers, double sigma) {
  cfg.validate();
  if (inputs.rows() == 0) throw std::invalid_argument("training set is empty");
  if (static_cast<std::size_t>(inputs.rows()) != labels.size())
    throw DimensionError("training inputs and labels differ in count");

  Parameters params = initial ? std::move(*initial) : init_parameters(net, derive_seed(cfg.seed, "init"));
  check_parameters(net, params);

  const auto n = static_cast<std::size_t>(inputs.rows());
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const std::uint64_t noise_seed = derive_seed(cfg.seed, "train-noise");
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::vector<Eigen::Index> rows;
  std::vector<int> batch_labels;
  std::size_t iteration = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng = make_rng(derive_seed(cfg.seed, "shuffle"), static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      rows.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                  order.begin() + static_cast<std::ptrdiff_t>(stop));
      batch_labels.clear();
      for (auto r : rows) batch_labels.push_back(labels[static_cast<std::size_t>(r)]);
      const Matrix x = inputs(rows, Eigen::all);

      double loss = 0.0;
      Rng noise_rng = make_rng(noise_seed, iteration);
      Gradients grads = noise_injected_gradient(
          params, sigma, cfg.noise_scale, noise_rng, [&](const Parameters& w) {
            auto lg = loss_and_grad(net, w, x, std::span<const int>(batch_labels));
            loss = lg.loss;
            return std::move(lg.grads);
          });
      if (!std::isfinite(loss) || !finite(grads)) throw TrainingDiverged(epoch, iteration, loss);

      Parameters next = sgd_step(params, grads, cfg.lr);
      if (observers.on_step) observers.on_step(TrainStep{epoch, iteration, loss, params, grads, next});
      params = std::move(next);
      loss_sum += loss;
      ++batches;
      ++iteration;
    }
    if (observers.on_epoch) observers.on_epoch(epoch, params, loss_sum / static_cast<double>(batches));
  }
  return params;
}

std::size_t correct_count(const NetworkSpec& net, const Parameters& params, const Matrix& inputs,
                          std::span<const int> labels) {
  const Matrix logits = forward_batch(net, params, inputs);
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    if (argmax_predict(logits.row(i)) == labels[static_cast<std::size_t>(i)]) ++correct;
  return correct;
}

}  // namespace

Parameters noise_injection_train(const NetworkSpec& net, const Matrix& inputs,
                                 std::span<const int> labels, const TrainConfig& cfg,
                                 std::optional<Parameters> initial,
                                 const TrainObservers& observers) {
  return train_loop(net, inputs, labels, cfg, std::move(initial), observers, cfg.sigma_train);
}

Parameters sgd_train(const NetworkSpec& net, const Matrix& inputs, std::span<const int> labels,
                     const TrainConfig& cfg, std::optional<Parameters> initial,
                     const TrainObservers& observers) {
  return train_loop(net, inputs, labels, cfg, std::move(initial), observers, 0.0);
}

RobustnessReport evaluate_under_variation(const NetworkSpec& net, const Parameters& params,
                                          double sigma_eval, std::size_t n_trials,
                                          const Matrix& inputs, std::span<const int> labels,
                                          std::uint64_t seed, NoiseScale mode, unsigned threads) {
  if (n_trials < 1) throw std::invalid_argument("evaluate_under_variation: n_trials must be >= 1");
  if (inputs.rows() == 0) throw std::invalid_argument("evaluation set is empty");
  if (static_cast<std::size_t>(inputs.rows()) != labels.size())
    throw DimensionError("evaluation inputs and labels differ in count");
  if (!(sigma_eval >= 0.0)) throw std::invalid_argument("sigma_eval must be >= 0");

  const auto total = static_cast<double>(labels.size());
  RobustnessReport r;
  r.n_trials = n_trials;
  r.clean_accuracy = static_cast<double>(correct_count(net, params, inputs, labels)) / total;

  std::vector<std::size_t> correct(n_trials, 0);
  parallel_for(n_trials, threads, [&](std::size_t i) {
    const Parameters noisy = sample_weight_variation(params, sigma_eval, VariationSample{seed, i}, mode);
    correct[i] = correct_count(net, noisy, inputs, labels);
  });

  r.trial_accuracy.reserve(n_trials);
  std::size_t sum = 0;
  for (auto c : correct) {
    r.trial_accuracy.push_back(static_cast<double>(c) / total);
    sum += c;
  }
  r.noisy_accuracy_mean = static_cast<double>(sum) / (total * static_cast<double>(n_trials));
  r.noisy_accuracy_min = *std::min_element(r.trial_accuracy.begin(), r.trial_accuracy.end());
  if (n_trials > 1) {
    double ss = 0.0;
    for (double a : r.trial_accuracy) ss += (a - r.noisy_accuracy_mean) * (a - r.noisy_accuracy_mean);
    r.noisy_accuracy_std = std::sqrt(ss / static_cast<double>(n_trials - 1));
  }
  r.accuracy_drop = r.clean_accuracy - r.noisy_accuracy_mean;
  return r;
}

}  // namespace cimsim
