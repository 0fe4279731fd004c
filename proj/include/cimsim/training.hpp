#pragma once

// Noise-injection training and accuracy-under-variation evaluation.

#include "cimsim/nn.hpp"
#include "cimsim/nonideality.hpp"

#include <functional>
#include <optional>
#include <span>

namespace cimsim {

struct TrainConfig {
  double sigma_train = 0.0;
  int epochs = 1;
  double lr = 0.1;
  int batch_size = 32;
  std::uint64_t seed = 0;
  NoiseScale noise_scale = NoiseScale::relative;

  void validate() const;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int epoch, std::size_t iteration, double loss);

  int epoch() const noexcept { return epoch_; }
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  int epoch_;
  std::size_t iteration_;
};

struct TrainStep {
  int epoch = 0;
  std::size_t iteration = 0;
  double loss = 0.0;  // at the noisy weights
  const Parameters& before;
  const Gradients& grads;
  const Parameters& after;
};

struct TrainObservers {
  std::function<void(const TrainStep&)> on_step;
  std::function<void(int epoch, const Parameters&, double mean_loss)> on_epoch;
};

/// One weight-noise draw followed by a gradient evaluated at the noisy
/// weights. The returned gradient belongs to `weights`, which stay clean.
template <typename GradFn>
Gradients noise_injected_gradient(const Parameters& weights, double sigma, NoiseScale mode,
                                  Rng& rng, GradFn&& grad_at) {
  if (sigma == 0.0) return grad_at(weights);
  return grad_at(sample_weight_variation(weights, sigma, rng, mode));
}

/// Mini-batch SGD where each iteration evaluates the gradient at W + eps,
/// eps ~ N(0, sigma_train * max|W_layer|), and applies it to W. With
/// sigma_train = 0 this is plain SGD.
Parameters noise_injection_train(const NetworkSpec& net, const Matrix& inputs,
                                 std::span<const int> labels, const TrainConfig& cfg,
                                 std::optional<Parameters> initial = std::nullopt,
                                 const TrainObservers& observers = {});

/// Plain mini-batch SGD with the same batching and shuffling as
/// noise_injection_train.
Parameters sgd_train(const NetworkSpec& net, const Matrix& inputs, std::span<const int> labels,
                     const TrainConfig& cfg, std::optional<Parameters> initial = std::nullopt,
                     const TrainObservers& observers = {});

struct RobustnessReport {
  double clean_accuracy = 0.0;
  double noisy_accuracy_mean = 0.0;
  double noisy_accuracy_std = 0.0;
  double noisy_accuracy_min = 0.0;
  double accuracy_drop = 0.0;  // clean - noisy mean
  std::size_t n_trials = 0;
  std::vector<double> trial_accuracy;
};

/// Trial i evaluates the dataset at weights sample_weight_variation(params,
/// sigma_eval, {seed, i}).
RobustnessReport evaluate_under_variation(const NetworkSpec& net, const Parameters& params,
                                          double sigma_eval, std::size_t n_trials,
                                          const Matrix& inputs, std::span<const int> labels,
                                          std::uint64_t seed,
                                          NoiseScale mode = NoiseScale::relative,
                                          unsigned threads = 1);

}  // namespace cimsim
