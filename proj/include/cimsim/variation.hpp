#pragma once

// Output-change Monte-Carlo and the Gaussian goodness-of-fit scores.
//
// Histograms are probability-normalized: O_i is the fraction of samples in
// bin i and E_i is the fitted Gaussian's probability mass on bin i, so the
// scores do not depend on the units of the output change.

#include "cimsim/nn.hpp"
#include "cimsim/nonideality.hpp"

#include <span>
#include <vector>

namespace cimsim {

inline constexpr int kDefaultBins = 100;
inline constexpr double kHistogramHalfWidth = 4.0;  // in fitted std-devs
inline constexpr double kExpectedFloor = 1e-12;     // bins with E_i below this skip the chi2 sum

/// n_samples x output_dim logits, row i from weight draw (seed, i).
Matrix monte_carlo_outputs(const NetworkSpec& net, const Parameters& params, const Vector& input,
                           double sigma, std::size_t n_samples, std::uint64_t seed,
                           NoiseScale mode = NoiseScale::relative, unsigned threads = 1);

struct OutputChangeSamples {
  Matrix values;  // n_samples x dim

  Eigen::Index n_samples() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
};

/// values[i] = clean - samples[i]
OutputChangeSamples output_change(const Matrix& samples, const Vector& clean);

struct GaussianFit {
  Vector mean;
  Vector stddev;  // unbiased
};

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> observed;  // fraction of samples per bin
  std::vector<double> expected;  // Gaussian mass per bin
};

struct FitQuality {
  Vector chi2;                    // per element; NaN where degenerate
  Vector mse;                     // per element; NaN where degenerate
  std::vector<bool> degenerate;   // zero-variance elements
  double avg_chi2 = 0.0;          // over non-degenerate elements
  double avg_mse = 0.0;
  int n_bins = kDefaultBins;
  std::size_t scored = 0;         // number of non-degenerate elements

  bool all_degenerate() const { return scored == 0; }
};

struct FitResult {
  GaussianFit fit;
  FitQuality quality;
  std::vector<Histogram> histograms;  // per element; empty for degenerate ones
};

double chi2_score(std::span<const double> observed, std::span<const double> expected,
                  double floor = kExpectedFloor);
double mse_score(std::span<const double> observed, std::span<const double> expected);

double normal_cdf(double x, double mean, double sd);

/// Histogram of `values` on [mean - 4 std, mean + 4 std] with the matching
/// Gaussian masses.
Histogram gaussian_histogram(std::span<const double> values, double mean, double sd, int n_bins);

FitResult fit_and_score(const OutputChangeSamples& changes, int n_bins = kDefaultBins);

struct GaussianityReport {
  std::vector<FitResult> per_init;
  double avg_chi2 = 0.0;  // mean over non-degenerate initializations
  double avg_mse = 0.0;
  std::size_t scored_inits = 0;

  bool degenerate() const { return scored_inits == 0; }
};

/// Runs monte_carlo_outputs -> output_change -> fit_and_score for each
/// parameter set and averages the vector scores across them.
GaussianityReport gaussianity_experiment(const NetworkSpec& net,
                                         std::span<const Parameters> params_list,
                                         const Vector& input, double sigma,
                                         std::size_t n_samples,
                                         std::span<const std::uint64_t> seeds,
                                         int n_bins = kDefaultBins,
                                         NoiseScale mode = NoiseScale::relative,
                                         unsigned threads = 1);

}  // namespace cimsim
