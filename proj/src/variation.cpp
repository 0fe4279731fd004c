#include "cimsim/variation.hpp"

#include "cimsim/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

namespace cimsim {

Matrix monte_carlo_outputs(const NetworkSpec& net, const Parameters& params, const Vector& input,
                           double sigma, std::size_t n_samples, std::uint64_t seed,
                           NoiseScale mode, unsigned threads) {
  if (n_samples < 1) throw std::invalid_argument("monte_carlo_outputs: n_samples must be >= 1");
  check_parameters(net, params);
  Matrix out(static_cast<Eigen::Index>(n_samples), net.output_dim());
  parallel_for(n_samples, threads, [&](std::size_t i) {
    const Parameters noisy = sample_weight_variation(params, sigma, VariationSample{seed, i}, mode);
    out.row(static_cast<Eigen::Index>(i)) = forward(net, noisy, input).transpose();
  });
  return out;
}

OutputChangeSamples output_change(const Matrix& samples, const Vector& clean) {
  if (samples.cols() != clean.size())
    throw DimensionError("output_change: sample width " + std::to_string(samples.cols()) +
                         " != clean width " + std::to_string(clean.size()));
  OutputChangeSamples out;
  out.values = (-samples).rowwise() + clean.transpose();
  if (!out.values.allFinite()) throw DimensionError("output_change: non-finite values");
  return out;
}

double chi2_score(std::span<const double> observed, std::span<const double> expected, double floor) {
  if (observed.size() != expected.size()) throw DimensionError("chi2_score: bin count mismatch");
  double chi2 = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (expected[i] <= floor) continue;
    const double d = observed[i] - expected[i];
    chi2 += d * d / expected[i];
  }
  return chi2;
}

double mse_score(std::span<const double> observed, std::span<const double> expected) {
  if (observed.size() != expected.size()) throw DimensionError("mse_score: bin count mismatch");
  if (observed.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double d = observed[i] - expected[i];
    sum += d * d;
  }
  return sum / static_cast<double>(observed.size());
}

double normal_cdf(double x, double mean, double sd) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

Histogram gaussian_histogram(std::span<const double> values, double mean, double sd, int n_bins) {
  if (n_bins < 2) throw std::invalid_argument("histogram needs at least 2 bins");
  if (!(sd > 0.0)) throw std::invalid_argument("histogram needs a positive std");
  Histogram h;
  h.lo = mean - kHistogramHalfWidth * sd;
  h.hi = mean + kHistogramHalfWidth * sd;
  const auto bins = static_cast<std::size_t>(n_bins);
  const double width = (h.hi - h.lo) / static_cast<double>(n_bins);
  std::vector<std::size_t> counts(bins, 0);
  for (double v : values) {
    if (v < h.lo || v > h.hi) continue;
    auto b = static_cast<std::size_t>((v - h.lo) / width);
    counts[std::min(b, bins - 1)]++;
  }
  const auto n = static_cast<double>(values.size());
  h.observed.resize(bins);
  h.expected.resize(bins);
  double lower = normal_cdf(h.lo, mean, sd);
  for (std::size_t b = 0; b < bins; ++b) {
    const double edge = b + 1 == bins ? h.hi : h.lo + static_cast<double>(b + 1) * width;
    const double upper = normal_cdf(edge, mean, sd);
    h.observed[b] = static_cast<double>(counts[b]) / n;
    h.expected[b] = upper - lower;
    lower = upper;
  }
  return h;
}

FitResult fit_and_score(const OutputChangeSamples& changes, int n_bins) {
  const Eigen::Index n = changes.n_samples();
  const Eigen::Index dim = changes.dim();
  if (n < 100) throw std::invalid_argument("fit_and_score needs at least 100 samples");
  if (n_bins < 2) throw std::invalid_argument("fit_and_score needs at least 2 bins");

  FitResult r;
  r.fit.mean = Vector::Zero(dim);
  r.fit.stddev = Vector::Zero(dim);
  auto& q = r.quality;
  q.n_bins = n_bins;
  q.chi2 = Vector::Constant(dim, std::numeric_limits<double>::quiet_NaN());
  q.mse = q.chi2;
  q.degenerate.assign(static_cast<std::size_t>(dim), false);
  r.histograms.resize(static_cast<std::size_t>(dim));

  std::vector<double> column(static_cast<std::size_t>(n));
  for (Eigen::Index e = 0; e < dim; ++e) {
    for (Eigen::Index i = 0; i < n; ++i) column[static_cast<std::size_t>(i)] = changes.values(i, e);
    // sorted accumulation makes the moments independent of sample order
    std::sort(column.begin(), column.end());
    const double mean = std::accumulate(column.begin(), column.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : column) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    r.fit.mean(e) = mean;
    r.fit.stddev(e) = sd;
    if (!(sd > 0.0) || !std::isfinite(sd)) {
      q.degenerate[static_cast<std::size_t>(e)] = true;
      std::clog << "warning: output element " << e
                << " has zero variance; excluded from fit averages\n";
      continue;
    }
    auto& h = r.histograms[static_cast<std::size_t>(e)];
    h = gaussian_histogram(column, mean, sd, n_bins);
    q.chi2(e) = chi2_score(h.observed, h.expected);
    q.mse(e) = mse_score(h.observed, h.expected);
    q.avg_chi2 += q.chi2(e);
    q.avg_mse += q.mse(e);
    ++q.scored;
  }
  if (q.scored > 0) {
    q.avg_chi2 /= static_cast<double>(q.scored);
    q.avg_mse /= static_cast<double>(q.scored);
  } else {
    q.avg_chi2 = q.avg_mse = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

GaussianityReport gaussianity_experiment(const NetworkSpec& net,
                                         std::span<const Parameters> params_list,
                                         const Vector& input, double sigma,
                                         std::size_t n_samples,
                                         std::span<const std::uint64_t> seeds, int n_bins,
                                         NoiseScale mode, unsigned threads) {
  if (params_list.empty()) throw std::invalid_argument("gaussianity_experiment: no parameter sets");
  if (seeds.size() != params_list.size())
    throw std::invalid_argument("gaussianity_experiment: need one seed per parameter set");
  GaussianityReport report;
  for (std::size_t k = 0; k < params_list.size(); ++k) {
    const Vector clean = forward(net, params_list[k], input);
    const Matrix samples =
        monte_carlo_outputs(net, params_list[k], input, sigma, n_samples, seeds[k], mode, threads);
    report.per_init.push_back(fit_and_score(output_change(samples, clean), n_bins));
    const auto& q = report.per_init.back().quality;
    if (q.all_degenerate()) continue;
    report.avg_chi2 += q.avg_chi2;
    report.avg_mse += q.avg_mse;
    ++report.scored_inits;
  }
  if (report.scored_inits > 0) {
    report.avg_chi2 /= static_cast<double>(report.scored_inits);
    report.avg_mse /= static_cast<double>(report.scored_inits);
  } else {
    report.avg_chi2 = report.avg_mse = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

}  // namespace cimsim
