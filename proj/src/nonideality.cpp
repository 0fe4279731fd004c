#include "cimsim/nonideality.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cimsim {

NoiseModelConfig NoiseModelConfig::quiet() {
  NoiseModelConfig cfg;
  cfg.prog_sigma_rel = 0.0;
  cfg.weight_sigma = 0.0;
  return cfg;
}

void NoiseModelConfig::validate() const {
  if (thermal_enabled || shot_enabled) {
    if (!(bandwidth > 0.0)) throw ConfigError("bandwidth must be positive when noise is enabled");
  }
  if (thermal_enabled && !(temperature > 0.0))
    throw ConfigError("temperature must be positive when thermal noise is enabled");
  if (!(prog_sigma_rel >= 0.0) || !(prog_sigma_rel < 0.05))
    throw ConfigError("prog_sigma_rel must be in [0, 0.05)");
  if (rtn) {
    if (!(rtn->tau_low > 0.0) || !(rtn->tau_high > 0.0))
      throw ConfigError("rtn time constants must be positive");
    if (!(rtn->amplitude_rel >= 0.0) || !(rtn->amplitude_rel < 1.0))
      throw ConfigError("rtn amplitude_rel must be in [0, 1)");
  }
  auto is_prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!is_prob(stuck_low_prob) || !is_prob(stuck_high_prob) ||
      stuck_low_prob + stuck_high_prob > 1.0)
    throw ConfigError("stuck-at probabilities must lie in [0, 1] and sum to at most 1");
  if (!std::isfinite(global_offset_rel) || global_offset_rel <= -1.0)
    throw ConfigError("global_offset_rel must be finite and > -1");
  if (!(tile_offset_sigma_rel >= 0.0) || !std::isfinite(tile_offset_sigma_rel))
    throw ConfigError("tile_offset_sigma_rel must be finite and >= 0");
  if (!(weight_sigma >= 0.0) || !std::isfinite(weight_sigma))
    throw ConfigError("weight_sigma must be finite and >= 0");
}

double thermal_sigma(double resistance, double temperature, double bandwidth) {
  if (!(resistance > 0.0)) throw std::domain_error("thermal_sigma: resistance must be positive");
  if (temperature < 0.0 || bandwidth < 0.0)
    throw std::domain_error("thermal_sigma: temperature and bandwidth must be >= 0");
  return std::sqrt(4.0 * physical::boltzmann * temperature * bandwidth / resistance);
}

double shot_sigma(double current, double bandwidth) {
  if (current < 0.0 || bandwidth < 0.0)
    throw std::domain_error("shot_sigma: current and bandwidth must be >= 0");
  return std::sqrt(2.0 * physical::electron_charge * current * bandwidth);
}

double sample_thermal_current(double resistance, double temperature, double bandwidth, Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng) *
         thermal_sigma(resistance, temperature, bandwidth);
}

double sample_shot_current(double current, double bandwidth, Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng) * shot_sigma(current, bandwidth);
}

double apply_programming_error(double g0, double relative_error, const CrossbarConfig& xbar) {
  return std::clamp(g0 * (1.0 + relative_error), xbar.g_min, xbar.g_max);
}

double sample_programming_error(double g0, const NoiseModelConfig& cfg, const CrossbarConfig& xbar,
                                Rng& rng) {
  if (cfg.prog_sigma_rel == 0.0) return g0;
  const double e = std::normal_distribution<double>(0.0, cfg.prog_sigma_rel)(rng);
  return apply_programming_error(g0, e, xbar);
}

double rtn_multiplier(const RtnConfig& rtn, Rng& rng) {
  if (!(rtn.amplitude_rel < 1.0) || rtn.amplitude_rel < 0.0)
    throw std::domain_error("rtn amplitude_rel must be in [0, 1)");
  if (!(rtn.tau_low > 0.0) || !(rtn.tau_high > 0.0))
    throw std::domain_error("rtn time constants must be positive");
  const bool trapped = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < rtn.trap_probability();
  return trapped ? 1.0 / (1.0 - rtn.amplitude_rel) : 1.0;
}

ConductanceTile apply_stuck_at(const ConductanceTile& tile, const NoiseModelConfig& cfg,
                               const CrossbarConfig& xbar, Rng& rng) {
  ConductanceTile out = tile;
  if (cfg.stuck_low_prob == 0.0 && cfg.stuck_high_prob == 0.0) return out;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      const double draw = u(rng);
      if (out.fault(r, c) != Fault::none) continue;
      if (draw < cfg.stuck_low_prob) {
        out.conductance(r, c) = xbar.g_min;
        out.faults(r, c) = static_cast<std::uint8_t>(Fault::stuck_low);
      } else if (draw < cfg.stuck_low_prob + cfg.stuck_high_prob) {
        out.conductance(r, c) = xbar.g_max;
        out.faults(r, c) = static_cast<std::uint8_t>(Fault::stuck_high);
      }
    }
  }
  return out;
}

std::vector<double> weight_noise_std(const Parameters& expected, double sigma, NoiseScale mode) {
  if (!(sigma >= 0.0)) throw std::domain_error("weight noise sigma must be >= 0");
  std::vector<double> out;
  out.reserve(expected.size());
  for (const auto& p : expected.dense) {
    const double scale =
        mode == NoiseScale::relative ? (p.weight.size() ? p.weight.cwiseAbs().maxCoeff() : 0.0) : 1.0;
    out.push_back(sigma * scale);
  }
  return out;
}

Parameters sample_weight_variation(const Parameters& expected, double sigma, Rng& rng,
                                   NoiseScale mode) {
  const auto stds = weight_noise_std(expected, sigma, mode);
  Parameters out = expected;
  std::normal_distribution<double> n01(0.0, 1.0);
  for (std::size_t l = 0; l < out.size(); ++l) {
    if (stds[l] == 0.0) continue;
    auto& w = out[l].weight;
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] += stds[l] * n01(rng);
  }
  return out;
}

Parameters sample_weight_variation(const Parameters& expected, double sigma,
                                   const VariationSample& sample, NoiseScale mode) {
  Rng rng = sample.rng();
  return sample_weight_variation(expected, sigma, rng, mode);
}

EffectiveRead perturb_tile(const ConductanceTile& tile, const NoiseModelConfig& cfg,
                           const CrossbarConfig& xbar, const VariationSample& deployment,
                           Rng& read_rng, const Vector& volts) {
  if (volts.size() != tile.rows())
    throw DimensionError("perturb_tile: " + std::to_string(volts.size()) + " voltages for " +
                         std::to_string(tile.rows()) + " rows");
  EffectiveRead read{tile.conductance, Vector::Zero(tile.cols())};
  Rng program_rng = deployment.rng();
  std::normal_distribution<double> prog(0.0, 1.0);
  const bool programming = cfg.prog_sigma_rel > 0.0;
  double offset_factor = 1.0 + cfg.global_offset_rel;
  if (cfg.tile_offset_sigma_rel > 0.0) offset_factor += cfg.tile_offset_sigma_rel * prog(program_rng);
  const bool offset = offset_factor != 1.0;

  for (Eigen::Index r = 0; r < tile.rows(); ++r) {
    for (Eigen::Index c = 0; c < tile.cols(); ++c) {
      // draw unconditionally so healthy cells see the same error whatever the fault map
      const double e = programming ? cfg.prog_sigma_rel * prog(program_rng) : 0.0;
      const double trap = cfg.rtn ? rtn_multiplier(*cfg.rtn, read_rng) : 1.0;
      if (tile.fault(r, c) != Fault::none) continue;
      double g = read.conductance(r, c);
      if (offset) g = std::clamp(g * offset_factor, xbar.g_min, xbar.g_max);
      if (programming) g = apply_programming_error(g, e, xbar);
      if (trap != 1.0) g = std::clamp(g * trap, xbar.g_min, xbar.g_max);
      read.conductance(r, c) = g;
    }
  }

  if (cfg.thermal_enabled || cfg.shot_enabled) {
    const Vector v = dac_quantize(volts, xbar);
    for (Eigen::Index c = 0; c < tile.cols(); ++c) {
      double var = 0.0;
      for (Eigen::Index r = 0; r < tile.rows(); ++r) {
        const double g = read.conductance(r, c);
        if (cfg.thermal_enabled) {
          const double s = thermal_sigma(1.0 / g, cfg.temperature, cfg.bandwidth);
          var += s * s;
        }
        if (cfg.shot_enabled) {
          const double s = shot_sigma(std::abs(v(r) * g), cfg.bandwidth);
          var += s * s;
        }
      }
      read.column_sigma(c) = std::sqrt(var);
    }
  }
  return read;
}

Vector noisy_vmm(const ConductanceTile& tile, const NoiseModelConfig& cfg,
                 const CrossbarConfig& xbar, const VariationSample& deployment, Rng& read_rng,
                 const Vector& volts) {
  const EffectiveRead read = perturb_tile(tile, cfg, xbar, deployment, read_rng, volts);
  Vector currents = read.conductance.transpose() * dac_quantize(volts, xbar);
  if (cfg.thermal_enabled || cfg.shot_enabled) {
    std::normal_distribution<double> n01(0.0, 1.0);
    for (Eigen::Index c = 0; c < currents.size(); ++c) currents(c) += read.column_sigma(c) * n01(read_rng);
  }
  return currents;
}

MappedLayer inject_faults(const MappedLayer& layer, const NoiseModelConfig& cfg,
                          const VariationSample& deployment) {
  MappedLayer out = layer;
  const std::uint64_t base = stream_seed(deployment.seed, deployment.draw_index);
  for (std::size_t t = 0; t < out.tiles.size(); ++t) {
    Rng rng = make_rng(mix64(base), t);
    out.tiles[t] = apply_stuck_at(out.tiles[t], cfg, out.config, rng);
  }
  return out;
}

Vector noisy_mvm(const MappedLayer& layer, const Vector& x, const NoiseModelConfig& cfg,
                 const VariationSample& deployment, Rng& read_rng) {
  const std::uint64_t base = stream_seed(deployment.seed, deployment.draw_index);
  return mvm(layer, x, [&](std::size_t t, const ConductanceTile& tile, const Vector& volts) {
    return noisy_vmm(tile, cfg, layer.config, VariationSample{base, t}, read_rng, volts);
  });
}

}  // namespace cimsim
