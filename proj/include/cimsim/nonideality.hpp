#pragma once

// Device noise and fault sources, plus the aggregate Gaussian weight model.
// Every sampler with all magnitudes at zero is the identity, and every
// sampler is a pure function of its seed.

#include "cimsim/crossbar.hpp"
#include "cimsim/nn.hpp"

#include <optional>

namespace cimsim {

namespace physical {
inline constexpr double boltzmann = 1.380649e-23;     // J/K
inline constexpr double electron_charge = 1.602e-19;  // C
}  // namespace physical

struct RtnConfig {
  double amplitude_rel = 0.0;  // fractional resistance drop while trapped
  double tau_low = 1.0;        // mean dwell time untrapped, seconds
  double tau_high = 1.0;       // mean dwell time trapped, seconds

  double trap_probability() const { return tau_high / (tau_low + tau_high); }
};

/// How the weight-noise sigma is scaled.
enum class NoiseScale {
  relative,  // sigma * max|W| of the layer
  absolute,  // sigma as given
};

struct NoiseModelConfig {
  double temperature = 300.0;  // kelvin
  double bandwidth = 1e9;      // hertz
  bool thermal_enabled = false;
  bool shot_enabled = false;
  double prog_sigma_rel = 0.01;
  std::optional<RtnConfig> rtn;
  double stuck_low_prob = 0.0;
  double stuck_high_prob = 0.0;
  double global_offset_rel = 0.0;
  // std-dev of a relative offset shared by every cell of one tile (spatially
  // correlated variation); drawn once per deployment
  double tile_offset_sigma_rel = 0.0;
  double weight_sigma = 0.04;
  NoiseScale weight_scale = NoiseScale::relative;

  /// All sources off; perturb_tile and friends become the identity.
  static NoiseModelConfig quiet();

  void validate() const;
};

/// Identifies one reproducible draw: same (seed, draw_index), same sample.
struct VariationSample {
  std::uint64_t seed = 0;
  std::uint64_t draw_index = 0;

  Rng rng() const { return make_rng(seed, draw_index); }
};

double thermal_sigma(double resistance, double temperature, double bandwidth);
double shot_sigma(double current, double bandwidth);

double sample_thermal_current(double resistance, double temperature, double bandwidth, Rng& rng);
double sample_shot_current(double current, double bandwidth, Rng& rng);

/// g0 * (1 + e) clamped to [g_min, g_max].
double apply_programming_error(double g0, double relative_error, const CrossbarConfig& xbar);
double sample_programming_error(double g0, const NoiseModelConfig& cfg, const CrossbarConfig& xbar,
                                Rng& rng);

/// Conductance multiplier for one read: 1/(1 - amplitude) when trapped, else 1.
double rtn_multiplier(const RtnConfig& rtn, Rng& rng);

/// Marks cells stuck-low/high independently. Cells already stuck stay as they are.
ConductanceTile apply_stuck_at(const ConductanceTile& tile, const NoiseModelConfig& cfg,
                               const CrossbarConfig& xbar, Rng& rng);

/// W + N(0, sigma * scale) per weight; biases untouched.
Parameters sample_weight_variation(const Parameters& expected, double sigma, Rng& rng,
                                   NoiseScale mode = NoiseScale::relative);
Parameters sample_weight_variation(const Parameters& expected, double sigma,
                                   const VariationSample& sample,
                                   NoiseScale mode = NoiseScale::relative);

/// Per-layer noise standard deviation used by sample_weight_variation.
std::vector<double> weight_noise_std(const Parameters& expected, double sigma, NoiseScale mode);

/// Conductances seen by one read plus the std-dev of the additive per-column
/// current noise (thermal + shot) to add after the dot product.
struct EffectiveRead {
  Matrix conductance;
  Vector column_sigma;
};

/// Applies global offset and programming error (both fixed by `deployment`,
/// so repeated reads of one tile instance agree), then RTN drawn from
/// `read_rng`, then computes the thermal/shot column variance for `volts`.
EffectiveRead perturb_tile(const ConductanceTile& tile, const NoiseModelConfig& cfg,
                           const CrossbarConfig& xbar, const VariationSample& deployment,
                           Rng& read_rng, const Vector& volts);

/// crossbar_vmm on the effective conductances plus Gaussian column noise.
Vector noisy_vmm(const ConductanceTile& tile, const NoiseModelConfig& cfg,
                 const CrossbarConfig& xbar, const VariationSample& deployment, Rng& read_rng,
                 const Vector& volts);

/// Stuck-at faults drawn once per deployment, tile by tile.
MappedLayer inject_faults(const MappedLayer& layer, const NoiseModelConfig& cfg,
                          const VariationSample& deployment);

/// mvm where every tile read goes through perturb_tile. Tile t of the layer
/// is deployment instance (stream_seed(deployment.seed, deployment.draw_index), t).
Vector noisy_mvm(const MappedLayer& layer, const Vector& x, const NoiseModelConfig& cfg,
                 const VariationSample& deployment, Rng& read_rng);

}  // namespace cimsim
