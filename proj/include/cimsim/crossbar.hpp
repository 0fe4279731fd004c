#pragma once

// Weight-to-conductance mapping and the analog dot-product abstraction.
//
// A weight matrix W (out x in) is quantized symmetrically, its integer
// levels split into bit slices, and every slice stored on fixed-size tiles.
// Tile row i carries input feature (row_tile * rows + i); tile column j
// carries output (col_tile * cols + j). With differential encoding each
// slice has a positive and a negative tile; the unused side of a pair
// sits at g_min.

#include "cimsim/core.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace cimsim {

struct CrossbarConfig {
  Eigen::Index rows = 128;
  Eigen::Index cols = 128;
  int bits_per_device = 2;
  double g_min = 1e-6;  // siemens
  double g_max = 1e-4;
  std::optional<int> adc_bits;  // nullopt: ideal
  std::optional<int> dac_bits;  // nullopt: ideal
  bool differential = true;
  double v_read = 0.2;  // full-scale wordline voltage

  void validate() const;
  /// Conductance spacing between adjacent device levels.
  double level_step() const;
  /// Largest current magnitude one column can carry.
  double full_scale_current() const;
  /// ADC quantization step in amps; 0 for an ideal ADC.
  double adc_step() const;
};

enum class Fault : std::uint8_t { none = 0, stuck_low = 1, stuck_high = 2 };

using FaultMask = MatrixX<std::uint8_t>;

struct ConductanceTile {
  Matrix conductance;  // rows x cols, siemens
  FaultMask faults;    // Fault values

  Eigen::Index rows() const { return conductance.rows(); }
  Eigen::Index cols() const { return conductance.cols(); }
  Fault fault(Eigen::Index r, Eigen::Index c) const { return static_cast<Fault>(faults(r, c)); }
  Eigen::Index fault_count() const;

  static ConductanceTile uniform(Eigen::Index rows, Eigen::Index cols, double g);
};

/// Symmetric signed quantization with 2^(bits-1) - 1 levels per side.
struct QuantizedMatrix {
  MatrixX<std::int64_t> levels;
  double scale = 1.0;  // weight per level

  Matrix dequantize() const { return levels.cast<double>() * scale; }
};

QuantizedMatrix quantize(const Matrix& weights, int total_bits);

struct MappedLayer {
  CrossbarConfig config;
  Eigen::Index out_dim = 0;
  Eigen::Index in_dim = 0;
  int weight_bits = 8;
  double scale = 1.0;  // weight per quantization level
  double c1 = 0.0;     // weight per siemens for one unit of slice weight
  double c0 = 0.0;     // per-device offset, w = c1 * g + c0
  double level_offset = 0.0;  // single-ended encoding offset in weight units
  std::vector<double> slice_weights;  // most significant slice first
  Eigen::Index row_tiles = 0;
  Eigen::Index col_tiles = 0;
  std::vector<ConductanceTile> tiles;

  int polarities() const { return config.differential ? 2 : 1; }
  std::size_t slices() const { return slice_weights.size(); }
  std::size_t tile_index(Eigen::Index row_tile, Eigen::Index col_tile, std::size_t slice,
                         int polarity) const;
  ConductanceTile& tile(Eigen::Index row_tile, Eigen::Index col_tile, std::size_t slice,
                        int polarity) {
    return tiles[tile_index(row_tile, col_tile, slice, polarity)];
  }
  const ConductanceTile& tile(Eigen::Index row_tile, Eigen::Index col_tile, std::size_t slice,
                              int polarity) const {
    return tiles[tile_index(row_tile, col_tile, slice, polarity)];
  }

  /// Checks tile count and sizes against the declared geometry.
  void validate() const;
};

MappedLayer map_weights(const Matrix& weights, const CrossbarConfig& cfg, int total_weight_bits);

Matrix reconstruct_weights(const MappedLayer& layer);

/// Uniform symmetric DAC over [-v_read, v_read]; identity for an ideal DAC.
Vector dac_quantize(const Vector& volts, const CrossbarConfig& cfg);

/// Uniform ADC over [-I_fs, I_fs]; identity for an ideal ADC.
double adc_quantize(double current, const CrossbarConfig& cfg);

/// Column currents I_j = sum_i v_i g_ij after DAC quantization of v.
Vector crossbar_vmm(const ConductanceTile& tile, const Vector& volts, const CrossbarConfig& cfg);

/// Reads one tile given its flat index and the (DAC-quantized, padded) row
/// voltages, returning analog column currents before the ADC.
using TileReader =
    std::function<Vector(std::size_t tile_index, const ConductanceTile& tile, const Vector& volts)>;

/// Full layer product y = W_q x through the tiles, ADC, and digital
/// recombination. Bias is not applied.
Vector mvm(const MappedLayer& layer, const Vector& x);
Vector mvm(const MappedLayer& layer, const Vector& x, const TileReader& reader);

/// Worst-case |mvm - W_q x| per output due to the ADC alone:
/// row_tiles * slices * max(slice_weights) * one ADC step, in weight units.
double mvm_adc_error_bound(const MappedLayer& layer, const Vector& x);

}  // namespace cimsim
