#include "cimsim/crossbar.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cimsim {

void CrossbarConfig::validate() const {
  if (rows < 1 || cols < 1) throw ConfigError("crossbar rows and cols must be >= 1");
  if (bits_per_device < 1 || bits_per_device > 4)
    throw ConfigError("bits_per_device must be in [1, 4], got " + std::to_string(bits_per_device));
  if (!(g_min > 0.0) || !(g_max > g_min))
    throw ConfigError("conductance range requires g_max > g_min > 0");
  if (adc_bits && (*adc_bits < 1 || *adc_bits > 30)) throw ConfigError("adc_bits must be in [1, 30]");
  if (dac_bits && (*dac_bits < 2 || *dac_bits > 30)) throw ConfigError("dac_bits must be in [2, 30]");
  if (!(v_read > 0.0)) throw ConfigError("v_read must be positive");
}

double CrossbarConfig::level_step() const {
  return (g_max - g_min) / static_cast<double>((1 << bits_per_device) - 1);
}

double CrossbarConfig::full_scale_current() const {
  return static_cast<double>(rows) * v_read * g_max;
}

double CrossbarConfig::adc_step() const {
  if (!adc_bits) return 0.0;
  return 2.0 * full_scale_current() / static_cast<double>((std::int64_t{1} << *adc_bits) - 1);
}

Eigen::Index ConductanceTile::fault_count() const {
  return (faults.array() != static_cast<std::uint8_t>(Fault::none)).count();
}

ConductanceTile ConductanceTile::uniform(Eigen::Index rows, Eigen::Index cols, double g) {
  return {Matrix::Constant(rows, cols, g), FaultMask::Zero(rows, cols)};
}

QuantizedMatrix quantize(const Matrix& weights, int total_bits) {
  if (total_bits < 2 || total_bits > 32) throw ConfigError("weight bits must be in [2, 32]");
  if (!weights.allFinite()) throw DimensionError("cannot quantize non-finite weights");
  const auto max_level = (std::int64_t{1} << (total_bits - 1)) - 1;
  const double max_abs = weights.size() ? weights.cwiseAbs().maxCoeff() : 0.0;
  QuantizedMatrix q;
  q.scale = max_abs > 0.0 ? max_abs / static_cast<double>(max_level) : 1.0;
  q.levels = weights.unaryExpr([&](double w) {
    const auto l = static_cast<std::int64_t>(std::llround(w / q.scale));
    return std::clamp(l, -max_level, max_level);
  });
  return q;
}

std::size_t MappedLayer::tile_index(Eigen::Index row_tile, Eigen::Index col_tile,
                                    std::size_t slice, int polarity) const {
  return ((static_cast<std::size_t>(row_tile) * static_cast<std::size_t>(col_tiles) +
           static_cast<std::size_t>(col_tile)) *
              slices() +
          slice) *
             static_cast<std::size_t>(polarities()) +
         static_cast<std::size_t>(polarity);
}

void MappedLayer::validate() const {
  config.validate();
  const auto expected = static_cast<std::size_t>(row_tiles * col_tiles) * slices() *
                        static_cast<std::size_t>(polarities());
  if (tiles.size() != expected)
    throw DimensionError("mapped layer holds " + std::to_string(tiles.size()) + " tiles, expected " +
                         std::to_string(expected));
  if (row_tiles * config.rows < in_dim || col_tiles * config.cols < out_dim)
    throw DimensionError("tile grid does not cover the weight matrix");
  for (const auto& t : tiles)
    if (t.rows() != config.rows || t.cols() != config.cols || t.faults.rows() != config.rows ||
        t.faults.cols() != config.cols)
      throw DimensionError("tile size does not match crossbar config");
}

MappedLayer map_weights(const Matrix& weights, const CrossbarConfig& cfg, int total_weight_bits) {
  cfg.validate();
  if (!weights.allFinite()) throw DimensionError("map_weights: non-finite weight");
  if (total_weight_bits < cfg.bits_per_device)
    throw ConfigError("total_weight_bits must be >= bits_per_device");
  if (total_weight_bits % cfg.bits_per_device != 0)
    throw ConfigError("total_weight_bits must be a multiple of bits_per_device");

  const QuantizedMatrix q = quantize(weights, total_weight_bits);
  const int bpd = cfg.bits_per_device;
  const std::int64_t max_level = (std::int64_t{1} << (total_weight_bits - 1)) - 1;
  // differential pairs carry magnitude only; single-ended stores level + max_level
  const int payload_bits = cfg.differential ? total_weight_bits - 1 : total_weight_bits;
  const auto n_slices = static_cast<std::size_t>((payload_bits + bpd - 1) / bpd);
  const std::int64_t digit_mask = (std::int64_t{1} << bpd) - 1;

  MappedLayer layer;
  layer.config = cfg;
  layer.out_dim = weights.rows();
  layer.in_dim = weights.cols();
  layer.weight_bits = total_weight_bits;
  layer.scale = q.scale;
  layer.c1 = q.scale / cfg.level_step();
  layer.c0 = -layer.c1 * cfg.g_min;
  layer.level_offset = cfg.differential ? 0.0 : q.scale * static_cast<double>(max_level);
  for (std::size_t s = 0; s < n_slices; ++s)
    layer.slice_weights.push_back(std::ldexp(1.0, static_cast<int>((n_slices - 1 - s) * bpd)));
  layer.row_tiles = (layer.in_dim + cfg.rows - 1) / cfg.rows;
  layer.col_tiles = (layer.out_dim + cfg.cols - 1) / cfg.cols;
  layer.tiles.assign(static_cast<std::size_t>(layer.row_tiles * layer.col_tiles) * n_slices *
                         static_cast<std::size_t>(layer.polarities()),
                     ConductanceTile::uniform(cfg.rows, cfg.cols, cfg.g_min));

  const double step = cfg.level_step();
  for (Eigen::Index o = 0; o < layer.out_dim; ++o) {
    for (Eigen::Index i = 0; i < layer.in_dim; ++i) {
      const std::int64_t level = q.levels(o, i);
      const std::int64_t payload = cfg.differential ? std::abs(level) : level + max_level;
      const int polarity = (cfg.differential && level < 0) ? 1 : 0;
      const Eigen::Index rt = i / cfg.rows, ct = o / cfg.cols;
      const Eigen::Index r = i % cfg.rows, c = o % cfg.cols;
      for (std::size_t s = 0; s < n_slices; ++s) {
        const auto shift = static_cast<int>((n_slices - 1 - s) * static_cast<std::size_t>(bpd));
        const std::int64_t digit = (payload >> shift) & digit_mask;
        layer.tile(rt, ct, s, polarity).conductance(r, c) =
            cfg.g_min + static_cast<double>(digit) * step;
      }
    }
  }
  return layer;
}

Matrix reconstruct_weights(const MappedLayer& layer) {
  Matrix w = Matrix::Constant(layer.out_dim, layer.in_dim, -layer.level_offset);
  const auto& cfg = layer.config;
  for (Eigen::Index rt = 0; rt < layer.row_tiles; ++rt) {
    for (Eigen::Index ct = 0; ct < layer.col_tiles; ++ct) {
      const Eigen::Index i0 = rt * cfg.rows, o0 = ct * cfg.cols;
      const Eigen::Index ni = std::min(cfg.rows, layer.in_dim - i0);
      const Eigen::Index no = std::min(cfg.cols, layer.out_dim - o0);
      for (std::size_t s = 0; s < layer.slices(); ++s) {
        for (int p = 0; p < layer.polarities(); ++p) {
          const double sign = p == 0 ? 1.0 : -1.0;
          const auto& g = layer.tile(rt, ct, s, p).conductance;
          // tile is (input x output); w is (output x input)
          w.block(o0, i0, no, ni).array() +=
              sign * layer.slice_weights[s] *
              (layer.c1 * g.topLeftCorner(ni, no).transpose().array() + layer.c0);
        }
      }
    }
  }
  return w;
}

Vector dac_quantize(const Vector& volts, const CrossbarConfig& cfg) {
  if (!cfg.dac_bits) return volts;
  const double levels = static_cast<double>((std::int64_t{1} << (*cfg.dac_bits - 1)) - 1);
  return volts.unaryExpr([&](double v) {
    const double c = std::clamp(v, -cfg.v_read, cfg.v_read);
    return std::round(c / cfg.v_read * levels) / levels * cfg.v_read;
  });
}

double adc_quantize(double current, const CrossbarConfig& cfg) {
  if (!cfg.adc_bits) return current;
  const double fs = cfg.full_scale_current();
  const double step = cfg.adc_step();
  const double c = std::clamp(current, -fs, fs);
  return -fs + std::round((c + fs) / step) * step;
}

Vector crossbar_vmm(const ConductanceTile& tile, const Vector& volts, const CrossbarConfig& cfg) {
  if (volts.size() != tile.rows())
    throw DimensionError("crossbar_vmm: " + std::to_string(volts.size()) + " voltages for " +
                         std::to_string(tile.rows()) + " rows");
  const Vector v = dac_quantize(volts, cfg);
  return tile.conductance.transpose() * v;
}

namespace {

struct InputDrive {
  Vector volts;        // DAC-quantized, length row_tiles * rows
  double to_input = 0;  // multiply volts by this to get back input units
};

InputDrive drive_inputs(const MappedLayer& layer, const Vector& x) {
  const auto& cfg = layer.config;
  InputDrive d;
  d.volts = Vector::Zero(layer.row_tiles * cfg.rows);
  const double x_max = x.cwiseAbs().maxCoeff();
  if (x_max == 0.0) return d;
  d.to_input = x_max / cfg.v_read;
  d.volts.head(layer.in_dim) = dac_quantize(x / d.to_input, cfg);
  return d;
}

}  // namespace

Vector mvm(const MappedLayer& layer, const Vector& x) {
  return mvm(layer, x, [&](std::size_t, const ConductanceTile& tile, const Vector& volts) {
    return crossbar_vmm(tile, volts, layer.config);
  });
}

Vector mvm(const MappedLayer& layer, const Vector& x, const TileReader& reader) {
  if (x.size() != layer.in_dim)
    throw DimensionError("mvm: input length " + std::to_string(x.size()) + " != " +
                         std::to_string(layer.in_dim));
  if (!x.allFinite()) throw DimensionError("mvm: non-finite input");
  const auto& cfg = layer.config;
  Vector y = Vector::Zero(layer.out_dim);
  const InputDrive drive = drive_inputs(layer, x);
  if (drive.to_input == 0.0) return y;

  // sum of the inputs as the DAC actually delivers them, for the c0 terms
  const double x_sum = drive.volts.sum() * drive.to_input;
  const double current_to_weight = layer.c1 * drive.to_input;

  Vector column(cfg.cols);
  for (Eigen::Index ct = 0; ct < layer.col_tiles; ++ct) {
    const Eigen::Index o0 = ct * cfg.cols;
    const Eigen::Index no = std::min(cfg.cols, layer.out_dim - o0);
    Vector acc = Vector::Zero(cfg.cols);
    for (Eigen::Index rt = 0; rt < layer.row_tiles; ++rt) {
      const Vector volts = drive.volts.segment(rt * cfg.rows, cfg.rows);
      for (std::size_t s = 0; s < layer.slices(); ++s) {
        for (int p = 0; p < layer.polarities(); ++p) {
          const std::size_t idx = layer.tile_index(rt, ct, s, p);
          const Vector currents = reader(idx, layer.tiles[idx], volts);
          if (currents.size() != cfg.cols) throw DimensionError("tile reader returned wrong width");
          for (Eigen::Index j = 0; j < cfg.cols; ++j) column(j) = adc_quantize(currents(j), cfg);
          const double sign = p == 0 ? 1.0 : -1.0;
          acc += sign * layer.slice_weights[s] * column;
        }
      }
    }
    y.segment(o0, no) = current_to_weight * acc.head(no);
  }

  double c0_weight = 0.0;  // net multiplier of c0 * sum(x)
  for (std::size_t s = 0; s < layer.slices(); ++s)
    for (int p = 0; p < layer.polarities(); ++p) c0_weight += (p == 0 ? 1.0 : -1.0) * layer.slice_weights[s];
  y.array() += (c0_weight * layer.c0 - layer.level_offset) * x_sum;
  return y;
}

double mvm_adc_error_bound(const MappedLayer& layer, const Vector& x) {
  const double x_max = x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
  if (x_max == 0.0 || !layer.config.adc_bits) return 0.0;
  double sw_max = 0.0;
  for (double sw : layer.slice_weights) sw_max = std::max(sw_max, sw);
  const double to_input = x_max / layer.config.v_read;
  return static_cast<double>(layer.row_tiles) * static_cast<double>(layer.slices()) * sw_max *
         layer.config.adc_step() * layer.c1 * to_input;
}

}  // namespace cimsim
