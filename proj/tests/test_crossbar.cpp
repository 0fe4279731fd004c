#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cimsim/crossbar.hpp"

#include <cmath>

using namespace cimsim;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return Matrix::NullaryExpr(r, c, [&] { return u(rng); });
}

Vector random_vector(Eigen::Index n, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return Vector::NullaryExpr(n, [&] { return u(rng); });
}

// Symmetric quantizer written out directly: level = round(w / s), s = max|W| / (2^(b-1) - 1).
Matrix reference_quantize(const Matrix& w, int bits) {
  const double L = std::pow(2.0, bits - 1) - 1.0;
  const double s = w.cwiseAbs().maxCoeff() / L;
  return w.unaryExpr([&](double v) { return std::round(v / s) * s; });
}

}  // namespace

TEST_CASE("config validation") {
  CrossbarConfig c;
  CHECK_NOTHROW(c.validate());
  c.bits_per_device = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = CrossbarConfig{};
  c.g_min = c.g_max;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = CrossbarConfig{};
  c.adc_bits = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(map_weights(Matrix::Ones(2, 2), CrossbarConfig{}, 7), ConfigError);
}

TEST_CASE("quantize matches the reference quantizer") {
  Rng rng(1);
  const Matrix w = random_matrix(20, 30, rng);
  const auto q = quantize(w, 8);
  CHECK(q.levels.cwiseAbs().maxCoeff() == 127);
  CHECK((q.dequantize() - reference_quantize(w, 8)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("map_weights examples") {
  CrossbarConfig cfg;
  cfg.rows = cfg.cols = 4;

  SUBCASE("zero weight sits at g_min on both columns") {
    const auto layer = map_weights(Matrix::Zero(1, 1), cfg, 8);
    for (const auto& t : layer.tiles) CHECK(t.conductance(0, 0) == cfg.g_min);
    CHECK(reconstruct_weights(layer)(0, 0) == 0.0);
  }
  SUBCASE("largest weight with one slice reaches g_max") {
    cfg.bits_per_device = 1;
    const auto layer = map_weights(Matrix::Constant(1, 1, 0.7), cfg, 2);
    REQUIRE(layer.slices() == 1);
    CHECK(layer.tile(0, 0, 0, 0).conductance(0, 0) == cfg.g_max);
    CHECK(layer.tile(0, 0, 0, 1).conductance(0, 0) == cfg.g_min);
    CHECK(reconstruct_weights(layer)(0, 0) == doctest::Approx(0.7).epsilon(1e-12));
  }
  SUBCASE("negative weights use the second column") {
    cfg.bits_per_device = 1;
    const auto layer = map_weights(Matrix::Constant(1, 1, -0.7), cfg, 2);
    CHECK(layer.tile(0, 0, 0, 0).conductance(0, 0) == cfg.g_min);
    CHECK(layer.tile(0, 0, 0, 1).conductance(0, 0) == cfg.g_max);
  }
  SUBCASE("slice weights are most significant first") {
    const auto layer = map_weights(Matrix::Ones(2, 2), cfg, 8);
    REQUIRE(layer.slices() == 4);
    CHECK(layer.slice_weights == std::vector<double>{64.0, 16.0, 4.0, 1.0});
  }
  SUBCASE("conductances stay in range") {
    Rng rng(2);
    const auto layer = map_weights(random_matrix(9, 7, rng), cfg, 8);
    for (const auto& t : layer.tiles) {
      CHECK(t.conductance.minCoeff() >= cfg.g_min);
      CHECK(t.conductance.maxCoeff() <= cfg.g_max * (1 + 1e-15));
    }
  }
}

TEST_CASE("reconstruction is exact on a 200x150 matrix") {
  Rng rng(3);
  const Matrix w = random_matrix(200, 150, rng);
  for (bool differential : {true, false}) {
    CrossbarConfig cfg;
    cfg.differential = differential;
    const auto layer = map_weights(w, cfg, 8);
    CHECK(layer.row_tiles == 2);
    CHECK(layer.col_tiles == 2);
    const Matrix ref = reference_quantize(w, 8);
    const Matrix rec = reconstruct_weights(layer);
    const auto q = quantize(w, 8);
    const MatrixX<std::int64_t> levels = (rec / q.scale).array().round().cast<std::int64_t>();
    CHECK(levels == q.levels);
    CHECK((rec - ref).cwiseAbs().maxCoeff() <= 1e-9 * q.scale);
  }
}

TEST_CASE("crossbar_vmm") {
  CrossbarConfig cfg;
  const ConductanceTile tile{Matrix{{1, 2}, {3, 4}}, FaultMask::Zero(2, 2)};
  const Vector out = crossbar_vmm(tile, Vector{{0.5, 1.0}}, cfg);
  CHECK(out(0) == 3.5);
  CHECK(out(1) == 5.0);
  CHECK(crossbar_vmm(tile, Vector::Zero(2), cfg).isZero());
  const Vector one_hot = crossbar_vmm(tile, Vector{{0.0, 1.0}}, cfg);
  CHECK(one_hot(0) == 3.0);
  CHECK(one_hot(1) == 4.0);
  CHECK_THROWS_AS(crossbar_vmm(tile, Vector::Zero(3), cfg), DimensionError);
}

TEST_CASE("converters") {
  CrossbarConfig cfg;
  cfg.dac_bits = 3;  // 3 levels per side
  const Vector v = dac_quantize(Vector{{0.2, 0.05, -0.3, 0.0}}, cfg);
  CHECK(v(0) == doctest::Approx(0.2));
  CHECK(v(1) == doctest::Approx(0.2 / 3));
  CHECK(v(2) == doctest::Approx(-0.2));
  CHECK(v(3) == 0.0);

  cfg.adc_bits = 8;
  const double fs = cfg.full_scale_current();
  CHECK(adc_quantize(fs * 2, cfg) == doctest::Approx(fs));
  CHECK(adc_quantize(-fs * 2, cfg) == doctest::Approx(-fs));
  Rng rng(4);
  std::uniform_real_distribution<double> u(-fs, fs);
  for (int i = 0; i < 1000; ++i) {
    const double c = u(rng);
    CHECK(std::abs(adc_quantize(c, cfg) - c) <= cfg.adc_step() / 2 * (1 + 1e-9));
  }
}

TEST_CASE("mvm against the exact quantized product") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    std::uniform_int_distribution<Eigen::Index> dim(1, 300);
    const Matrix w = random_matrix(dim(rng), dim(rng), rng);
    const Vector x = random_vector(w.cols(), rng);
    const Vector exact = reference_quantize(w, 8) * x;
    for (bool differential : {true, false}) {
      CrossbarConfig cfg;
      cfg.differential = differential;
      const Vector y = mvm(map_weights(w, cfg, 8), x);
      CHECK((y - exact).norm() <= 1e-9 * exact.norm());

      cfg.adc_bits = 8;
      const auto layer = map_weights(w, cfg, 8);
      const double bound = mvm_adc_error_bound(layer, x);
      CHECK((mvm(layer, x) - exact).cwiseAbs().maxCoeff() <= bound);
    }
  }
  CrossbarConfig cfg;
  const auto layer = map_weights(random_matrix(5, 6, rng), cfg, 8);
  CHECK(mvm(layer, Vector::Zero(6)).isZero());
  CHECK_THROWS_AS(mvm(layer, Vector::Zero(5)), DimensionError);
}

TEST_CASE("more ADC bits never increase the worst error") {
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix w = random_matrix(150, 140, rng);
    const Vector x = random_vector(140, rng);
    const Vector exact = reference_quantize(w, 8) * x;
    double previous = INFINITY;
    for (int bits : {4, 6, 8, 10}) {
      CrossbarConfig cfg;
      cfg.adc_bits = bits;
      const double err = (mvm(map_weights(w, cfg, 8), x) - exact).cwiseAbs().maxCoeff();
      CHECK(err <= previous);
      previous = err;
    }
  }
}

TEST_CASE("single stuck-high cell") {
  CrossbarConfig cfg;
  cfg.rows = cfg.cols = 8;
  Rng rng(7);
  const Matrix w = random_matrix(6, 5, rng);
  auto layer = map_weights(w, cfg, 8);
  const Matrix before = reconstruct_weights(layer);
  const std::size_t slice = 1;
  auto& tile = layer.tile(0, 0, slice, 0);
  const Eigen::Index in = 2, out = 3;
  const double g_cell = tile.conductance(in, out);
  tile.conductance(in, out) = cfg.g_max;
  tile.faults(in, out) = static_cast<std::uint8_t>(Fault::stuck_high);
  Matrix delta = reconstruct_weights(layer) - before;
  const double expected = layer.c1 * (cfg.g_max - g_cell) * layer.slice_weights[slice];
  CHECK(delta(out, in) == doctest::Approx(expected).epsilon(1e-9));
  delta(out, in) = 0.0;
  CHECK(delta.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("all cells stuck low") {
  CrossbarConfig cfg;
  Rng rng(8);
  auto layer = map_weights(random_matrix(10, 12, rng), cfg, 8);
  for (auto& t : layer.tiles) {
    t.conductance.setConstant(cfg.g_min);
    t.faults.setConstant(static_cast<std::uint8_t>(Fault::stuck_low));
  }
  CHECK(reconstruct_weights(layer).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tile reader sees every tile once per call") {
  CrossbarConfig cfg;
  cfg.rows = cfg.cols = 16;
  Rng rng(9);
  const Matrix w = random_matrix(20, 40, rng);
  const auto layer = map_weights(w, cfg, 8);
  std::vector<int> seen(layer.tiles.size(), 0);
  const Vector x = random_vector(40, rng);
  const Vector y = mvm(layer, x, [&](std::size_t idx, const ConductanceTile& t, const Vector& v) {
    ++seen[idx];
    return crossbar_vmm(t, v, layer.config);
  });
  for (int s : seen) CHECK(s == 1);
  CHECK(y == mvm(layer, x));
}
