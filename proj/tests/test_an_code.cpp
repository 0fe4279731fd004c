#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cimsim/an_code.hpp"

#include <set>

using namespace cimsim;

namespace {

ANCodeConfig with_positions(std::int64_t K, int operand_bits, int positions) {
  ANCodeConfig c;
  c.K = K;
  c.operand_bits = operand_bits;
  c.error_model = ANCodeConfig::single_bit_errors(positions);
  return c;
}

}  // namespace

TEST_CASE("encode") {
  CHECK(encode(7, 19) == 133);
  CHECK(encode(-3, 19) == -57);
  CHECK(encode(0, 19) == 0);
  CHECK_THROWS_AS(encode(4096, 19, 12), std::overflow_error);
  CHECK_NOTHROW(encode(4095, 19, 12));
}

TEST_CASE("homomorphism over |a|, |b| <= 2^6") {
  for (std::int64_t a = -64; a <= 64; ++a)
    for (std::int64_t b = -64; b <= 64; ++b) {
      REQUIRE(encode(a, 19) + encode(b, 19) == encode(a + b, 19));
      REQUIRE(encode(a, 19) * b == encode(a * b, 19, 13));
    }
}

TEST_CASE("correction table") {
  SUBCASE("eight positions at K = 19") {
    const auto cfg = with_positions(19, 12, 8);
    const auto table = CorrectionTable::build(cfg);
    std::set<std::int64_t> residues;
    for (std::int64_t e : cfg.errors()) residues.insert(residue(e, 19));
    CHECK(residues.size() == 16);
    CHECK(table.correctable_count() == 16);
    CHECK(table[0] == 0);
    CHECK(table[4] == -4);
    CHECK(table[residue(-128, 19)] == 128);
  }
  SUBCASE("K = 7 with +1 and +8 collide") {
    ANCodeConfig cfg;
    cfg.K = 7;
    cfg.error_model = std::vector<std::int64_t>{1, 8};
    try {
      cfg.validate();
      FAIL("expected a collision");
    } catch (const SyndromeCollision& e) {
      CHECK(e.first() == 1);
      CHECK(e.second() == 8);
      CHECK(e.residue() == 1);
    }
  }
  SUBCASE("full-width single-bit model does not fit K = 19") {
    ANCodeConfig cfg;
    CHECK(cfg.codeword_bits() == 18);
    CHECK_THROWS_AS(CorrectionTable::build(cfg), SyndromeCollision);
    CHECK(correctable_bit_positions(19) == 9);
  }
  SUBCASE("bad parameters") {
    ANCodeConfig cfg;
    cfg.K = 18;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.K = 19;
    cfg.operand_bits = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("decode_correct") {
  const auto cfg = with_positions(19, 12, 8);
  const auto table = CorrectionTable::build(cfg);
  const auto d0 = decode_correct(encode(7, 19), cfg, table);
  CHECK(d0.value == 7);
  CHECK(d0.status == DecodeStatus::clean);

  const auto d1 = decode_correct(19 * 7 + 4, cfg, table);
  CHECK(d1.value == 7);
  CHECK(d1.status == DecodeStatus::corrected);

  SUBCASE("residue outside a four-position model") {
    const auto small = with_positions(19, 12, 4);
    CHECK(decode_correct(19 * 7 + 3, small, CorrectionTable::build(small)).status == DecodeStatus::uncorrectable);
  }
  SUBCASE("with eight positions, +3 aliases -16 and is miscorrected") {
    CHECK(residue(-16, 19) == 3);
    const auto d = decode_correct(19 * 7 + 3, cfg, table);
    CHECK(d.status == DecodeStatus::corrected);
    CHECK(d.value == 8);
  }
  CHECK(to_string(DecodeStatus::uncorrectable) == "uncorrectable");
}

TEST_CASE("checked_dot") {
  const auto cfg = with_positions(19, 12, 8);
  const auto table = CorrectionTable::build(cfg);
  Rng rng(1);
  std::uniform_int_distribution<std::int64_t> u(-4095, 4095);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::int64_t> a(16), b(16);
    std::int64_t exact = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = u(rng);
      b[i] = u(rng);
      exact += a[i] * b[i];
    }
    const auto clean = checked_dot(a, b, cfg, table);
    REQUIRE(clean.value == exact);
    REQUIRE(clean.status == DecodeStatus::clean);
    const auto fixed = checked_dot(a, b, cfg, table, [](std::int64_t y) { return y + 32; });
    REQUIRE(fixed.value == exact);
    REQUIRE(fixed.status == DecodeStatus::corrected);
  }
  const std::vector<std::int64_t> a{1, 2, 3}, b{4, 5, 6};
  const auto small = with_positions(19, 12, 4);
  CHECK(checked_dot(a, b, small, CorrectionTable::build(small), [](std::int64_t y) { return y + 3; }).status ==
        DecodeStatus::uncorrectable);
  CHECK_THROWS_AS(checked_dot(a, std::vector<std::int64_t>{1, 2}, cfg, table), DimensionError);

  const std::vector<std::int64_t> big(64, 4095);
  CHECK_THROWS_AS(checked_dot(big, big, cfg, table, {}, 24), std::overflow_error);
}

TEST_CASE("flip_bit") {
  CHECK(flip_bit(0, 3, 8) == 8);
  CHECK(flip_bit(8, 3, 8) == 0);
  CHECK(flip_bit(0, 7, 8) == -128);
  CHECK(flip_bit(-1, 0, 8) == -2);
  CHECK(flip_bit(-128, 7, 8) == 0);
}

TEST_CASE("exhaustive correction, soundness and detection at small widths") {
  for (std::int64_t K : {7, 11, 13, 19}) {
    const int positions = correctable_bit_positions(K);
    const auto cfg = with_positions(K, 5, positions);
    const auto table = CorrectionTable::build(cfg);
    for (std::int64_t x = -31; x <= 31; ++x) {
      const std::int64_t y = encode(x, cfg);
      for (std::int64_t e : cfg.errors()) {
        const auto d = decode_correct(y + e, cfg, table);
        REQUIRE(d.status == DecodeStatus::corrected);
        REQUIRE(d.value == x);
      }
      for (std::int64_t e = -300; e <= 300; ++e) {
        const auto d = decode_correct(y + e, cfg, table);
        if (residue(e, K) != 0) REQUIRE(d.status != DecodeStatus::clean);
      }
    }
  }
}

TEST_CASE("campaign over the correctable positions") {
  const auto cfg = with_positions(19, 8, 9);
  const auto table = CorrectionTable::build(cfg);
  const auto c = ecc_campaign(cfg, table, 9);
  CHECK(c.per_bit.size() == 9);
  CHECK(c.modeled_corrected() == c.modeled_trials());
  CHECK(c.miscorrections() == 0);
  CHECK(c.false_clean() == 0);
  CHECK(c.clean_ok == c.clean_trials);
  CHECK(c.unmodeled_flagged == c.unmodeled_trials);

  const auto wide = ecc_campaign(cfg, table, cfg.codeword_bits());
  CHECK(wide.miscorrections() > 0);
  CHECK(wide.false_clean() == 0);
}

TEST_CASE("smallest K covering a full codeword") {
  for (int bits : {4, 8}) {
    const std::int64_t K = smallest_full_coverage_K(bits);
    ANCodeConfig cfg;
    cfg.K = K;
    cfg.operand_bits = bits;
    CHECK_NOTHROW(CorrectionTable::build(cfg));
    for (std::int64_t smaller = 3; smaller < K; smaller += 2) {
      cfg.K = smaller;
      CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
  }
}
