#include "cimsim/an_code.hpp"

#include <bit>
#include <limits>
#include <unordered_map>

namespace cimsim {

int ANCodeConfig::codeword_bits() const {
  const auto max_mag = static_cast<std::uint64_t>(K) * ((std::uint64_t{1} << operand_bits) - 1);
  return std::bit_width(max_mag) + 1;
}

std::vector<std::int64_t> ANCodeConfig::single_bit_errors(int positions) {
  std::vector<std::int64_t> out;
  for (int i = 0; i < positions; ++i) {
    out.push_back(std::int64_t{1} << i);
    out.push_back(-(std::int64_t{1} << i));
  }
  return out;
}

std::vector<std::int64_t> ANCodeConfig::errors() const {
  return error_model ? *error_model : single_bit_errors(codeword_bits());
}

SyndromeCollision::SyndromeCollision(std::int64_t K, std::int64_t first, std::int64_t second,
                                     std::int64_t residue)
    : ConfigError("AN code K=" + std::to_string(K) + ": errors " + std::to_string(first) + " and " +
                  std::to_string(second) + " share residue " + std::to_string(residue)),
      first_(first),
      second_(second),
      residue_(residue) {}

void ANCodeConfig::validate() const {
  if (K < 3 || K % 2 == 0) throw ConfigError("AN code K must be odd and >= 3, got " + std::to_string(K));
  if (operand_bits < 1 || operand_bits > 30)
    throw ConfigError("AN code operand_bits must be in [1, 30], got " + std::to_string(operand_bits));
  if (K > (std::int64_t{1} << 30)) throw ConfigError("AN code K too large");
  std::unordered_map<std::int64_t, std::int64_t> seen{{0, 0}};
  for (std::int64_t e : errors()) {
    if (e == 0) throw ConfigError("AN code error model contains 0");
    const std::int64_t r = residue(e, K);
    auto [it, fresh] = seen.emplace(r, e);
    if (!fresh) {
      if (it->second == e) continue;
      throw SyndromeCollision(K, it->second, e, r);
    }
  }
}

CorrectionTable CorrectionTable::build(const ANCodeConfig& cfg) {
  cfg.validate();
  CorrectionTable t;
  t.map_.assign(static_cast<std::size_t>(cfg.K), std::nullopt);
  t.map_[0] = 0;
  for (std::int64_t e : cfg.errors()) t.map_[static_cast<std::size_t>(residue(e, cfg.K))] = -e;
  return t;
}

std::size_t CorrectionTable::correctable_count() const {
  std::size_t n = 0;
  for (std::size_t r = 1; r < map_.size(); ++r) n += map_[r].has_value();
  return n;
}

std::int64_t encode(std::int64_t x, std::int64_t K, int operand_bits) {
  if (operand_bits < 1 || operand_bits > 62) throw ConfigError("operand_bits out of range");
  const std::int64_t limit = std::int64_t{1} << operand_bits;
  if (x <= -limit || x >= limit)
    throw std::overflow_error("AN encode: operand " + std::to_string(x) + " exceeds " +
                              std::to_string(operand_bits) + " bits");
  std::int64_t y = 0;
  if (__builtin_mul_overflow(x, K, &y)) throw std::overflow_error("AN encode: codeword overflow");
  return y;
}

std::int64_t encode(std::int64_t x, const ANCodeConfig& cfg) { return encode(x, cfg.K, cfg.operand_bits); }

std::string to_string(DecodeStatus s) {
  switch (s) {
    case DecodeStatus::clean: return "clean";
    case DecodeStatus::corrected: return "corrected";
    case DecodeStatus::uncorrectable: return "uncorrectable";
  }
  return "unknown";
}

Decoded decode_correct(std::int64_t y, const ANCodeConfig& cfg, const CorrectionTable& table) {
  if (table.K() != cfg.K) throw ConfigError("correction table built for a different K");
  const std::int64_t r = residue(y, cfg.K);
  if (r == 0) return {y / cfg.K, DecodeStatus::clean};
  const auto fix = table[r];
  if (!fix) return {0, DecodeStatus::uncorrectable};
  const std::int64_t corrected = y + *fix;
  if (residue(corrected, cfg.K) != 0) return {0, DecodeStatus::uncorrectable};
  return {corrected / cfg.K, DecodeStatus::corrected};
}

Decoded checked_dot(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                    const ANCodeConfig& cfg, const CorrectionTable& table, const FaultInjector& inject,
                    int accumulator_bits) {
  if (a.size() != b.size())
    throw DimensionError("checked_dot: lengths " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  if (accumulator_bits < 2 || accumulator_bits > 64) throw ConfigError("accumulator_bits must be in [2, 64]");
  const std::int64_t hi = accumulator_bits == 64 ? std::numeric_limits<std::int64_t>::max()
                                                 : (std::int64_t{1} << (accumulator_bits - 1)) - 1;
  const std::int64_t lo = -hi - 1;
  auto check = [&](std::int64_t v, bool overflowed) {
    if (overflowed || v > hi || v < lo)
      throw std::overflow_error("checked_dot: accumulator leaves " + std::to_string(accumulator_bits) +
                                "-bit range");
  };
  std::int64_t acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::int64_t p = 0;
    check(p, __builtin_mul_overflow(encode(a[i], cfg), b[i], &p));
    check(acc, __builtin_add_overflow(acc, p, &acc));
  }
  if (inject) {
    acc = inject(acc);
    check(acc, false);
  }
  return decode_correct(acc, cfg, table);
}

std::int64_t flip_bit(std::int64_t y, int bit, int width) {
  if (width < 2 || width > 63 || bit < 0 || bit >= width) throw std::out_of_range("flip_bit: bad position");
  const std::uint64_t mask = (std::uint64_t{1} << width) - 1;
  const std::uint64_t word = (static_cast<std::uint64_t>(y) & mask) ^ (std::uint64_t{1} << bit);
  const std::uint64_t sign = std::uint64_t{1} << (width - 1);
  return static_cast<std::int64_t>((word ^ sign)) - static_cast<std::int64_t>(sign);
}

std::size_t EccCampaign::modeled_trials() const {
  std::size_t n = 0;
  for (const auto& b : per_bit) n += b.trials;
  return n;
}

std::size_t EccCampaign::modeled_corrected() const {
  std::size_t n = 0;
  for (const auto& b : per_bit) n += b.corrected;
  return n;
}

std::size_t EccCampaign::miscorrections() const {
  std::size_t n = 0;
  for (const auto& b : per_bit) n += b.miscorrected;
  return n;
}

std::size_t EccCampaign::false_clean() const {
  std::size_t n = 0;
  for (const auto& b : per_bit) n += b.reported_clean;
  return n;
}

EccCampaign ecc_campaign(const ANCodeConfig& cfg, const CorrectionTable& table, int flip_positions) {
  if (table.K() != cfg.K) throw ConfigError("correction table built for a different K");
  EccCampaign c;
  c.K = cfg.K;
  c.operand_bits = cfg.operand_bits;
  c.codeword_bits = cfg.codeword_bits();
  if (flip_positions < 0 || flip_positions > c.codeword_bits)
    throw std::invalid_argument("flip_positions exceeds the codeword width");
  c.per_bit.resize(static_cast<std::size_t>(flip_positions));
  for (int i = 0; i < flip_positions; ++i) c.per_bit[static_cast<std::size_t>(i)].bit = i;

  const std::int64_t limit = (std::int64_t{1} << cfg.operand_bits) - 1;
  for (std::int64_t x = -limit; x <= limit; ++x) {
    const std::int64_t y = encode(x, cfg);
    const Decoded d0 = decode_correct(y, cfg, table);
    ++c.clean_trials;
    c.clean_ok += d0.status == DecodeStatus::clean && d0.value == x;

    for (int i = 0; i < flip_positions; ++i) {
      auto& s = c.per_bit[static_cast<std::size_t>(i)];
      const Decoded d = decode_correct(flip_bit(y, i, c.codeword_bits), cfg, table);
      ++s.trials;
      switch (d.status) {
        case DecodeStatus::clean: ++s.reported_clean; break;
        case DecodeStatus::corrected: d.value == x ? ++s.corrected : ++s.miscorrected; break;
        case DecodeStatus::uncorrectable: ++s.flagged; break;
      }
    }
    for (std::int64_t r = 1; r < cfg.K; ++r) {
      if (table[r]) continue;
      ++c.unmodeled_trials;
      c.unmodeled_flagged += decode_correct(y + r, cfg, table).status == DecodeStatus::uncorrectable;
    }
  }
  return c;
}

int correctable_bit_positions(std::int64_t K) {
  if (K < 3 || K % 2 == 0) throw ConfigError("AN code K must be odd and >= 3");
  for (int p = 1; p < 62; ++p) {
    ANCodeConfig cfg;
    cfg.K = K;
    cfg.error_model = ANCodeConfig::single_bit_errors(p);
    try {
      cfg.validate();
    } catch (const SyndromeCollision&) {
      return p - 1;
    }
  }
  return 61;
}

std::int64_t smallest_full_coverage_K(int operand_bits) {
  for (std::int64_t K = 3; K < (std::int64_t{1} << 20); K += 2) {
    ANCodeConfig cfg;
    cfg.K = K;
    cfg.operand_bits = operand_bits;
    if (correctable_bit_positions(K) >= cfg.codeword_bits()) return K;
  }
  throw std::runtime_error("no K below 2^20 covers every codeword bit");
}

}  // namespace cimsim
