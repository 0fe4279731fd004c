#pragma once

// AN arithmetic code: operands are multiplied by K, valid results are
// multiples of K and the residue of a corrupted result selects a correction.

#include "cimsim/core.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace cimsim {

struct ANCodeConfig {
  std::int64_t K = 19;
  int operand_bits = 12;
  // Correctable additive errors. Unset means single-bit flips over the
  // whole codeword, i.e. {+-2^i : i < codeword_bits()}.
  std::optional<std::vector<std::int64_t>> error_model;

  /// Two's-complement width that holds K*x for every |x| < 2^operand_bits.
  int codeword_bits() const;
  std::vector<std::int64_t> errors() const;
  /// Throws ConfigError, or SyndromeCollision if two errors share a residue.
  void validate() const;

  /// {+-2^i : i < positions}
  static std::vector<std::int64_t> single_bit_errors(int positions);
};

class SyndromeCollision : public ConfigError {
 public:
  SyndromeCollision(std::int64_t K, std::int64_t first, std::int64_t second, std::int64_t residue);

  std::int64_t first() const noexcept { return first_; }
  std::int64_t second() const noexcept { return second_; }
  std::int64_t residue() const noexcept { return residue_; }

 private:
  std::int64_t first_, second_, residue_;
};

/// Non-negative y mod K.
constexpr std::int64_t residue(std::int64_t y, std::int64_t K) noexcept {
  const std::int64_t r = y % K;
  return r < 0 ? r + K : r;
}

class CorrectionTable {
 public:
  static CorrectionTable build(const ANCodeConfig& cfg);

  std::int64_t K() const noexcept { return static_cast<std::int64_t>(map_.size()); }
  std::size_t size() const noexcept { return map_.size(); }
  /// Correction to add for residue r, or nullopt if r is uncorrectable.
  std::optional<std::int64_t> operator[](std::int64_t r) const { return map_.at(static_cast<std::size_t>(r)); }
  std::size_t correctable_count() const;

 private:
  std::vector<std::optional<std::int64_t>> map_;
};

/// K*x; throws std::overflow_error if |x| >= 2^operand_bits.
std::int64_t encode(std::int64_t x, std::int64_t K, int operand_bits = 12);
std::int64_t encode(std::int64_t x, const ANCodeConfig& cfg);

enum class DecodeStatus { clean, corrected, uncorrectable };
std::string to_string(DecodeStatus s);

struct Decoded {
  std::int64_t value = 0;  // meaningless when uncorrectable
  DecodeStatus status = DecodeStatus::clean;
};

Decoded decode_correct(std::int64_t y, const ANCodeConfig& cfg, const CorrectionTable& table);

/// Receives the encoded accumulator and returns the (possibly corrupted) value.
using FaultInjector = std::function<std::int64_t(std::int64_t)>;

/// sum encode(a_i) * b_i through decode_correct. The accumulator is a signed
/// integer of accumulator_bits; leaving its range throws std::overflow_error.
Decoded checked_dot(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                    const ANCodeConfig& cfg, const CorrectionTable& table,
                    const FaultInjector& inject = {}, int accumulator_bits = 48);

/// Flip bit `bit` of y viewed as a `width`-bit two's-complement word.
std::int64_t flip_bit(std::int64_t y, int bit, int width);

struct BitPositionStats {
  int bit = 0;
  std::size_t trials = 0;
  std::size_t corrected = 0;      // right value, status corrected
  std::size_t miscorrected = 0;   // wrong value reported as corrected
  std::size_t reported_clean = 0; // corrupted codeword reported as clean
  std::size_t flagged = 0;        // status uncorrectable
};

struct EccCampaign {
  std::int64_t K = 0;
  int operand_bits = 0;
  int codeword_bits = 0;
  std::vector<BitPositionStats> per_bit;
  std::size_t clean_trials = 0;
  std::size_t clean_ok = 0;
  std::size_t unmodeled_trials = 0;   // residues absent from the table
  std::size_t unmodeled_flagged = 0;

  std::size_t modeled_trials() const;
  std::size_t modeled_corrected() const;
  std::size_t miscorrections() const;
  std::size_t false_clean() const;
};

/// Every operand |x| < 2^operand_bits, every single-bit flip of K*x over
/// `flip_positions` codeword bits, and every residue missing from the table.
EccCampaign ecc_campaign(const ANCodeConfig& cfg, const CorrectionTable& table, int flip_positions);

/// Largest p such that single-bit errors over p positions have unique
/// syndromes for K.
int correctable_bit_positions(std::int64_t K);

/// Smallest odd K >= 3 whose codeword single-bit errors all have unique
/// syndromes for the given operand width.
std::int64_t smallest_full_coverage_K(int operand_bits);

}  // namespace cimsim
