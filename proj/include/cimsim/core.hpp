#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cimsim {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

using Rng = std::mt19937_64;

// Shape or size disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A configuration value violates its declared invariant.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or unreadable input data (IDX files, model files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// splitmix64 finalizer; good avalanche for seed derivation.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a over a byte string.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of the stream identified by (seed, index). Identical pairs give
/// identical streams regardless of the order in which streams are created.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(seed ^ mix64(index ^ 0x5851f42d4c957f2dULL));
}

/// Per-subsystem stream: hash(master, subsystem-name, trial-index).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view subsystem,
                                    std::uint64_t trial = 0) noexcept {
  return stream_seed(mix64(master) ^ fnv1a64(subsystem), trial);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t index = 0) {
  return Rng(stream_seed(seed, index));
}

}  // namespace cimsim
