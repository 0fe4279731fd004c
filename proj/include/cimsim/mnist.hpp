#pragma once

// MNIST in IDX format (big-endian headers, one byte per pixel or label).

#include "cimsim/core.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace cimsim {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr Eigen::Index kMnistSide = 28;
inline constexpr Eigen::Index kMnistPixels = kMnistSide * kMnistSide;

enum class Split { train, test };
std::string to_string(Split s);

struct DatasetHandle {
  Matrix images;            // n x 784, values in [0, 1]
  std::vector<int> labels;  // n, values in [0, 10)
  Split split = Split::train;
  std::optional<std::size_t> subset;

  std::size_t size() const noexcept { return labels.size(); }
};

/// Throws DataError on bad magic, wrong image size or truncation.
Matrix read_idx_images(const std::filesystem::path& file);
std::vector<int> read_idx_labels(const std::filesystem::path& file);

/// Reads {train,t10k}-{images-idx3,labels-idx1}-ubyte from `dir`.
DatasetHandle load_mnist(const std::filesystem::path& dir, Split split);

/// First n rows after a seeded shuffle; n >= size() returns the whole set
/// in its original order.
DatasetHandle take_subset(const DatasetHandle& data, std::size_t n, std::uint64_t seed);

/// $CIMSIM_MNIST_DIR if set, otherwise `configured`.
std::filesystem::path resolve_mnist_dir(const std::filesystem::path& configured);

}  // namespace cimsim
