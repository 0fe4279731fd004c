#include "cimsim/mnist.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <numeric>

namespace cimsim {

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open " + file.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void require_size(const std::filesystem::path& file, std::size_t expected, std::size_t actual) {
  if (actual < expected)
    throw DataError(file.string() + ": truncated, expected " + std::to_string(expected) +
                    " bytes, found " + std::to_string(actual));
  if (actual > expected)
    throw DataError(file.string() + ": " + std::to_string(actual - expected) +
                    " trailing bytes after " + std::to_string(expected) + " expected");
}

std::string hex(std::uint32_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s = "0x00000000";
  for (int i = 0; i < 8; ++i) s[9 - static_cast<std::size_t>(i)] = digits[(v >> (4 * i)) & 0xf];
  return s;
}

void require_magic(const std::filesystem::path& file, const std::vector<unsigned char>& b,
                   std::uint32_t magic, std::size_t header) {
  if (b.size() < header)
    throw DataError(file.string() + ": truncated header, expected " + std::to_string(header) +
                    " bytes, found " + std::to_string(b.size()));
  const std::uint32_t got = be32(b, 0);
  if (got != magic) throw DataError(file.string() + ": bad magic " + hex(got) + ", expected " + hex(magic));
}

}  // namespace

Matrix read_idx_images(const std::filesystem::path& file) {
  const auto b = slurp(file);
  require_magic(file, b, kIdxImageMagic, 16);
  const std::uint32_t n = be32(b, 4), rows = be32(b, 8), cols = be32(b, 12);
  if (rows != kMnistSide || cols != kMnistSide)
    throw DataError(file.string() + ": images are " + std::to_string(rows) + "x" + std::to_string(cols) +
                    ", expected 28x28");
  require_size(file, 16 + std::size_t{n} * kMnistPixels, b.size());
  Matrix images(static_cast<Eigen::Index>(n), kMnistPixels);
  for (Eigen::Index i = 0; i < images.size(); ++i)
    images.data()[i] = b[16 + static_cast<std::size_t>(i)] / 255.0;
  return images;
}

std::vector<int> read_idx_labels(const std::filesystem::path& file) {
  const auto b = slurp(file);
  require_magic(file, b, kIdxLabelMagic, 8);
  const std::uint32_t n = be32(b, 4);
  require_size(file, 8 + std::size_t{n}, b.size());
  std::vector<int> labels(b.begin() + 8, b.end());
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] > 9) throw DataError(file.string() + ": label " + std::to_string(labels[i]) + " at index " +
                                       std::to_string(i) + " is not a digit");
  return labels;
}

DatasetHandle load_mnist(const std::filesystem::path& dir, Split split) {
  const std::string prefix = split == Split::train ? "train" : "t10k";
  DatasetHandle d;
  d.split = split;
  d.images = read_idx_images(dir / (prefix + "-images-idx3-ubyte"));
  d.labels = read_idx_labels(dir / (prefix + "-labels-idx1-ubyte"));
  if (static_cast<std::size_t>(d.images.rows()) != d.labels.size())
    throw DataError("MNIST " + prefix + ": " + std::to_string(d.images.rows()) + " images but " +
                    std::to_string(d.labels.size()) + " labels");
  return d;
}

DatasetHandle take_subset(const DatasetHandle& data, std::size_t n, std::uint64_t seed) {
  if (n >= data.size()) return data;
  std::vector<Eigen::Index> order(data.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng = make_rng(derive_seed(seed, "subset"));
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(n);
  DatasetHandle out;
  out.split = data.split;
  out.subset = n;
  out.images = data.images(order, Eigen::all);
  out.labels.reserve(n);
  for (auto i : order) out.labels.push_back(data.labels[static_cast<std::size_t>(i)]);
  return out;
}

std::filesystem::path resolve_mnist_dir(const std::filesystem::path& configured) {
  if (const char* env = std::getenv("CIMSIM_MNIST_DIR"); env && *env) return env;
  return configured;
}

}  // namespace cimsim
