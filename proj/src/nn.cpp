#include "cimsim/nn.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

namespace cimsim {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense:
      return "dense";
    case LayerKind::relu:
      return "relu";
    case LayerKind::sigmoid:
      return "sigmoid";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(const std::string& name) {
  if (name == "dense") return LayerKind::dense;
  if (name == "relu") return LayerKind::relu;
  if (name == "sigmoid") return LayerKind::sigmoid;
  throw ConfigError("unknown layer kind '" + name + "'");
}

NetworkSpec::NetworkSpec(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ConfigError("network has no layers");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    if (l.in_dim < 1 || l.out_dim < 1)
      throw ConfigError("layer " + std::to_string(k) + ": dimensions must be positive");
    if (l.kind != LayerKind::dense && l.in_dim != l.out_dim)
      throw ConfigError("layer " + std::to_string(k) + ": activation must preserve width");
    if (k > 0 && layers_[k - 1].out_dim != l.in_dim)
      throw ConfigError("layer " + std::to_string(k) + ": in_dim " + std::to_string(l.in_dim) +
                        " does not chain with previous out_dim " +
                        std::to_string(layers_[k - 1].out_dim));
  }
}

NetworkSpec NetworkSpec::mlp(Eigen::Index in_dim, Eigen::Index hidden, Eigen::Index out_dim,
                             LayerKind activation) {
  if (activation == LayerKind::dense) throw ConfigError("mlp activation must be relu or sigmoid");
  return NetworkSpec({{LayerKind::dense, in_dim, hidden},
                      {activation, hidden, hidden},
                      {LayerKind::dense, hidden, out_dim}});
}

std::size_t NetworkSpec::dense_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(
      layers_.begin(), layers_.end(), [](const LayerSpec& l) { return l.kind == LayerKind::dense; }));
}

Tensor::Tensor(std::vector<Eigen::Index> shape, Vector data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.empty()) throw DimensionError("tensor shape must be nonempty");
  Eigen::Index n = 1;
  for (auto s : shape_) {
    if (s < 1) throw DimensionError("tensor dimensions must be positive");
    n *= s;
  }
  if (n != data_.size())
    throw DimensionError("tensor shape holds " + std::to_string(n) + " values, data has " +
                         std::to_string(data_.size()));
  if (!data_.allFinite()) throw DimensionError("tensor contains non-finite values");
}

Tensor::Tensor(Vector data) {
  const Eigen::Index n = data.size();
  *this = Tensor({n}, std::move(data));
}

Tensor forward(const NetworkSpec& net, const Parameters& params, const Tensor& input) {
  if (input.rank() != 1) throw DimensionError("forward expects a 1-D input tensor");
  return Tensor(forward(net, params, input.data()));
}

Eigen::Index argmax_predict(const Tensor& logits) {
  if (logits.rank() != 1) throw DimensionError("argmax expects 1-D logits");
  return argmax_predict(logits.data());
}

Parameters init_parameters(const NetworkSpec& net, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Parameters params;
  for (const auto& l : net.layers()) {
    if (l.kind != LayerKind::dense) continue;
    const double limit = std::sqrt(6.0 / static_cast<double>(l.in_dim + l.out_dim));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseParams<double> p;
    p.weight = Matrix::NullaryExpr(l.out_dim, l.in_dim, [&] { return dist(rng); });
    p.bias = Vector::Zero(l.out_dim);
    params.dense.push_back(std::move(p));
  }
  return params;
}

Parameters zeros_like(const Parameters& params) {
  Parameters out = params;
  for (auto& p : out.dense) {
    p.weight.setZero();
    p.bias.setZero();
  }
  return out;
}

}  // namespace cimsim
