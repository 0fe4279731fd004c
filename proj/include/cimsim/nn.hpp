#pragma once

// Dense feed-forward reference engine. Everything here is templated on the
// scalar type; the rest of the library uses the double instantiation.

#include "cimsim/core.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cimsim {

enum class LayerKind { dense, relu, sigmoid };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  Eigen::Index in_dim = 0;
  Eigen::Index out_dim = 0;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

class NetworkSpec {
 public:
  NetworkSpec() = default;
  explicit NetworkSpec(std::vector<LayerSpec> layers);

  /// dense(in, hidden) -> activation -> dense(hidden, out)
  static NetworkSpec mlp(Eigen::Index in_dim, Eigen::Index hidden, Eigen::Index out_dim,
                         LayerKind activation);

  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  Eigen::Index input_dim() const { return layers_.front().in_dim; }
  Eigen::Index output_dim() const { return layers_.back().out_dim; }
  std::size_t dense_count() const noexcept;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;

 private:
  std::vector<LayerSpec> layers_;
};

template <typename Scalar>
struct DenseParams {
  MatrixX<Scalar> weight;  // out_dim x in_dim
  VectorX<Scalar> bias;    // out_dim
};

/// One DenseParams per dense layer, in network order.
template <typename Scalar>
struct BasicParameters {
  std::vector<DenseParams<Scalar>> dense;

  std::size_t size() const noexcept { return dense.size(); }
  DenseParams<Scalar>& operator[](std::size_t i) { return dense[i]; }
  const DenseParams<Scalar>& operator[](std::size_t i) const { return dense[i]; }
};

using Parameters = BasicParameters<double>;
using Gradients = BasicParameters<double>;

/// Row-major n-d array with a validated shape.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<Eigen::Index> shape, Vector data);
  explicit Tensor(Vector data);

  const std::vector<Eigen::Index>& shape() const noexcept { return shape_; }
  const Vector& data() const noexcept { return data_; }
  Eigen::Index size() const noexcept { return data_.size(); }
  std::size_t rank() const noexcept { return shape_.size(); }

 private:
  std::vector<Eigen::Index> shape_;
  Vector data_;
};

// ---------------------------------------------------------------------------
// shape checks

template <typename Scalar>
bool same_shape(const BasicParameters<Scalar>& a, const BasicParameters<Scalar>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].weight.rows() != b[i].weight.rows() || a[i].weight.cols() != b[i].weight.cols() ||
        a[i].bias.size() != b[i].bias.size())
      return false;
  }
  return true;
}

/// Throws DimensionError if params do not match net or hold non-finite values.
template <typename Scalar>
void check_parameters(const NetworkSpec& net, const BasicParameters<Scalar>& params) {
  std::size_t d = 0;
  const auto& layers = net.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (layers[k].kind != LayerKind::dense) continue;
    if (d >= params.size())
      throw DimensionError("layer " + std::to_string(k) + ": missing dense parameters");
    const auto& p = params[d++];
    if (p.weight.rows() != layers[k].out_dim || p.weight.cols() != layers[k].in_dim ||
        p.bias.size() != layers[k].out_dim)
      throw DimensionError("layer " + std::to_string(k) + ": parameter shape " +
                           std::to_string(p.weight.rows()) + "x" +
                           std::to_string(p.weight.cols()) + " does not match " +
                           std::to_string(layers[k].out_dim) + "x" +
                           std::to_string(layers[k].in_dim));
    if (!p.weight.allFinite() || !p.bias.allFinite())
      throw DimensionError("layer " + std::to_string(k) + ": non-finite parameter");
  }
  if (d != params.size()) throw DimensionError("parameter set has extra dense layers");
}

// ---------------------------------------------------------------------------
// activations

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  return (Scalar(1) + (-z).exp()).inverse();
}

/// Row-wise numerically stable softmax.
template <typename Scalar>
MatrixX<Scalar> softmax_rows(const MatrixX<Scalar>& logits) {
  MatrixX<Scalar> out = logits.colwise() - logits.rowwise().maxCoeff();
  out = out.array().exp().matrix();
  out.array().colwise() /= out.rowwise().sum().array();
  return out;
}

template <typename Scalar>
VectorX<Scalar> softmax(const VectorX<Scalar>& logits) {
  VectorX<Scalar> e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

// ---------------------------------------------------------------------------
// forward

/// Forward pass over a batch (one sample per row). Returns pre-softmax logits.
template <typename Scalar>
MatrixX<Scalar> forward_batch(const NetworkSpec& net, const BasicParameters<Scalar>& params,
                              const MatrixX<Scalar>& inputs) {
  check_parameters(net, params);
  MatrixX<Scalar> a = inputs;
  std::size_t d = 0;
  const auto& layers = net.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (a.cols() != layers[k].in_dim)
      throw DimensionError("layer " + std::to_string(k) + ": input width " +
                           std::to_string(a.cols()) + " != in_dim " +
                           std::to_string(layers[k].in_dim));
    switch (layers[k].kind) {
      case LayerKind::dense: {
        const auto& p = params[d++];
        MatrixX<Scalar> z = a * p.weight.transpose();
        z.rowwise() += p.bias.transpose();
        a = std::move(z);
        break;
      }
      case LayerKind::relu:
        a = a.cwiseMax(Scalar(0));
        break;
      case LayerKind::sigmoid:
        a = sigmoid(a.array()).matrix();
        break;
    }
  }
  return a;
}

template <typename Scalar>
VectorX<Scalar> forward(const NetworkSpec& net, const BasicParameters<Scalar>& params,
                        const VectorX<Scalar>& input) {
  if (net.layers().empty()) throw DimensionError("empty network");
  if (input.size() != net.input_dim())
    throw DimensionError("layer 0: input length " + std::to_string(input.size()) +
                         " != in_dim " + std::to_string(net.input_dim()));
  MatrixX<Scalar> row = input.transpose();
  return forward_batch(net, params, row).row(0).transpose();
}

Tensor forward(const NetworkSpec& net, const Parameters& params, const Tensor& input);

/// Index of the largest logit; ties go to the lowest index.
template <typename Derived>
Eigen::Index argmax_predict(const Eigen::DenseBase<Derived>& logits) {
  if (logits.size() == 0) throw DimensionError("argmax of empty logits");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < logits.size(); ++i)
    if (logits(i) > logits(best)) best = i;
  return best;
}

Eigen::Index argmax_predict(const Tensor& logits);

/// Fraction of rows whose argmax matches the label.
template <typename Scalar>
double accuracy(const NetworkSpec& net, const BasicParameters<Scalar>& params,
                const MatrixX<Scalar>& inputs, std::span<const int> labels) {
  if (static_cast<std::size_t>(inputs.rows()) != labels.size())
    throw DimensionError("input/label count mismatch");
  if (labels.empty()) return 0.0;
  const MatrixX<Scalar> logits = forward_batch(net, params, inputs);
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    if (argmax_predict(logits.row(i)) == labels[static_cast<std::size_t>(i)]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------------------
// training primitives

template <typename Scalar>
struct LossAndGrad {
  Scalar loss{};
  BasicParameters<Scalar> grads;
};

/// Mean softmax cross-entropy over the batch and its exact gradient.
template <typename Scalar>
LossAndGrad<Scalar> loss_and_grad(const NetworkSpec& net, const BasicParameters<Scalar>& params,
                                  const MatrixX<Scalar>& inputs, std::span<const int> labels) {
  check_parameters(net, params);
  const Eigen::Index batch = inputs.rows();
  if (batch == 0) throw DimensionError("empty batch");
  if (static_cast<std::size_t>(batch) != labels.size())
    throw DimensionError("input/label count mismatch");
  const Eigen::Index classes = net.output_dim();
  for (int y : labels)
    if (y < 0 || y >= classes)
      throw std::out_of_range("label " + std::to_string(y) + " outside [0, " +
                              std::to_string(classes) + ")");

  const auto& layers = net.layers();
  // acts[k] is the input to layer k; acts.back() the logits.
  std::vector<MatrixX<Scalar>> acts;
  acts.reserve(layers.size() + 1);
  acts.push_back(inputs);
  std::size_t d = 0;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const MatrixX<Scalar>& a = acts.back();
    if (a.cols() != layers[k].in_dim)
      throw DimensionError("layer " + std::to_string(k) + ": input width mismatch");
    switch (layers[k].kind) {
      case LayerKind::dense: {
        const auto& p = params[d++];
        MatrixX<Scalar> z = a * p.weight.transpose();
        z.rowwise() += p.bias.transpose();
        acts.push_back(std::move(z));
        break;
      }
      case LayerKind::relu:
        acts.push_back(a.cwiseMax(Scalar(0)));
        break;
      case LayerKind::sigmoid:
        acts.push_back(sigmoid(a.array()).matrix());
        break;
    }
  }

  const MatrixX<Scalar> prob = softmax_rows(acts.back());
  LossAndGrad<Scalar> out;
  out.grads.dense.resize(params.size());
  Scalar loss(0);
  MatrixX<Scalar> delta = prob;
  for (Eigen::Index i = 0; i < batch; ++i) {
    const auto y = labels[static_cast<std::size_t>(i)];
    // log-softmax directly from the logits avoids log(0)
    const auto row = acts.back().row(i);
    const Scalar m = row.maxCoeff();
    loss += m + std::log((row.array() - m).exp().sum()) - row(y);
    delta(i, y) -= Scalar(1);
  }
  out.loss = loss / Scalar(batch);
  delta /= Scalar(batch);

  for (std::size_t k = layers.size(); k-- > 0;) {
    switch (layers[k].kind) {
      case LayerKind::dense: {
        const auto& p = params[--d];
        auto& g = out.grads[d];
        g.weight = delta.transpose() * acts[k];
        g.bias = delta.colwise().sum().transpose();
        if (k > 0) delta = delta * p.weight;
        break;
      }
      case LayerKind::relu:
        delta = (acts[k].array() > Scalar(0)).select(delta.array(), Scalar(0)).matrix();
        break;
      case LayerKind::sigmoid: {
        const auto& s = acts[k + 1].array();
        delta = (delta.array() * s * (Scalar(1) - s)).matrix();
        break;
      }
    }
  }
  return out;
}

/// params - lr * grads, elementwise.
template <typename Scalar>
BasicParameters<Scalar> sgd_step(const BasicParameters<Scalar>& params,
                                 const BasicParameters<Scalar>& grads, Scalar lr) {
  if (!same_shape(params, grads)) throw DimensionError("sgd_step: gradient shape mismatch");
  BasicParameters<Scalar> out = params;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].weight -= lr * grads[i].weight;
    out[i].bias -= lr * grads[i].bias;
  }
  return out;
}

/// Glorot-uniform weights, zero biases.
Parameters init_parameters(const NetworkSpec& net, std::uint64_t seed);

Parameters zeros_like(const Parameters& params);

}  // namespace cimsim
