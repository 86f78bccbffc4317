/* Copyright 2026 The aerobust Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aerobust/nn/tensor.hpp"

namespace aerobust::nn {

using Json = nlohmann::json;

struct Parameter {
  std::string name;
  Tensor value;
  bool trainable = true;
  // Uniform(-init_bound, init_bound) on initialize(); 0 keeps the constructed value.
  double init_bound = 0.0;
};

// Per-call activation record. Forward pushes one frame per layer; backward
// pops them in reverse. Keeping this outside the layers lets one model serve
// many concurrent forward/backward passes.
class Tape {
 public:
  // With track_branches set, piecewise layers (ReLU, MaxPool2D) fold their
  // branch decisions into branch_hash().
  explicit Tape(bool track_branches = false) : track_(track_branches) {}

  void push(std::vector<Tensor> saved) { frames_.push_back(std::move(saved)); }
  std::vector<Tensor> pop();
  bool empty() const { return frames_.empty(); }

  bool tracks_branches() const { return track_; }
  void note_branch(std::uint64_t v);
  std::uint64_t branch_hash() const { return hash_; }

 private:
  std::vector<std::vector<Tensor>> frames_;
  bool track_;
  std::uint64_t hash_ = 0;
};

// Parameter gradients, one tensor per slot of Model::parameters().
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::vector<Tensor> grads) : grads_(std::move(grads)) {}

  Tensor& operator[](std::size_t slot) { return grads_[slot]; }
  const Tensor& operator[](std::size_t slot) const { return grads_[slot]; }
  std::size_t size() const { return grads_.size(); }
  void zero();
  Gradients& operator+=(const Gradients& other);

 private:
  std::vector<Tensor> grads_;
};

class Layer;

// Flat view of a parameter plus the gradient slot it writes to.
struct ParameterRef {
  std::string path;
  Parameter* param;
};

class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  // Hyperparameters; together with kind() this rebuilds the layer.
  virtual Json config() const { return Json::object(); }
  // Throws ArgumentError when the input shape is incompatible.
  virtual Shape output_shape(const Shape& in) const = 0;

  virtual Tensor forward(const Tensor& x, Tape* tape) const = 0;
  // `grads` may be null when only the input gradient is wanted.
  virtual Tensor backward(const Tensor& grad_out, Tape& tape, Gradients* grads) const = 0;

  // Sub-layers in forward order.
  virtual std::vector<Layer*> children() { return {}; }
  std::vector<const Layer*> children() const;

  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }

  // Gradient slot of params()[i]; assigned when the owning model is built.
  std::size_t slot(std::size_t i) const { return slots_.at(i); }
  void set_slots(std::vector<std::size_t> slots) { slots_ = std::move(slots); }

 protected:
  Parameter& add_param(std::string name, Shape shape, double init_bound, double fill = 0.0,
                       bool trainable = true);
  const Tensor& p(std::size_t i) const { return params_[i].value; }
  Tensor* grad(Gradients* grads, std::size_t i) const { return grads ? &(*grads)[slots_.at(i)] : nullptr; }

 private:
  std::vector<Parameter> params_;
  std::vector<std::size_t> slots_;
};

using LayerPtr = std::unique_ptr<Layer>;

// (C, H, W) -> (O, H', W'); weight (O, C, kh, kw), bias (O).
class Conv2D final : public Layer {
 public:
  Conv2D(std::size_t in_ch, std::size_t out_ch, std::size_t kernel_h, std::size_t kernel_w, std::size_t stride_h,
         std::size_t stride_w, std::size_t pad_h, std::size_t pad_w);
  Conv2D(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride = 1, std::size_t pad = 0)
      : Conv2D(in_ch, out_ch, kernel, kernel, stride, stride, pad, pad) {}

  std::string kind() const override { return "conv2d"; }
  Json config() const override;
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, Tape& tape, Gradients* grads) const override;

 private:
  std::size_t in_ch_, out_ch_, kh_, kw_, sh_, sw_, ph_, pw_;
};

class ReLU final : public Layer {
 public:
  std::string kind() const override { return "relu"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, Tape& tape, Gradients* grads) const override;
};

class Sigmoid final : public Layer {
 public:
  std::string kind() const override { return "sigmoid"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, Tape& tape, Gradients* grads) const override;
};

// Non-overlapping k x k max pooling on (C, H, W); trailing rows/cols dropped.
class MaxPool2D final : public Layer {
 public:
  explicit MaxPool2D(std::size_t k) : MaxPool2D(k, k) {}
  MaxPool2D(std::size_t kh, std::size_t kw);

  std::string kind() const override { return "maxpool2d"; }
  Json config() const override { return {{"kh", kh_}, {"kw", kw_}}; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, Tape& tape, Gradients* grads) const override;

 private:
  std::size_t kh_, kw_;
};

// Acts on the last axis: (..., in) -> (..., out).
class Linear final : public Layer {
 public:
  Linear(std::size_t in, std::size_t out);

  std::string kind() const override { return "linear"; }
  Json config() const override { return {{"in", in_}, {"out", out_}}; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, Tape& tape, Gradients* grads) const override;

 private:
  std::size_t in_, out_;
};

// Normalizes the last axis.
class LayerNorm final : public Layer {
 public:
  explicit LayerNorm(std::size_t dim, double eps = 1e-5);

  std::string kind() const override { return "layernorm"; }
  Json config() const override { return {{"dim", dim_}, {"eps", eps_}}; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, Tape& tape, Gradients* grads) const override;

 private:
  std::size_t dim_;
  double eps_;
};

// (T, D) -> (T, D), scaled dot-product attention over all T tokens.
class MultiHeadSelfAttention final : public Layer {
 public:
  MultiHeadSelfAttention(std::size_t dim, std::size_t heads);

  std::string kind() const override { return "mhsa"; }
  Json config() const override { return {{"dim", dim_}, {"heads", heads_}}; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, Tape& tape, Gradients* grads) const override;

 private:
  std::size_t dim_, heads_;
};

// Adds the sinusoidal table for the actual sequence length, so any T works.
class SinusoidalPositionalEncoding final : public Layer {
 public:
  explicit SinusoidalPositionalEncoding(std::size_t dim) : dim_(dim) {}

  std::string kind() const override { return "posenc"; }
  Json config() const override { return {{"dim", dim_}}; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, Tape& tape, Gradients* grads) const override;

  static double value(std::size_t pos, std::size_t i, std::size_t dim);

 private:
  std::size_t dim_;
};

// GRU cell unrolled over a sequence: (T, in) -> (T, hidden). Gate order in the
// stacked weights is reset, update, candidate.
class Gru final : public Layer {
 public:
  Gru(std::size_t in, std::size_t hidden, bool reverse = false);

  std::string kind() const override { return "gru"; }
  Json config() const override { return {{"in", in_}, {"hidden", hidden_}, {"reverse", reverse_}}; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, Tape& tape, Gradients* grads) const override;

 private:
  std::size_t in_, hidden_;
  bool reverse_;
};

// (T, D) -> (D) and (C, H, W) -> (C).
class GlobalMeanPool final : public Layer {
 public:
  std::string kind() const override { return "meanpool"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, Tape& tape, Gradients* grads) const override;
};

// Fixed affine map (x - mean) * scale, set from training statistics.
class Standardize final : public Layer {
 public:
  Standardize(double mean = 0.0, double scale = 1.0);

  std::string kind() const override { return "standardize"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, Tape& tape, Gradients* grads) const override;

  void set(double mean, double scale);
};

// (H, W) -> (1, H, W). A nonzero `rows` pins H.
class AddChannelAxis final : public Layer {
 public:
  explicit AddChannelAxis(std::size_t rows = 0) : rows_(rows) {}

  std::string kind() const override { return "add_channel"; }
  Json config() const override { return {{"rows", rows_}}; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, Tape& tape, Gradients* grads) const override;

 private:
  std::size_t rows_;
};

// (C, F, T) -> (T, C*F): one token per time column.
class FlattenTime final : public Layer {
 public:
  std::string kind() const override { return "flatten_time"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, Tape& tape, Gradients* grads) const override;
};

// (C, R, K) -> (R*K, C): one token per spatial position, row-major.
class FlattenPatches final : public Layer {
 public:
  std::string kind() const override { return "flatten_patches"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, Tape& tape, Gradients* grads) const override;
};

class Sequential final : public Layer {
 public:
  Sequential() = default;
  explicit Sequential(std::vector<LayerPtr> layers) : layers_(std::move(layers)) {}

  Sequential& add(LayerPtr layer);
  template <class L, class... Args>
  Sequential& emplace(Args&&... args) {
    return add(std::make_unique<L>(std::forward<Args>(args)...));
  }

  std::string kind() const override { return "sequential"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, Tape& tape, Gradients* grads) const override;
  std::vector<Layer*> children() override;
  using Layer::children;
  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<LayerPtr> layers_;
};

// body(x) + shortcut(x); identity shortcut when none is given.
class Residual final : public Layer {
 public:
  explicit Residual(LayerPtr body, LayerPtr shortcut = nullptr);

  std::string kind() const override { return "residual"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, Tape& tape, Gradients* grads) const override;
  std::vector<Layer*> children() override;
  using Layer::children;

 private:
  LayerPtr body_;
  LayerPtr shortcut_;
};

// Runs every branch on the same input and concatenates on the last axis.
class ParallelConcat final : public Layer {
 public:
  explicit ParallelConcat(std::vector<LayerPtr> branches);

  std::string kind() const override { return "parallel_concat"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, Tape& tape, Gradients* grads) const override;
  std::vector<Layer*> children() override;
  using Layer::children;

 private:
  std::vector<LayerPtr> branches_;
};

// Graph description round trip used by checkpoints.
Json describe(const Layer& layer);
LayerPtr layer_from_json(const Json& j);

}  // namespace aerobust::nn
