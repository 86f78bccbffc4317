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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aerobust/nn/layers.hpp"

namespace aerobust::nn {

struct LossAndGrad {
  double loss = 0.0;
  Tensor grad;
};

// Differentiable multi-label classifier: a layer graph producing logits,
// followed by a sigmoid head. Inference and gradient queries are const and
// safe to call concurrently; training mutates parameters.
class Model {
 public:
  Model(LayerPtr body, std::size_t n_classes, Json metadata = Json::object());

  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  std::size_t n_classes() const { return n_classes_; }
  const Json& metadata() const { return metadata_; }
  Json& metadata() { return metadata_; }
  const Layer& body() const { return *body_; }
  Layer& body() { return *body_; }

  // Throws ArgumentError unless the input shape maps to (n_classes).
  void check_input(const Shape& in) const;

  Tensor logits(const Tensor& x) const;
  // Per-class scores in (0, 1).
  Tensor forward(const Tensor& x) const;

  // Mean binary cross-entropy over classes and its exact gradient w.r.t. x.
  LossAndGrad loss_and_input_gradient(const Tensor& x, std::span<const double> y) const;

  // Loss; accumulates parameter gradients into `grads` and, when given,
  // writes the input gradient.
  double loss_and_gradients(const Tensor& x, std::span<const double> y, Gradients& grads,
                            Tensor* input_grad = nullptr) const;

  double loss(const Tensor& x, std::span<const double> y) const;

  // Hash of every ReLU sign and max-pool argmax taken on input x. Two inputs
  // with equal signatures lie in the same smooth piece of the network.
  std::uint64_t branch_signature(const Tensor& x) const;

  // Parameters in a fixed depth-first order; index == gradient slot.
  const std::vector<ParameterRef>& parameters() const { return params_; }
  Gradients make_gradients() const;
  std::size_t parameter_count() const;
  std::size_t trainable_parameter_count() const;

  // Draws every parameter with a nonzero init bound from a counter-based
  // stream keyed by (seed, parameter path).
  void initialize(std::uint64_t seed);

 private:
  void index_parameters();

  LayerPtr body_;
  std::size_t n_classes_;
  Json metadata_;
  std::vector<ParameterRef> params_;
};

double sigmoid(double z);
// Validates a {0,1} label vector of the given length.
void check_labels(std::span<const double> y, std::size_t n_classes);

// Checkpoint file: "APNN", u32 version, metadata JSON, graph JSON, then the
// named parameter tensors as little-endian doubles.
std::vector<std::uint8_t> to_bytes(const Model& m);
Model from_bytes(std::span<const std::uint8_t> bytes);
void save(const Model& m, const std::filesystem::path& path);
Model load(const std::filesystem::path& path);

}  // namespace aerobust::nn
