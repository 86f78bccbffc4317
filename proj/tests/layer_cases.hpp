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

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "aerobust/nn/layers.hpp"
#include "aerobust/nn/model.hpp"

namespace aerobust::testutil {

using namespace aerobust::nn;

// Wraps one layer with a small readout so every layer kind gets a scalar loss.
struct LayerCase {
  std::string name;
  std::function<LayerPtr()> make;
  Shape input;
  std::size_t readout_dim;  // width of the feature fed to the readout
  enum Readout { kSequence, kPooled, kVector } readout;
};

inline Model wrap(const LayerCase& c) {
  auto body = std::make_unique<Sequential>();
  body->add(c.make());
  switch (c.readout) {
    case LayerCase::kSequence:
      body->emplace<Linear>(c.readout_dim, 3).emplace<GlobalMeanPool>();
      break;
    case LayerCase::kPooled:
      body->emplace<GlobalMeanPool>().emplace<Linear>(c.readout_dim, 3);
      break;
    case LayerCase::kVector:
      body->emplace<Linear>(c.readout_dim, 3);
      break;
  }
  Model m(std::move(body), 3);
  m.initialize(17);
  return m;
}

inline std::vector<LayerCase> layer_cases() {
  return {
      {"conv2d", [] { return std::make_unique<Conv2D>(2, 3, 3, 3, 2, 1, 1, 1); }, {2, 6, 7}, 3, LayerCase::kPooled},
      {"conv2d_patch", [] { return std::make_unique<Conv2D>(1, 4, 4, 4, 2, 2, 0, 0); }, {1, 8, 10}, 4, LayerCase::kPooled},
      {"relu", [] { return std::make_unique<ReLU>(); }, {5, 4}, 4, LayerCase::kSequence},
      {"sigmoid", [] { return std::make_unique<Sigmoid>(); }, {5, 4}, 4, LayerCase::kSequence},
      {"maxpool2d", [] { return std::make_unique<MaxPool2D>(2); }, {2, 4, 7}, 2, LayerCase::kPooled},
      {"linear", [] { return std::make_unique<Linear>(4, 6); }, {5, 4}, 6, LayerCase::kSequence},
      {"layernorm", [] { return std::make_unique<LayerNorm>(4); }, {5, 4}, 4, LayerCase::kSequence},
      {"mhsa", [] { return std::make_unique<MultiHeadSelfAttention>(6, 2); }, {7, 6}, 6, LayerCase::kSequence},
      {"posenc", [] { return std::make_unique<SinusoidalPositionalEncoding>(4); }, {5, 4}, 4, LayerCase::kSequence},
      {"gru", [] { return std::make_unique<Gru>(3, 4); }, {6, 3}, 4, LayerCase::kSequence},
      {"gru_reverse", [] { return std::make_unique<Gru>(3, 4, true); }, {6, 3}, 4, LayerCase::kSequence},
      {"meanpool", [] { return std::make_unique<GlobalMeanPool>(); }, {5, 4}, 4, LayerCase::kVector},
      {"meanpool_image", [] { return std::make_unique<GlobalMeanPool>(); }, {3, 4, 5}, 3, LayerCase::kVector},
      {"standardize", [] { return std::make_unique<Standardize>(0.3, 1.7); }, {5, 4}, 4, LayerCase::kSequence},
      {"flatten_time", [] { return std::make_unique<FlattenTime>(); }, {2, 3, 5}, 6, LayerCase::kSequence},
      {"flatten_patches", [] { return std::make_unique<FlattenPatches>(); }, {3, 2, 4}, 3, LayerCase::kSequence},
      {"residual",
       [] {
         auto body = std::make_unique<Sequential>();
         body->emplace<Linear>(4, 4).emplace<ReLU>().emplace<Linear>(4, 4);
         return std::make_unique<Residual>(std::move(body));
       },
       {5, 4}, 4, LayerCase::kSequence},
      {"residual_projection",
       [] { return std::make_unique<Residual>(std::make_unique<Linear>(4, 6), std::make_unique<Linear>(4, 6)); },
       {5, 4}, 6, LayerCase::kSequence},
      {"parallel_concat",
       [] {
         std::vector<LayerPtr> b;
         b.push_back(std::make_unique<Gru>(3, 2));
         b.push_back(std::make_unique<Gru>(3, 2, true));
         return std::make_unique<ParallelConcat>(std::move(b));
       },
       {6, 3}, 4, LayerCase::kSequence},
  };
}

}  // namespace aerobust::testutil
