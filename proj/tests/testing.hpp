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

#include "aerobust/nn/model.hpp"
#include "aerobust/random.hpp"

namespace aerobust::testutil {

inline nn::Tensor random_tensor(nn::Shape shape, std::uint64_t seed, double scale = 1.0) {
  nn::Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rnd::normal(seed, i);
  return t;
}

// One-logit model z = w0 x0 + w1 x1 + b.
inline nn::Model logistic_model(double w0, double w1, double b) {
  nn::Model m(std::make_unique<nn::Linear>(2, 1), 1);
  auto& p = m.parameters();
  p[0].param->value[0] = w0;
  p[0].param->value[1] = w1;
  p[1].param->value[0] = b;
  return m;
}

}  // namespace aerobust::testutil
