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

#include <cstdint>
#include <span>

#include "aerobust/nn/model.hpp"

namespace aerobust::attack {

enum class Norm { kL2, kLinf };

struct AttackConfig {
  Norm norm = Norm::kLinf;
  double epsilon = 0.1;
  double alpha = 0.01;
  std::size_t steps = 20;
  // Step along g / ||g||_inf instead of sign(g) for the l-inf attack.
  bool literal_linf_step = false;
  // Start from a uniform draw in the ball instead of delta = 0.
  bool random_start = false;
  std::uint64_t seed = 0;

  void validate() const;
};

double lp_norm(std::span<const double> v, Norm p);

// Euclidean projection onto the l-p ball of radius eps around 0.
nn::Tensor project_lp(const nn::Tensor& delta, Norm p, double eps);

// x + eps * sign(grad_x L), ascending the loss.
nn::Tensor fgsm(const nn::Model& m, const nn::Tensor& x, std::span<const double> y, double eps);

// Projected gradient ascent from delta_0 = 0; returns x + delta.
nn::Tensor pgd(const nn::Model& m, const nn::Tensor& x, std::span<const double> y, const AttackConfig& cfg);

}  // namespace aerobust::attack
