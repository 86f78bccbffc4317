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
#include <functional>
#include <span>
#include <vector>

#include "aerobust/nn/model.hpp"

namespace aerobust::nn {

struct Example {
  Tensor x;
  std::vector<double> y;
};

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t epochs = 20;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

// Called after every epoch with (epoch index, mean loss).
using EpochCallback = std::function<void(std::size_t, double)>;

// Adam on mean BCE. Returns the mean training loss of every epoch, measured
// on the parameters each sample saw. Deterministic for a given seed regardless
// of `jobs`.
std::vector<double> train(Model& m, std::span<const Example> data, const TrainConfig& cfg,
                          const EpochCallback& on_epoch = {});

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  // Coordinates whose central difference is below the double-precision
  // resolution of the oracle (see grad_check).
  std::size_t skipped_unresolved = 0;
};

// Compares loss_and_input_gradient against central differences on up to
// `samples` input coordinates (all of them when the input is smaller).
// Coordinates whose probes x±h change a ReLU sign or max-pool argmax are
// skipped and replaced by the next random coordinate. So are coordinates where
// the predicted rounding noise of the difference, 8 eps sum_c |s_c - y_c|
// max(|z_c|, 1) / (C 2h), exceeds 1e-5 of its value: cancellation across
// classes leaves nothing the oracle can check at that precision.
GradCheckResult grad_check(const Model& m, const Tensor& x, std::span<const double> y, double h,
                           std::size_t samples = 100, std::uint64_t seed = 0);

// Same comparison for parameter gradients, sampled across all parameters.
GradCheckResult grad_check_parameters(Model& m, const Tensor& x, std::span<const double> y, double h,
                                      std::size_t samples = 100, std::uint64_t seed = 0);

}  // namespace aerobust::nn
