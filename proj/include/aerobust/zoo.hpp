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
#include <string>
#include <string_view>

#include "aerobust/nn/model.hpp"

namespace aerobust::zoo {

enum class ModelFamily { kCnnTransformer, kViT, kResNetMini, kCRNN };

inline constexpr ModelFamily kAllFamilies[] = {ModelFamily::kViT, ModelFamily::kCnnTransformer,
                                               ModelFamily::kResNetMini, ModelFamily::kCRNN};

// Short CLI names: cnntrans, vit, resnet, crnn.
std::string family_name(ModelFamily f);
ModelFamily parse_family(std::string_view name);

// Desk-scale blueprint parameters. Conv widths are base_channels * width,
// doubled at the second and third block.
struct FamilyConfig {
  std::size_t n_classes = 10;
  std::size_t n_mels = 64;
  double width = 1.0;
  std::size_t base_channels = 4;
  std::size_t conv_blocks = 4;         // CNN front end of CnnTransformer and CRNN
  std::size_t transformer_layers = 2;  // CnnTransformer encoder depth
  std::size_t vit_layers = 2;          // ViT encoder depth
  std::size_t patch_f = 16;
  std::size_t patch_t = 16;
  std::size_t f_stride = 8;
  std::size_t t_stride = 8;
  std::size_t d_model = 16;
  std::size_t heads = 2;
  std::size_t ffn_mult = 2;
  std::size_t rnn_hidden = 16;

  void validate() const;
  std::size_t channels(std::size_t block) const;
  nn::Json to_json() const;
  static FamilyConfig from_json(const nn::Json& j);
};

struct PatchGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t n_patches = 0;
};

PatchGrid patch_grid(std::size_t n_mels, std::size_t n_frames, std::size_t patch_f, std::size_t patch_t,
                     std::size_t f_stride, std::size_t t_stride);

// Builds an initialized model taking (n_mels, T) log-mel input. The first
// layer is a fixed standardization, see set_input_normalization().
nn::Model build_model(ModelFamily family, const FamilyConfig& cfg, std::uint64_t seed = 0);

// Family recorded in a model built by build_model (or loaded from its checkpoint).
ModelFamily model_family(const nn::Model& m);
FamilyConfig model_config(const nn::Model& m);

// Smallest number of frames the family accepts.
std::size_t min_frames(ModelFamily family, const FamilyConfig& cfg);

void set_input_normalization(nn::Model& m, double mean, double stddev);

}  // namespace aerobust::zoo
