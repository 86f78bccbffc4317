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

#include "aerobust/zoo.hpp"

#include <cmath>

#include "aerobust/error.hpp"

namespace aerobust::zoo {
namespace {

using namespace aerobust::nn;

void add_conv_blocks(Sequential& s, const FamilyConfig& cfg) {
  std::size_t in = 1;
  for (std::size_t b = 0; b < cfg.conv_blocks; ++b) {
    const std::size_t out = cfg.channels(b);
    s.emplace<Conv2D>(in, out, 3, 1, 1).emplace<ReLU>().emplace<MaxPool2D>(2);
    in = out;
  }
}

// Pre-norm encoder layer: x + MHSA(LN(x)), then x + FFN(LN(x)).
void add_encoder_layer(Sequential& s, std::size_t d, std::size_t heads, std::size_t ffn) {
  auto attn = std::make_unique<Sequential>();
  attn->emplace<LayerNorm>(d).emplace<MultiHeadSelfAttention>(d, heads);
  s.add(std::make_unique<Residual>(std::move(attn)));
  auto mlp = std::make_unique<Sequential>();
  mlp->emplace<LayerNorm>(d).emplace<Linear>(d, ffn).emplace<ReLU>().emplace<Linear>(ffn, d);
  s.add(std::make_unique<Residual>(std::move(mlp)));
}

std::size_t cnn_feature_dim(const FamilyConfig& cfg) {
  std::size_t f = cfg.n_mels;
  for (std::size_t b = 0; b < cfg.conv_blocks; ++b) f /= 2;
  return cfg.channels(cfg.conv_blocks - 1) * f;
}

LayerPtr cnn_transformer(const FamilyConfig& cfg) {
  auto s = std::make_unique<Sequential>();
  s->emplace<Standardize>().emplace<AddChannelAxis>(cfg.n_mels);
  add_conv_blocks(*s, cfg);
  s->emplace<FlattenTime>().emplace<Linear>(cnn_feature_dim(cfg), cfg.d_model);
  s->emplace<SinusoidalPositionalEncoding>(cfg.d_model);
  for (std::size_t l = 0; l < cfg.transformer_layers; ++l) {
    add_encoder_layer(*s, cfg.d_model, cfg.heads, cfg.d_model * cfg.ffn_mult);
  }
  s->emplace<LayerNorm>(cfg.d_model).emplace<GlobalMeanPool>().emplace<Linear>(cfg.d_model, cfg.n_classes);
  return s;
}

LayerPtr vit(const FamilyConfig& cfg) {
  auto s = std::make_unique<Sequential>();
  s->emplace<Standardize>().emplace<AddChannelAxis>(cfg.n_mels);
  s->emplace<Conv2D>(1, cfg.d_model, cfg.patch_f, cfg.patch_t, cfg.f_stride, cfg.t_stride, 0, 0);
  s->emplace<FlattenPatches>().emplace<SinusoidalPositionalEncoding>(cfg.d_model);
  for (std::size_t l = 0; l < cfg.vit_layers; ++l) {
    add_encoder_layer(*s, cfg.d_model, cfg.heads, cfg.d_model * cfg.ffn_mult);
  }
  s->emplace<LayerNorm>(cfg.d_model).emplace<GlobalMeanPool>().emplace<Linear>(cfg.d_model, cfg.n_classes);
  return s;
}

LayerPtr crnn(const FamilyConfig& cfg) {
  auto s = std::make_unique<Sequential>();
  s->emplace<Standardize>().emplace<AddChannelAxis>(cfg.n_mels);
  add_conv_blocks(*s, cfg);
  s->emplace<FlattenTime>();
  const std::size_t f = cnn_feature_dim(cfg);
  std::vector<LayerPtr> dirs;
  dirs.push_back(std::make_unique<Gru>(f, cfg.rnn_hidden, false));
  dirs.push_back(std::make_unique<Gru>(f, cfg.rnn_hidden, true));
  s->add(std::make_unique<ParallelConcat>(std::move(dirs)));
  s->emplace<GlobalMeanPool>().emplace<Linear>(2 * cfg.rnn_hidden, cfg.n_classes);
  return s;
}

// Stem conv (stride 2) + pool, then three residual stages each followed by
// a 2x2 pool.
constexpr std::size_t kResNetStages = 3;

LayerPtr resnet_mini(const FamilyConfig& cfg) {
  auto s = std::make_unique<Sequential>();
  s->emplace<Standardize>().emplace<AddChannelAxis>(cfg.n_mels);
  const std::size_t stem = cfg.channels(1);
  s->emplace<Conv2D>(1, stem, 3, 2, 1).emplace<ReLU>().emplace<MaxPool2D>(2);
  std::size_t in = stem;
  for (std::size_t st = 0; st < kResNetStages; ++st) {
    const std::size_t out = cfg.channels(st + 1);
    auto body = std::make_unique<Sequential>();
    body->emplace<Conv2D>(in, out, 3, 1, 1).emplace<ReLU>().emplace<Conv2D>(out, out, 3, 1, 1);
    LayerPtr shortcut = in == out ? nullptr : std::make_unique<Conv2D>(in, out, 1, 1, 0);
    s->add(std::make_unique<Residual>(std::move(body), std::move(shortcut)));
    s->emplace<ReLU>().emplace<MaxPool2D>(2);
    in = out;
  }
  s->emplace<GlobalMeanPool>().emplace<Linear>(in, cfg.n_classes);
  return s;
}

}  // namespace

std::string family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::kCnnTransformer:
      return "cnntrans";
    case ModelFamily::kViT:
      return "vit";
    case ModelFamily::kResNetMini:
      return "resnet";
    case ModelFamily::kCRNN:
      return "crnn";
  }
  throw ArgumentError("unknown model family");
}

ModelFamily parse_family(std::string_view name) {
  for (auto f : kAllFamilies) {
    if (family_name(f) == name) return f;
  }
  throw ArgumentError("unknown model family '" + std::string(name) + "' (expected vit, cnntrans, resnet, crnn)");
}

void FamilyConfig::validate() const {
  if (n_classes == 0 || n_mels == 0) throw ArgumentError("family config: n_classes and n_mels must be positive");
  if (!(width > 0.0)) throw ArgumentError("family config: width must be positive");
  if (base_channels == 0 || conv_blocks == 0) throw ArgumentError("family config: empty conv front end");
  if (f_stride == 0 || t_stride == 0) throw ArgumentError("family config: strides must be >= 1");
  if (patch_f == 0 || patch_t == 0 || patch_f > n_mels) throw ArgumentError("family config: bad patch size");
  if (heads == 0 || d_model % heads != 0) throw ArgumentError("family config: d_model must be a multiple of heads");
  if (ffn_mult == 0 || rnn_hidden == 0) throw ArgumentError("family config: zero ffn_mult or rnn_hidden");
  if ((n_mels >> conv_blocks) == 0) throw ArgumentError("family config: too many conv blocks for n_mels");
  if ((n_mels >> (kResNetStages + 2)) == 0) throw ArgumentError("family config: n_mels too small for ResNetMini");
}

std::size_t FamilyConfig::channels(std::size_t block) const {
  const std::size_t mult = std::size_t{1} << std::min<std::size_t>(block, 2);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(width * static_cast<double>(base_channels)))) *
         mult;
}

nn::Json FamilyConfig::to_json() const {
  return {{"n_classes", n_classes},   {"n_mels", n_mels},
          {"width", width},           {"base_channels", base_channels},
          {"conv_blocks", conv_blocks}, {"transformer_layers", transformer_layers},
          {"vit_layers", vit_layers}, {"patch_f", patch_f},
          {"patch_t", patch_t},       {"f_stride", f_stride},
          {"t_stride", t_stride},     {"d_model", d_model},
          {"heads", heads},           {"ffn_mult", ffn_mult},
          {"rnn_hidden", rnn_hidden}};
}

FamilyConfig FamilyConfig::from_json(const nn::Json& j) {
  FamilyConfig c;
  c.n_classes = j.at("n_classes");
  c.n_mels = j.at("n_mels");
  c.width = j.at("width");
  c.base_channels = j.at("base_channels");
  c.conv_blocks = j.at("conv_blocks");
  c.transformer_layers = j.at("transformer_layers");
  c.vit_layers = j.at("vit_layers");
  c.patch_f = j.at("patch_f");
  c.patch_t = j.at("patch_t");
  c.f_stride = j.at("f_stride");
  c.t_stride = j.at("t_stride");
  c.d_model = j.at("d_model");
  c.heads = j.at("heads");
  c.ffn_mult = j.at("ffn_mult");
  c.rnn_hidden = j.at("rnn_hidden");
  return c;
}

PatchGrid patch_grid(std::size_t n_mels, std::size_t n_frames, std::size_t patch_f, std::size_t patch_t,
                     std::size_t f_stride, std::size_t t_stride) {
  if (f_stride == 0 || t_stride == 0) throw ArgumentError("patch_grid: strides must be >= 1");
  if (patch_f == 0 || patch_t == 0 || patch_f > n_mels || patch_t > n_frames) {
    throw ArgumentError("patch_grid: patch " + std::to_string(patch_f) + "x" + std::to_string(patch_t) +
                        " does not fit input " + std::to_string(n_mels) + "x" + std::to_string(n_frames));
  }
  PatchGrid g;
  g.rows = (n_mels - patch_f) / f_stride + 1;
  g.cols = (n_frames - patch_t) / t_stride + 1;
  g.n_patches = g.rows * g.cols;
  return g;
}

nn::Model build_model(ModelFamily family, const FamilyConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  LayerPtr body;
  switch (family) {
    case ModelFamily::kCnnTransformer:
      body = cnn_transformer(cfg);
      break;
    case ModelFamily::kViT:
      body = vit(cfg);
      break;
    case ModelFamily::kResNetMini:
      body = resnet_mini(cfg);
      break;
    case ModelFamily::kCRNN:
      body = crnn(cfg);
      break;
  }
  nn::Model m(std::move(body), cfg.n_classes, {{"family", family_name(family)}, {"config", cfg.to_json()}});
  m.check_input({cfg.n_mels, min_frames(family, cfg)});
  m.initialize(seed);
  return m;
}

ModelFamily model_family(const nn::Model& m) {
  if (!m.metadata().contains("family")) throw ArgumentError("model: no family recorded in metadata");
  return parse_family(m.metadata()["family"].get<std::string>());
}

FamilyConfig model_config(const nn::Model& m) {
  if (!m.metadata().contains("config")) throw ArgumentError("model: no family config recorded in metadata");
  return FamilyConfig::from_json(m.metadata()["config"]);
}

std::size_t min_frames(ModelFamily family, const FamilyConfig& cfg) {
  switch (family) {
    case ModelFamily::kCnnTransformer:
    case ModelFamily::kCRNN:
      return std::size_t{1} << cfg.conv_blocks;
    case ModelFamily::kViT:
      return cfg.patch_t;
    case ModelFamily::kResNetMini:
      // the stride-2 stem halves with rounding up, then one pool per stage plus the stem pool
      return (std::size_t{1} << (kResNetStages + 2)) - 1;
  }
  throw ArgumentError("unknown model family");
}

void set_input_normalization(nn::Model& m, double mean, double stddev) {
  if (!(stddev > 0.0)) throw ArgumentError("input normalization: stddev must be positive");
  auto kids = m.body().children();
  auto* norm = kids.empty() ? nullptr : dynamic_cast<nn::Standardize*>(kids.front());
  if (!norm) throw ArgumentError("model: first layer is not an input standardization");
  norm->set(mean, 1.0 / stddev);
}

}  // namespace aerobust::zoo
