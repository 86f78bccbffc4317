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

#include <gtest/gtest.h>

#include "aerobust/error.hpp"
#include "aerobust/nn/train.hpp"
#include "aerobust/random.hpp"
#include "aerobust/zoo.hpp"

namespace {

using namespace aerobust;
using zoo::FamilyConfig;
using zoo::ModelFamily;

std::size_t conv(std::size_t in, std::size_t out, std::size_t k) { return in * out * k + out; }
std::size_t linear(std::size_t in, std::size_t out) { return in * out + out; }
std::size_t encoder(std::size_t d, std::size_t ffn) { return 2 * d + 4 * linear(d, d) + 2 * d + linear(d, ffn) + linear(ffn, d); }
std::size_t gru(std::size_t in, std::size_t h) { return 3 * h * in + 3 * h * h + 6 * h; }

// Closed-form trainable parameter counts for the blueprints.
std::size_t expected_params(ModelFamily f, const FamilyConfig& c) {
  std::size_t convs = 0, in = 1;
  for (std::size_t b = 0; b < c.conv_blocks; ++b) {
    convs += conv(in, c.channels(b), 9);
    in = c.channels(b);
  }
  const std::size_t feat = c.channels(c.conv_blocks - 1) * (c.n_mels >> c.conv_blocks);
  const std::size_t d = c.d_model, ffn = c.d_model * c.ffn_mult, C = c.n_classes;
  switch (f) {
    case ModelFamily::kCnnTransformer:
      return convs + linear(feat, d) + c.transformer_layers * encoder(d, ffn) + 2 * d + linear(d, C);
    case ModelFamily::kViT:
      return conv(1, d, c.patch_f * c.patch_t) + c.vit_layers * encoder(d, ffn) + 2 * d + linear(d, C);
    case ModelFamily::kCRNN:
      return convs + 2 * gru(feat, c.rnn_hidden) + linear(2 * c.rnn_hidden, C);
    case ModelFamily::kResNetMini: {
      std::size_t n = conv(1, c.channels(1), 9);
      std::size_t ch = c.channels(1);
      for (std::size_t s = 1; s <= 3; ++s) {
        const std::size_t out = c.channels(s);
        n += conv(ch, out, 9) + conv(out, out, 9);
        if (ch != out) n += conv(ch, out, 1);
        ch = out;
      }
      return n + linear(ch, C);
    }
  }
  return 0;
}

nn::Tensor random_input(std::size_t f, std::size_t t, std::uint64_t seed) {
  nn::Tensor x({f, t});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = -8.0 + 3.0 * rnd::normal(seed, i);
  return x;
}

class FamilyTest : public ::testing::TestWithParam<ModelFamily> {};

TEST_P(FamilyTest, ParameterCountMatchesClosedForm) {
  FamilyConfig c;
  EXPECT_EQ(zoo::build_model(GetParam(), c).trainable_parameter_count(), expected_params(GetParam(), c));
  c.width = 2.0;
  c.d_model = 24;
  c.heads = 3;
  c.rnn_hidden = 8;
  c.n_classes = 7;
  EXPECT_EQ(zoo::build_model(GetParam(), c).trainable_parameter_count(), expected_params(GetParam(), c));
}

TEST_P(FamilyTest, AcceptsFullAndHalfLengthInput) {
  FamilyConfig c;
  const auto m = zoo::build_model(GetParam(), c, 3);
  for (std::size_t t : {400u, 200u}) {
    const auto y = m.forward(random_input(64, t, t));
    ASSERT_EQ(y.shape(), nn::Shape{10});
    for (double v : y.values()) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
  EXPECT_NO_THROW(m.forward(random_input(64, zoo::min_frames(GetParam(), c), 1)));
  EXPECT_THROW(m.forward(random_input(64, zoo::min_frames(GetParam(), c) - 1, 1)), ArgumentError);
  EXPECT_THROW(m.forward(random_input(32, 400, 1)), ArgumentError);
}

TEST_P(FamilyTest, MetadataAndCheckpointRoundTrip) {
  FamilyConfig c;
  c.vit_layers = 1;
  auto m = zoo::build_model(GetParam(), c, 11);
  zoo::set_input_normalization(m, -5.0, 2.0);
  const auto back = nn::from_bytes(nn::to_bytes(m));
  EXPECT_EQ(zoo::model_family(back), GetParam());
  EXPECT_EQ(zoo::model_config(back).to_json(), c.to_json());
  const auto x = random_input(64, 120, 5);
  EXPECT_EQ(m.forward(x), back.forward(x));
}

TEST_P(FamilyTest, SeedDeterminesWeights) {
  FamilyConfig c;
  const auto x = random_input(64, 96, 2);
  EXPECT_EQ(zoo::build_model(GetParam(), c, 4).forward(x), zoo::build_model(GetParam(), c, 4).forward(x));
  EXPECT_NE(zoo::build_model(GetParam(), c, 4).forward(x), zoo::build_model(GetParam(), c, 5).forward(x));
}

TEST_P(FamilyTest, InputGradientMatchesCentralDifference) {
  auto m = zoo::build_model(GetParam(), {}, 21);
  zoo::set_input_normalization(m, -8.0, 3.0);
  std::vector<double> y(10, 0.0);
  y[1] = y[6] = 1.0;
  const auto r = nn::grad_check(m, random_input(64, 64, 9), y, 1e-5, 100, 3);
  EXPECT_EQ(r.checked, 100u);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST_P(FamilyTest, InputNormalizationIsNotTrainable) {
  auto m = zoo::build_model(GetParam(), {});
  EXPECT_EQ(m.parameter_count() - m.trainable_parameter_count(), 2u);
}

INSTANTIATE_TEST_SUITE_P(Families, FamilyTest, ::testing::ValuesIn(zoo::kAllFamilies),
                         [](const auto& info) { return zoo::family_name(info.param); });

TEST(PatchGrid, DefaultGeometry) {
  const auto g = zoo::patch_grid(64, 400, 16, 16, 8, 8);
  EXPECT_EQ(g.rows, 7u);
  EXPECT_EQ(g.cols, 49u);
  EXPECT_EQ(g.n_patches, 343u);
  EXPECT_EQ(zoo::patch_grid(64, 400, 16, 16, 16, 16).n_patches, 100u);
  EXPECT_EQ(zoo::patch_grid(64, 200, 16, 16, 8, 8).n_patches, 7u * 24u);
}

TEST(PatchGrid, RejectsPatchLargerThanInput) {
  EXPECT_THROW(zoo::patch_grid(64, 10, 16, 16, 8, 8), ArgumentError);
  EXPECT_THROW(zoo::patch_grid(8, 400, 16, 16, 8, 8), ArgumentError);
  EXPECT_THROW(zoo::patch_grid(64, 400, 16, 16, 0, 8), ArgumentError);
}

TEST(PatchGrid, MatchesViTTokenCount) {
  FamilyConfig c;
  const auto m = zoo::build_model(ModelFamily::kViT, c);
  // body: standardize, add_channel, patch conv, flatten_patches, ...
  const auto kids = m.body().children();
  nn::Shape s{64, 400};
  for (std::size_t i = 0; i < 4; ++i) s = kids[i]->output_shape(s);
  EXPECT_EQ(s, (nn::Shape{343, c.d_model}));
}

TEST(Family, NamesRoundTrip) {
  for (auto f : zoo::kAllFamilies) EXPECT_EQ(zoo::parse_family(zoo::family_name(f)), f);
  EXPECT_THROW(zoo::parse_family("lstm"), ArgumentError);
}

TEST(Family, InvalidConfigRejected) {
  FamilyConfig c;
  c.heads = 3;
  EXPECT_THROW(zoo::build_model(ModelFamily::kViT, c), ArgumentError);
  c = {};
  c.conv_blocks = 7;
  EXPECT_THROW(zoo::build_model(ModelFamily::kCRNN, c), ArgumentError);
}

}  // namespace
