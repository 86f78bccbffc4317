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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>

#include "aerobust/dsp.hpp"
#include "aerobust/error.hpp"

namespace aerobust::dsp {
namespace {

constexpr int kZeroCrossings = 16;  // per side of the low-pass sinc
constexpr double kKaiserBeta = 6.0;
constexpr double kCutoffMargin = 0.95;

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

double kaiser(double x, double half_width) {
  const double r = x / half_width;
  if (r <= -1.0 || r >= 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) / std::cyl_bessel_i(0.0, kKaiserBeta);
}

}  // namespace

Waveform resample(const Waveform& w, int target_sr) {
  if (target_sr <= 0) throw ArgumentError("resample: target rate must be positive");
  if (w.sample_rate <= 0) throw ArgumentError("resample: source rate must be positive");
  if (target_sr == w.sample_rate) return w;

  const auto in_sr = static_cast<std::int64_t>(w.sample_rate);
  const auto out_sr = static_cast<std::int64_t>(target_sr);
  const auto in_len = static_cast<std::int64_t>(w.samples.size());
  const std::int64_t out_len = (in_len * out_sr + in_sr / 2) / in_sr;

  Waveform out;
  out.sample_rate = target_sr;
  out.samples.resize(static_cast<std::size_t>(out_len));
  if (in_len == 0) return out;

  // Output n sits at input position n*M/L; its fractional part takes one of
  // L values, so one tap set per phase.
  const std::int64_t g = std::gcd(in_sr, out_sr);
  const std::int64_t L = out_sr / g;
  const std::int64_t M = in_sr / g;

  // Cutoff relative to the input Nyquist frequency.
  const double fc = std::min(1.0, static_cast<double>(out_sr) / static_cast<double>(in_sr)) * kCutoffMargin;
  const double half_width = kZeroCrossings / fc;
  const int half = static_cast<int>(std::ceil(half_width));
  const std::size_t n_taps = 2 * static_cast<std::size_t>(half);

  std::vector<double> table(static_cast<std::size_t>(L) * n_taps);
  for (std::int64_t ph = 0; ph < L; ++ph) {
    const double frac = static_cast<double>(ph) / static_cast<double>(L);
    double* taps = table.data() + static_cast<std::size_t>(ph) * n_taps;
    double norm = 0.0;
    for (int j = -half + 1; j <= half; ++j) {
      const double x = static_cast<double>(j) - frac;
      const double h = sinc(fc * x) * kaiser(x, half_width);
      taps[j + half - 1] = h;
      norm += h;
    }
    // Unit tap sum keeps DC exact.
    for (std::size_t k = 0; k < n_taps; ++k) taps[k] /= norm;
  }

  for (std::int64_t n = 0; n < out_len; ++n) {
    const std::int64_t num = n * M;
    const std::int64_t base = num / L;
    const double* taps = table.data() + static_cast<std::size_t>(num % L) * n_taps;
    const std::int64_t first = base - half + 1;
    double acc = 0.0;
    if (first >= 0 && first + static_cast<std::int64_t>(n_taps) <= in_len) {
      const double* src = w.samples.data() + first;
      for (std::size_t k = 0; k < n_taps; ++k) acc += taps[k] * src[k];
    } else {
      for (std::size_t k = 0; k < n_taps; ++k) {
        const std::int64_t idx = std::clamp<std::int64_t>(first + static_cast<std::int64_t>(k), 0, in_len - 1);
        acc += taps[k] * w.samples[static_cast<std::size_t>(idx)];
      }
    }
    out.samples[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

}  // namespace aerobust::dsp
