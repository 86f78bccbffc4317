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

#include "aerobust/perturb.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

#include "aerobust/error.hpp"
#include "aerobust/random.hpp"

namespace aerobust::perturb {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr double kSlack = 1e-9;

std::vector<bool> frames_covered(const std::vector<TimeInterval>& intervals, const dsp::SpectrogramGeometry& g,
                                 std::size_t n_frames) {
  std::vector<bool> covered(n_frames, false);
  for (const auto& iv : intervals) {
    const FrameRange r = seconds_to_frames(iv, g, n_frames);
    for (std::size_t i = r.start; i < r.end; ++i) covered[i] = true;
  }
  return covered;
}

dsp::LogMelSpectrogram fill_columns(const dsp::LogMelSpectrogram& x, const std::vector<bool>& covered,
                                    double fill) {
  dsp::LogMelSpectrogram out = x;
  for (std::size_t m = 0; m < x.n_mels(); ++m) {
    for (std::size_t t = 0; t < x.n_frames(); ++t) {
      if (covered[t]) out.at(m, t) = fill;
    }
  }
  return out;
}

// One warning per (d, T) pair per process; evaluation loops call this for
// every clip.
bool first_warning(double d, double clip_s) {
  static std::mutex mu;
  static std::set<std::pair<double, double>> seen;
  std::lock_guard lock(mu);
  return seen.insert({d, clip_s}).second;
}

}  // namespace

double FillPolicy::resolve(const dsp::SpectrogramGeometry& g) const {
  return std::visit(Overloaded{[&](const LogFloorFill&) { return g.floor_value(); },
                               [](const ConstantFill& c) { return c.value; }},
                    value);
}

FrameRange seconds_to_frames(TimeInterval interval, const dsp::SpectrogramGeometry& g, std::size_t n_frames) {
  if (!(interval.t0 >= 0.0) || interval.t1 < interval.t0) {
    throw ArgumentError("seconds_to_frames: need 0 <= t0 <= t1");
  }
  // First frame whose center is >= t, searched from an arithmetic estimate
  // and corrected against the exact predicate.
  auto first_at_or_after = [&](double t) {
    const double est = (t * g.sample_rate - static_cast<double>(g.hop / 2)) / static_cast<double>(g.hop);
    auto i = static_cast<long long>(std::max(0.0, std::ceil(est)));
    while (i > 0 && g.frame_center_s(static_cast<std::size_t>(i - 1)) >= t) --i;
    while (static_cast<std::size_t>(i) < n_frames && g.frame_center_s(static_cast<std::size_t>(i)) < t) ++i;
    return std::min(static_cast<std::size_t>(i), n_frames);
  };
  FrameRange r{first_at_or_after(interval.t0), first_at_or_after(interval.t1)};
  if (r.end < r.start) r.end = r.start;
  return r;
}

std::vector<TimeInterval> intermittent_intervals(double d, double clip_s) {
  if (!(d > 0.0)) throw ArgumentError("intermittent masking: interval d must be positive");
  const double ratio = clip_s / d;
  const double nearest_even = 2.0 * std::round(ratio / 2.0);
  if (std::abs(ratio - nearest_even) > kSlack * std::max(1.0, ratio) && first_warning(d, clip_s)) {
    spdlog::warn("intermittent masking: T/d = {:.4f} is not an even integer; coverage is not exactly 50%", ratio);
  }
  std::vector<TimeInterval> out;
  for (long long n = 2; static_cast<double>(n) <= ratio + kSlack; n += 2) {
    out.push_back({static_cast<double>(n - 1) * d, std::min(static_cast<double>(n) * d, clip_s)});
  }
  return out;
}

std::vector<bool> intermittent_frames(const dsp::LogMelSpectrogram& x, double d) {
  return frames_covered(intermittent_intervals(d, x.duration_s()), x.geometry(), x.n_frames());
}

std::vector<TimeInterval> mask_intervals(const MaskSpec& m, double clip_s) {
  return std::visit(Overloaded{[&](const Consecutive& c) {
                                 return std::vector<TimeInterval>{{c.start_s, c.start_s + c.duration_s}};
                               },
                               [&](const Intermittent& i) { return intermittent_intervals(i.interval_s, clip_s); },
                               [](const StrongLabel& s) { return s.events; }},
                    m.kind);
}

dsp::LogMelSpectrogram consecutive_mask(const dsp::LogMelSpectrogram& x, double start_s, double duration_s,
                                        const FillPolicy& fill) {
  const double clip_s = x.duration_s();
  if (!(start_s >= 0.0) || !(duration_s >= 0.0) || start_s + duration_s > clip_s + kSlack) {
    throw ArgumentError("consecutive_mask: interval [" + std::to_string(start_s) + ", " +
                        std::to_string(start_s + duration_s) + ") outside clip of " + std::to_string(clip_s) + " s");
  }
  const auto covered = frames_covered({{start_s, start_s + duration_s}}, x.geometry(), x.n_frames());
  return fill_columns(x, covered, fill.resolve(x.geometry()));
}

dsp::LogMelSpectrogram intermittent_mask(const dsp::LogMelSpectrogram& x, double d, const FillPolicy& fill) {
  return fill_columns(x, intermittent_frames(x, d), fill.resolve(x.geometry()));
}

dsp::LogMelSpectrogram concat_unmasked(const dsp::LogMelSpectrogram& x, double d) {
  const auto masked = intermittent_frames(x, d);
  std::vector<std::size_t> keep;
  for (std::size_t t = 0; t < masked.size(); ++t) {
    if (!masked[t]) keep.push_back(t);
  }
  std::vector<double> values(x.n_mels() * keep.size());
  for (std::size_t m = 0; m < x.n_mels(); ++m) {
    for (std::size_t j = 0; j < keep.size(); ++j) values[m * keep.size() + j] = x.at(m, keep[j]);
  }
  return dsp::LogMelSpectrogram(x.geometry(), keep.size(), std::move(values));
}

dsp::LogMelSpectrogram strong_label_mask(const dsp::LogMelSpectrogram& x, const std::vector<TimeInterval>& events,
                                         const FillPolicy& fill) {
  const auto covered = frames_covered(events, x.geometry(), x.n_frames());
  return fill_columns(x, covered, fill.resolve(x.geometry()));
}

dsp::LogMelSpectrogram apply_mask(const dsp::LogMelSpectrogram& x, const MaskSpec& m) {
  return std::visit(
      Overloaded{[&](const Consecutive& c) { return consecutive_mask(x, c.start_s, c.duration_s, m.fill); },
                 [&](const Intermittent& i) { return intermittent_mask(x, i.interval_s, m.fill); },
                 [&](const StrongLabel& s) { return strong_label_mask(x, s.events, m.fill); }},
      m.kind);
}

dsp::LogMelSpectrogram gaussian_spectrogram(const dsp::LogMelSpectrogram& x, const NoiseSpec& spec) {
  if (!(spec.sigma >= 0.0)) throw ArgumentError("gaussian noise: sigma must be >= 0");
  dsp::LogMelSpectrogram out = x;
  if (spec.sigma == 0.0) return out;
  for (std::size_t m = 0; m < x.n_mels(); ++m) {
    for (std::size_t t = 0; t < x.n_frames(); ++t) {
      const std::uint64_t counter = (static_cast<std::uint64_t>(m) << 32) | static_cast<std::uint64_t>(t);
      out.at(m, t) += spec.sigma * rnd::normal(spec.seed, counter);
    }
  }
  return out;
}

dsp::Waveform gaussian_waveform(const dsp::Waveform& w, const NoiseSpec& spec) {
  if (!(spec.sigma >= 0.0)) throw ArgumentError("gaussian noise: sigma must be >= 0");
  dsp::Waveform out = w;
  if (spec.sigma == 0.0) return out;
  for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] += spec.sigma * rnd::normal(spec.seed, i);
  return out;
}

dsp::Waveform waveform_silence_mask(const dsp::Waveform& w, const MaskSpec& m) {
  dsp::Waveform out = w;
  const auto n = static_cast<double>(w.samples.size());
  for (const auto& iv : mask_intervals(m, w.duration_s())) {
    const double lo = std::clamp(std::round(iv.t0 * w.sample_rate), 0.0, n);
    const double hi = std::clamp(std::round(iv.t1 * w.sample_rate), 0.0, n);
    for (auto i = static_cast<std::size_t>(lo); i < static_cast<std::size_t>(hi); ++i) out.samples[i] = 0.0;
  }
  return out;
}

double noise_sigma(double quoted, bool quoted_is_variance) {
  if (!(quoted >= 0.0)) throw ArgumentError("noise level must be >= 0");
  return quoted_is_variance ? std::sqrt(quoted) : quoted;
}

}  // namespace aerobust::perturb
