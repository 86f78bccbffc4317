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
#include <utility>
#include <variant>
#include <vector>

#include "aerobust/dsp.hpp"

namespace aerobust::perturb {

// Half-open frame interval [start, end).
struct FrameRange {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  bool empty() const { return end <= start; }
  bool operator==(const FrameRange&) const = default;
};

// Half-open time interval in seconds.
struct TimeInterval {
  double t0 = 0.0;
  double t1 = 0.0;
};

struct LogFloorFill {};
struct ConstantFill {
  double value = 0.0;
};

// Silence in log-power space is the floor, so LogFloorFill is the default.
struct FillPolicy {
  std::variant<LogFloorFill, ConstantFill> value;

  double resolve(const dsp::SpectrogramGeometry& g) const;
};

struct Consecutive {
  double start_s = 0.0;
  double duration_s = 0.0;
};

// Masks [(n-1)d, nd) for every even n, up to T/d.
struct Intermittent {
  double interval_s = 1.0;
};

struct StrongLabel {
  std::vector<TimeInterval> events;
};

struct MaskSpec {
  std::variant<Consecutive, Intermittent, StrongLabel> kind;
  FillPolicy fill;
};

enum class NoiseDomain { kWaveform1D, kSpectrogram2D };

struct NoiseSpec {
  double sigma = 0.1;
  NoiseDomain domain = NoiseDomain::kSpectrogram2D;
  std::uint64_t seed = 0;
};

FrameRange seconds_to_frames(TimeInterval interval, const dsp::SpectrogramGeometry& g, std::size_t n_frames);

// Time intervals masked by intermittent masking with interval d over a clip
// of duration T. Logs a warning when T/d is not an even integer.
std::vector<TimeInterval> intermittent_intervals(double d, double clip_s);

// Frame indicator (true = masked) of intermittent masking.
std::vector<bool> intermittent_frames(const dsp::LogMelSpectrogram& x, double d);

// Time intervals a MaskSpec covers on a clip of the given duration.
std::vector<TimeInterval> mask_intervals(const MaskSpec& m, double clip_s);

dsp::LogMelSpectrogram consecutive_mask(const dsp::LogMelSpectrogram& x, double start_s, double duration_s,
                                        const FillPolicy& fill = {});
dsp::LogMelSpectrogram intermittent_mask(const dsp::LogMelSpectrogram& x, double d, const FillPolicy& fill = {});
dsp::LogMelSpectrogram concat_unmasked(const dsp::LogMelSpectrogram& x, double d);
dsp::LogMelSpectrogram strong_label_mask(const dsp::LogMelSpectrogram& x, const std::vector<TimeInterval>& events,
                                         const FillPolicy& fill = {});
dsp::LogMelSpectrogram apply_mask(const dsp::LogMelSpectrogram& x, const MaskSpec& m);

dsp::LogMelSpectrogram gaussian_spectrogram(const dsp::LogMelSpectrogram& x, const NoiseSpec& spec);
dsp::Waveform gaussian_waveform(const dsp::Waveform& w, const NoiseSpec& spec);

// Zeroes waveform samples under the mask. Used to show why masking is done
// on features: the STFT window smears the step into neighbouring frames.
dsp::Waveform waveform_silence_mask(const dsp::Waveform& w, const MaskSpec& m);

// Converts a noise level quoted as N(0, v) into a standard deviation,
// honouring whether v denotes the variance or the deviation.
double noise_sigma(double quoted, bool quoted_is_variance);

}  // namespace aerobust::perturb
