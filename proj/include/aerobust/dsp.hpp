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
#include <filesystem>
#include <span>
#include <vector>

namespace aerobust::dsp {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  double duration_s() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

// Frontend geometry. Defaults: 16 kHz, 1024-sample Hann frames, 400-sample
// hop, 4096-point FFT, 64 mel bands over [0, 8000] Hz.
struct SpectrogramGeometry {
  int sample_rate = 16000;
  std::size_t window_len = 1024;
  std::size_t hop = 400;
  std::size_t fft_len = 4096;
  std::size_t n_mels = 64;
  double f_min = 0.0;
  double f_max = 8000.0;
  double log_floor = 1e-10;

  void validate() const;
  std::size_t n_bins() const { return fft_len / 2 + 1; }
  double floor_value() const;
  double frames_per_second() const { return static_cast<double>(sample_rate) / static_cast<double>(hop); }
  // Center time of frame i in seconds.
  double frame_center_s(std::size_t i) const;
  bool operator==(const SpectrogramGeometry&) const = default;
};

struct MelFilterbank {
  std::size_t n_mels = 0;
  std::size_t n_bins = 0;
  std::vector<double> weights;  // n_mels x n_bins, row-major
  std::vector<double> center_freqs;

  double weight(std::size_t mel, std::size_t bin) const { return weights[mel * n_bins + bin]; }
  // Index of the filter whose center frequency is nearest to hz.
  std::size_t nearest_filter(double hz) const;
};

// n_mels x n_frames log-power matrix, row-major (one row per mel band).
class LogMelSpectrogram {
 public:
  LogMelSpectrogram() = default;
  LogMelSpectrogram(SpectrogramGeometry geometry, std::size_t n_frames, double fill);
  LogMelSpectrogram(SpectrogramGeometry geometry, std::size_t n_frames, std::vector<double> values);

  std::size_t n_mels() const { return geometry_.n_mels; }
  std::size_t n_frames() const { return n_frames_; }
  const SpectrogramGeometry& geometry() const { return geometry_; }

  double& at(std::size_t mel, std::size_t frame) { return values_[mel * n_frames_ + frame]; }
  double at(std::size_t mel, std::size_t frame) const { return values_[mel * n_frames_ + frame]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double duration_s() const;

  bool operator==(const LogMelSpectrogram&) const = default;

 private:
  SpectrogramGeometry geometry_;
  std::size_t n_frames_ = 0;
  std::vector<double> values_;
};

// RIFF/WAVE PCM16, mono or stereo. Stereo is averaged to mono.
Waveform decode_wav(std::span<const std::uint8_t> bytes);
Waveform read_wav(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_wav(const Waveform& w);
void write_wav(const std::filesystem::path& path, const Waveform& w);

// Kaiser-windowed sinc interpolation, 16 taps per output sample.
Waveform resample(const Waveform& w, int target_sr);

// Symmetric Hann window of length n (n >= 2).
std::vector<double> hann_window(std::size_t n);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

MelFilterbank mel_filterbank(const SpectrogramGeometry& g);

// Reusable frontend: filterbank, window and FFT tables are built once and
// shared read-only, so a single instance may featurize clips concurrently.
class LogMelFrontend {
 public:
  explicit LogMelFrontend(SpectrogramGeometry g = {});

  LogMelSpectrogram operator()(const Waveform& w) const;

  const SpectrogramGeometry& geometry() const { return geometry_; }
  const MelFilterbank& filterbank() const { return filterbank_; }

 private:
  SpectrogramGeometry geometry_;
  MelFilterbank filterbank_;
  std::vector<double> window_;
  std::vector<double> cos_table_;
  std::vector<double> sin_table_;
  std::vector<std::size_t> bit_reverse_;
  // Per-filter nonzero bin span, to skip the zero tails of each triangle.
  std::vector<std::size_t> first_bin_;
  std::vector<std::size_t> last_bin_;
};

LogMelSpectrogram logmel(const Waveform& w, const SpectrogramGeometry& g = {});

}  // namespace aerobust::dsp
