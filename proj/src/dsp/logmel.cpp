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
#include <complex>
#include <numbers>

#include "aerobust/dsp.hpp"
#include "aerobust/error.hpp"

namespace aerobust::dsp {
namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Reflect without repeating the edge sample: x[-1] -> x[1].
std::size_t reflect_index(long long i, long long n) {
  if (n == 1) return 0;
  const long long period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  if (i >= n) i = period - i;
  return static_cast<std::size_t>(i);
}

}  // namespace

void SpectrogramGeometry::validate() const {
  if (sample_rate <= 0) throw ArgumentError("geometry: sample_rate must be positive");
  if (window_len < 2) throw ArgumentError("geometry: window_len must be >= 2");
  if (hop == 0) throw ArgumentError("geometry: hop must be positive");
  if (window_len > fft_len) throw ArgumentError("geometry: window_len exceeds fft_len");
  if (!is_power_of_two(fft_len)) throw ArgumentError("geometry: fft_len must be a power of two");
  if (n_mels == 0) throw ArgumentError("geometry: n_mels must be positive");
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0)) {
    throw ArgumentError("geometry: need 0 <= f_min < f_max <= sample_rate/2");
  }
  if (!(log_floor > 0.0)) throw ArgumentError("geometry: log_floor must be positive");
}

double SpectrogramGeometry::floor_value() const { return std::log(log_floor); }

double SpectrogramGeometry::frame_center_s(std::size_t i) const {
  return static_cast<double>(i * hop + hop / 2) / static_cast<double>(sample_rate);
}

LogMelSpectrogram::LogMelSpectrogram(SpectrogramGeometry geometry, std::size_t n_frames, double fill)
    : geometry_(geometry), n_frames_(n_frames), values_(geometry.n_mels * n_frames, fill) {}

LogMelSpectrogram::LogMelSpectrogram(SpectrogramGeometry geometry, std::size_t n_frames,
                                     std::vector<double> values)
    : geometry_(geometry), n_frames_(n_frames), values_(std::move(values)) {
  if (values_.size() != geometry_.n_mels * n_frames_) {
    throw ArgumentError("logmel: value count does not match n_mels x n_frames");
  }
}

double LogMelSpectrogram::duration_s() const {
  return static_cast<double>(n_frames_ * geometry_.hop) / static_cast<double>(geometry_.sample_rate);
}

std::vector<double> hann_window(std::size_t n) {
  if (n < 2) throw ArgumentError("hann_window: n must be >= 2");
  std::vector<double> w(n);
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / denom));
  }
  // cos() does not return exactly 1 at 2*pi; pin the endpoints and mirror.
  w[0] = 0.0;
  w[n - 1] = 0.0;
  for (std::size_t i = 0; i < n / 2; ++i) w[n - 1 - i] = w[i];
  return w;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::size_t MelFilterbank::nearest_filter(double hz) const {
  std::size_t best = 0;
  for (std::size_t m = 1; m < center_freqs.size(); ++m) {
    if (std::abs(center_freqs[m] - hz) < std::abs(center_freqs[best] - hz)) best = m;
  }
  return best;
}

MelFilterbank mel_filterbank(const SpectrogramGeometry& g) {
  g.validate();
  MelFilterbank fb;
  fb.n_mels = g.n_mels;
  fb.n_bins = g.n_bins();
  fb.weights.assign(fb.n_mels * fb.n_bins, 0.0);

  const double mel_lo = hz_to_mel(g.f_min);
  const double mel_hi = hz_to_mel(g.f_max);
  const std::size_t n_edges = g.n_mels + 2;
  std::vector<double> edges(n_edges);
  for (std::size_t i = 0; i < n_edges; ++i) {
    const double mel = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(n_edges - 1);
    edges[i] = mel_to_hz(mel);
  }

  const double bin_hz = static_cast<double>(g.sample_rate) / static_cast<double>(g.fft_len);
  fb.center_freqs.resize(g.n_mels);
  for (std::size_t m = 0; m < g.n_mels; ++m) {
    const double lo = edges[m];
    const double mid = edges[m + 1];
    const double hi = edges[m + 2];
    fb.center_freqs[m] = mid;
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      double v = 0.0;
      if (f > lo && f <= mid) {
        v = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        v = (hi - f) / (hi - mid);
      }
      fb.weights[m * fb.n_bins + k] = v;
    }
  }
  return fb;
}

LogMelFrontend::LogMelFrontend(SpectrogramGeometry g)
    : geometry_(g), filterbank_(mel_filterbank(g)), window_(hann_window(g.window_len)) {
  const std::size_t n = g.fft_len;
  cos_table_.resize(n / 2);
  sin_table_.resize(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    cos_table_[k] = std::cos(a);
    sin_table_[k] = std::sin(a);
  }
  bit_reverse_.resize(n);
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
    bit_reverse_[i] = r;
  }
  first_bin_.resize(g.n_mels);
  last_bin_.resize(g.n_mels);
  for (std::size_t m = 0; m < g.n_mels; ++m) {
    std::size_t first = filterbank_.n_bins;
    std::size_t last = 0;
    for (std::size_t k = 0; k < filterbank_.n_bins; ++k) {
      if (filterbank_.weight(m, k) > 0.0) {
        first = std::min(first, k);
        last = k;
      }
    }
    first_bin_[m] = first;
    last_bin_[m] = last;
  }
}

LogMelSpectrogram LogMelFrontend::operator()(const Waveform& w) const {
  const auto& g = geometry_;
  if (w.samples.empty()) throw ArgumentError("logmel: empty waveform");
  if (w.sample_rate != g.sample_rate) {
    throw ArgumentError("logmel: waveform rate " + std::to_string(w.sample_rate) + " != geometry rate " +
                        std::to_string(g.sample_rate) + " (resample first)");
  }
  const std::size_t n_frames = w.samples.size() / g.hop;
  if (n_frames == 0) throw ArgumentError("logmel: waveform shorter than one hop");

  const std::size_t n = g.fft_len;
  const auto len = static_cast<long long>(w.samples.size());
  const long long half_window = static_cast<long long>(g.window_len / 2);
  const double floor_value = g.floor_value();

  LogMelSpectrogram out(g, n_frames, 0.0);
  std::vector<std::complex<double>> buf(n);
  std::vector<double> power(g.n_bins());

  for (std::size_t frame = 0; frame < n_frames; ++frame) {
    std::fill(buf.begin(), buf.end(), std::complex<double>{});
    // Frame is centered on sample frame*hop + hop/2 of the unpadded clip.
    const long long start = static_cast<long long>(frame * g.hop + g.hop / 2) - half_window;
    for (std::size_t i = 0; i < g.window_len; ++i) {
      const double s = w.samples[reflect_index(start + static_cast<long long>(i), len)];
      buf[bit_reverse_[i]] = {s * window_[i], 0.0};
    }

    for (std::size_t size = 2; size <= n; size <<= 1) {
      const std::size_t half = size / 2;
      const std::size_t stride = n / size;
      for (std::size_t base = 0; base < n; base += size) {
        for (std::size_t k = 0; k < half; ++k) {
          const std::complex<double> tw(cos_table_[k * stride], sin_table_[k * stride]);
          const std::complex<double> t = tw * buf[base + k + half];
          buf[base + k + half] = buf[base + k] - t;
          buf[base + k] += t;
        }
      }
    }

    for (std::size_t k = 0; k < power.size(); ++k) power[k] = std::norm(buf[k]);

    for (std::size_t m = 0; m < g.n_mels; ++m) {
      double e = 0.0;
      for (std::size_t k = first_bin_[m]; k <= last_bin_[m] && k < power.size(); ++k) {
        e += filterbank_.weight(m, k) * power[k];
      }
      out.at(m, frame) = e > g.log_floor ? std::log(e) : floor_value;
    }
  }
  return out;
}

LogMelSpectrogram logmel(const Waveform& w, const SpectrogramGeometry& g) { return LogMelFrontend(g)(w); }

}  // namespace aerobust::dsp
