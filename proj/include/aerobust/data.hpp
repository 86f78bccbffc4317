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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aerobust/dsp.hpp"
#include "aerobust/perturb.hpp"

namespace aerobust::data {

// Half-open [t0_s, t1_s) occurrence of one class.
struct EventLabel {
  std::size_t class_id = 0;
  double t0_s = 0.0;
  double t1_s = 0.0;

  bool operator==(const EventLabel&) const = default;
};

struct ClipRecord {
  std::string clip_id;
  std::filesystem::path audio_path;
  std::optional<dsp::Waveform> waveform;
  std::vector<std::size_t> weak_labels;  // sorted, unique
  std::optional<std::vector<EventLabel>> strong_labels;

  bool has_label(std::size_t class_id) const;
  // Strong labels of the clip as masking intervals.
  std::vector<perturb::TimeInterval> strong_intervals() const;
};

// Dense class ids 0..C-1, each with a machine id ("/m/03l9g") and a name.
struct ClassList {
  std::vector<std::string> ids;
  std::vector<std::string> names;

  std::size_t size() const { return ids.size(); }
  std::optional<std::size_t> find(const std::string& id) const;
  void add(std::string id, std::string name);
};

enum class Split { kTrain, kEval };

const char* split_name(Split s);
Split parse_split(const std::string& s);

struct DatasetManifest {
  ClassList classes;
  std::vector<ClipRecord> clips;
  Split split = Split::kTrain;
};

using StrongTable = std::map<std::string, std::vector<EventLabel>>;

// "index,mid,display_name" rows with one header line.
ClassList load_class_list(const std::filesystem::path& path);
void write_class_list(const std::filesystem::path& path, const ClassList& classes);

// Segment CSV: id, start, end, "label,label,...". Lines starting with '#'
// are comments. Audio paths resolve to <audio_dir>/<id>.wav when given.
DatasetManifest load_weak_csv(const std::filesystem::path& path, const ClassList& classes,
                              const std::filesystem::path& audio_dir = {});

// Rows of (clip_id, t0, t1, label), comma or tab separated. Events are
// validated against [0, clip_s] and sorted per clip.
StrongTable load_strong_csv(const std::filesystem::path& path, const ClassList& classes, double clip_s = 10.0);

// Attaches strong labels; a strong class missing from the weak labels is
// logged, not fatal.
void attach_strong_labels(DatasetManifest& m, const StrongTable& table);

void write_weak_csv(const std::filesystem::path& path, const DatasetManifest& m);
void write_strong_csv(const std::filesystem::path& path, const DatasetManifest& m);

// Class 0 is a stationary hum lasting the whole clip, present in a fraction
// of clips and weakly labelled only. Classes 1..C-1 are foreground events
// cycling through tone bursts, linear chirps, band-limited noise bursts and
// AM tones, each centered on its own mel filter.
struct SyntheticConfig {
  std::size_t n_classes = 10;
  std::size_t n_clips = 100;
  double clip_s = 10.0;
  std::size_t min_events = 1;
  std::size_t max_events = 3;
  double min_event_s = 0.5;
  double max_event_s = 2.0;
  double min_amplitude = 0.02;  // event peak amplitude, log-uniform
  double max_amplitude = 0.5;
  double background_sigma = 0.02;  // white noise floor, waveform units
  double background_prob = 0.5;    // chance a clip carries the class 0 hum
  double align_s = 0.025;          // event boundaries snap to this grid (one hop)
  int sample_rate = 16000;

  void validate() const;
};

enum class SyntheticKind { kStationary, kToneBurst, kChirp, kNoiseBurst, kAmTone };

SyntheticKind synthetic_kind(std::size_t class_id);
// Center frequency of a synthetic class under the default frontend geometry.
double synthetic_center_hz(std::size_t class_id, std::size_t n_classes);
ClassList synthetic_classes(std::size_t n_classes);

DatasetManifest generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed, Split split = Split::kTrain);

// Writes classes.csv, <split>_weak.csv, <split>_strong.csv and audio/<id>.wav.
void write_dataset(const std::filesystem::path& dir, const DatasetManifest& m);
// Reads what write_dataset produced; the strong CSV is optional.
DatasetManifest read_dataset(const std::filesystem::path& dir, Split split);

// Waveform of a record: in memory if present, otherwise read and resampled
// to the requested rate.
dsp::Waveform clip_waveform(const ClipRecord& r, int sample_rate);

// LMEL cache: magic, version, n_mels, n_frames, geometry, then row-major
// little-endian float32 values. Values are rounded to float32 on write.
std::vector<std::uint8_t> encode_feature_cache(const dsp::LogMelSpectrogram& s);
dsp::LogMelSpectrogram decode_feature_cache(std::span<const std::uint8_t> bytes);
void write_feature_cache(const std::filesystem::path& path, const dsp::LogMelSpectrogram& s);
dsp::LogMelSpectrogram read_feature_cache(const std::filesystem::path& path);

// Rounds every value through float32, the precision the cache stores.
dsp::LogMelSpectrogram round_to_f32(const dsp::LogMelSpectrogram& s);

}  // namespace aerobust::data
