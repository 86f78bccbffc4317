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

#include "aerobust/data.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "aerobust/error.hpp"
#include "aerobust/random.hpp"

namespace aerobust::data {
namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Splits one CSV line on `sep`, honouring double quotes ("" escapes a quote).
// Whitespace around unquoted fields and around quotes is dropped.
std::vector<std::string> split_fields(const std::string& line, char sep, const std::string& where,
                                      std::size_t lineno) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = line.size();
  while (true) {
    while (i < n && (line[i] == ' ' || (line[i] == '\t' && sep != '\t'))) ++i;
    std::string field;
    if (i < n && line[i] == '"') {
      ++i;
      bool closed = false;
      while (i < n) {
        if (line[i] == '"') {
          if (i + 1 < n && line[i + 1] == '"') {
            field += '"';
            i += 2;
            continue;
          }
          ++i;
          closed = true;
          break;
        }
        field += line[i++];
      }
      if (!closed) throw ParseError(where, lineno, "unterminated quote");
      while (i < n && line[i] != sep) {
        if (line[i] != ' ' && line[i] != '\t' && line[i] != '\r') {
          throw ParseError(where, lineno, "unexpected text after closing quote");
        }
        ++i;
      }
    } else {
      const std::size_t start = i;
      while (i < n && line[i] != sep) ++i;
      field = trim(std::string_view(line).substr(start, i - start));
    }
    out.push_back(std::move(field));
    if (i >= n) break;
    ++i;  // separator
  }
  return out;
}

double parse_number(const std::string& s, const std::string& where, std::size_t lineno, const char* what) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ParseError(where, lineno, std::string("bad ") + what + " '" + s + "'");
  }
  return v;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

bool skip_line(const std::string& line) {
  const std::string t = trim(line);
  return t.empty() || t.front() == '#';
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string format_time(double t) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, t);
  return std::string(buf, ptr);
}

// Counter-based draws for one clip.
class Draws {
 public:
  explicit Draws(std::uint64_t stream) : u_(rnd::combine(stream, 1)), g_(rnd::combine(stream, 2)) {}
  double uniform() { return rnd::uniform(u_, nu_++); }
  double normal() { return rnd::normal(g_, ng_++); }

 private:
  std::uint64_t u_, g_;
  std::uint64_t nu_ = 0, ng_ = 0;
};

constexpr double kFade_s = 0.01;
constexpr double kSweep = 0.12;  // chirp and noise band half-width, relative
constexpr std::size_t kNoisePartials = 16;
constexpr double kHumAmplitude = 0.1;
constexpr double kPeakLimit = 0.95;

double fade(double t, double dur) {
  const double e = std::min(t, dur - t);
  if (e >= kFade_s) return 1.0;
  return 0.5 - 0.5 * std::cos(std::numbers::pi * std::max(e, 0.0) / kFade_s);
}

void render_event(std::vector<double>& out, int sr, std::size_t first, std::size_t count, SyntheticKind kind,
                  double f, double amp, Draws& d) {
  const double phase = 2.0 * std::numbers::pi * d.uniform();
  const double dur = static_cast<double>(count) / sr;
  const double two_pi = 2.0 * std::numbers::pi;

  std::vector<double> partial_f, partial_phase;
  if (kind == SyntheticKind::kNoiseBurst) {
    for (std::size_t k = 0; k < kNoisePartials; ++k) {
      partial_f.push_back(f * (1.0 - kSweep + 2.0 * kSweep * d.uniform()));
      partial_phase.push_back(two_pi * d.uniform());
    }
  }
  const double partial_amp = amp / std::sqrt(static_cast<double>(kNoisePartials));
  const double f0 = f * (1.0 - kSweep), f1 = f * (1.0 + kSweep);

  for (std::size_t n = 0; n < count; ++n) {
    const double t = static_cast<double>(n) / sr;
    double v = 0.0;
    switch (kind) {
      case SyntheticKind::kToneBurst:
        v = amp * std::sin(two_pi * f * t + phase);
        break;
      case SyntheticKind::kChirp:
        v = amp * std::sin(two_pi * (f0 * t + 0.5 * (f1 - f0) * t * t / dur) + phase);
        break;
      case SyntheticKind::kNoiseBurst:
        for (std::size_t k = 0; k < kNoisePartials; ++k) v += partial_amp * std::sin(two_pi * partial_f[k] * t + partial_phase[k]);
        break;
      case SyntheticKind::kAmTone:
        v = amp * (1.0 + 0.8 * std::sin(two_pi * 6.0 * t)) / 1.8 * std::sin(two_pi * f * t + phase);
        break;
      case SyntheticKind::kStationary:
        break;
    }
    out[first + n] += v * fade(t, dur);
  }
}

constexpr char kMagic[4] = {'L', 'M', 'E', 'L'};
constexpr std::uint32_t kCacheVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 7 * 4 + 3 * 8;

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[at + i];
  return v;
}
std::uint64_t get_u64(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[at + i];
  return v;
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) throw ArgumentError(std::string("feature cache: ") + what + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

bool ClipRecord::has_label(std::size_t class_id) const {
  return std::binary_search(weak_labels.begin(), weak_labels.end(), class_id);
}

std::vector<perturb::TimeInterval> ClipRecord::strong_intervals() const {
  std::vector<perturb::TimeInterval> out;
  if (strong_labels) {
    for (const auto& e : *strong_labels) out.push_back({e.t0_s, e.t1_s});
  }
  return out;
}

std::optional<std::size_t> ClassList::find(const std::string& id) const {
  const auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

void ClassList::add(std::string id, std::string name) {
  if (id.empty()) throw ArgumentError("class list: empty class id");
  if (find(id)) throw ArgumentError("class list: duplicate class id " + id);
  ids.push_back(std::move(id));
  names.push_back(std::move(name));
}

const char* split_name(Split s) { return s == Split::kTrain ? "train" : "eval"; }

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "eval") return Split::kEval;
  throw ArgumentError("unknown split '" + s + "' (expected train or eval)");
}

ClassList load_class_list(const fs::path& path) {
  auto in = open_input(path);
  const std::string where = path.string();
  ClassList out;
  std::string line;
  std::size_t lineno = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    const auto f = split_fields(line, ',', where, lineno);
    if (header) {
      header = false;
      if (f.size() == 3 && f[0] == "index") continue;
    }
    if (f.size() != 3) throw ParseError(where, lineno, "expected index,mid,display_name");
    const double idx = parse_number(f[0], where, lineno, "index");
    if (idx != static_cast<double>(out.size())) throw ParseError(where, lineno, "class indices must be dense from 0");
    try {
      out.add(f[1], f[2]);
    } catch (const ArgumentError& e) {
      throw ParseError(where, lineno, e.what());
    }
  }
  return out;
}

void write_class_list(const fs::path& path, const ClassList& classes) {
  auto out = open_output(path);
  out << "index,mid,display_name\n";
  for (std::size_t i = 0; i < classes.size(); ++i) out << i << ',' << classes.ids[i] << ',' << quote(classes.names[i]) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

DatasetManifest load_weak_csv(const fs::path& path, const ClassList& classes, const fs::path& audio_dir) {
  auto in = open_input(path);
  const std::string where = path.string();
  DatasetManifest m;
  m.classes = classes;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    const auto f = split_fields(line, ',', where, lineno);
    if (f.size() != 4) {
      throw ParseError(where, lineno, "expected 4 fields (id, start, end, labels), got " + std::to_string(f.size()));
    }
    if (f[0].empty()) throw ParseError(where, lineno, "empty clip id");
    const double t0 = parse_number(f[1], where, lineno, "start time");
    const double t1 = parse_number(f[2], where, lineno, "end time");
    if (!(t0 >= 0.0 && t1 > t0)) throw ParseError(where, lineno, "segment must satisfy 0 <= start < end");
    if (!seen.insert(f[0]).second) throw ParseError(where, lineno, "duplicate clip id " + f[0]);

    ClipRecord r;
    r.clip_id = f[0];
    if (!audio_dir.empty()) r.audio_path = audio_dir / (r.clip_id + ".wav");
    std::vector<std::string> unknown;
    std::stringstream labels(f[3]);
    std::string id;
    while (std::getline(labels, id, ',')) {
      id = trim(id);
      if (id.empty()) continue;
      if (const auto c = classes.find(id)) {
        r.weak_labels.push_back(*c);
      } else {
        unknown.push_back(id);
      }
    }
    if (!unknown.empty()) {
      std::string msg = "unknown label(s):";
      for (const auto& u : unknown) msg += " " + u;
      throw ParseError(where, lineno, msg);
    }
    std::sort(r.weak_labels.begin(), r.weak_labels.end());
    r.weak_labels.erase(std::unique(r.weak_labels.begin(), r.weak_labels.end()), r.weak_labels.end());
    m.clips.push_back(std::move(r));
  }
  if (m.clips.empty()) spdlog::warn("{}: no clip rows", where);
  return m;
}

StrongTable load_strong_csv(const fs::path& path, const ClassList& classes, double clip_s) {
  auto in = open_input(path);
  const std::string where = path.string();
  StrongTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    const char sep = line.find('\t') != std::string::npos ? '\t' : ',';
    const auto f = split_fields(line, sep, where, lineno);
    if (!f.empty() && f[0] == "segment_id") continue;
    if (f.size() != 4) throw ParseError(where, lineno, "expected 4 fields (id, t0, t1, label)");
    if (f[0].empty()) throw ParseError(where, lineno, "empty clip id");
    const double t0 = parse_number(f[1], where, lineno, "t0");
    const double t1 = parse_number(f[2], where, lineno, "t1");
    if (!(t1 > t0)) throw ParseError(where, lineno, "event must satisfy t0 < t1");
    if (t0 < 0.0 || t1 > clip_s) throw ParseError(where, lineno, "event outside [0, " + format_time(clip_s) + "] s");
    const auto c = classes.find(f[3]);
    if (!c) throw ParseError(where, lineno, "unknown label " + f[3]);
    table[f[0]].push_back({*c, t0, t1});
  }
  for (auto& [id, events] : table) {
    std::sort(events.begin(), events.end(), [](const EventLabel& a, const EventLabel& b) {
      return std::tie(a.t0_s, a.t1_s, a.class_id) < std::tie(b.t0_s, b.t1_s, b.class_id);
    });
  }
  return table;
}

void attach_strong_labels(DatasetManifest& m, const StrongTable& table) {
  for (auto& r : m.clips) {
    const auto it = table.find(r.clip_id);
    if (it == table.end()) continue;
    for (const auto& e : it->second) {
      if (!r.has_label(e.class_id)) {
        spdlog::warn("clip {}: strong label {} is not among its weak labels", r.clip_id, m.classes.ids[e.class_id]);
      }
    }
    r.strong_labels = it->second;
  }
}

void write_weak_csv(const fs::path& path, const DatasetManifest& m) {
  auto out = open_output(path);
  out << "# YTID, start_seconds, end_seconds, positive_labels\n";
  for (const auto& r : m.clips) {
    const double dur = r.waveform ? r.waveform->duration_s() : 10.0;
    std::string labels;
    for (std::size_t c : r.weak_labels) labels += (labels.empty() ? "" : ",") + m.classes.ids.at(c);
    char times[64];
    std::snprintf(times, sizeof times, "%.3f, %.3f", 0.0, dur);
    out << r.clip_id << ", " << times << ", " << quote(labels) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_strong_csv(const fs::path& path, const DatasetManifest& m) {
  auto out = open_output(path);
  out << "segment_id,start_time_seconds,end_time_seconds,label\n";
  for (const auto& r : m.clips) {
    if (!r.strong_labels) continue;
    for (const auto& e : *r.strong_labels) {
      out << r.clip_id << ',' << format_time(e.t0_s) << ',' << format_time(e.t1_s) << ',' << m.classes.ids.at(e.class_id)
          << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void SyntheticConfig::validate() const {
  const dsp::SpectrogramGeometry g;
  if (n_classes < 2 || n_classes > g.n_mels - 8) {
    throw ArgumentError("synthetic: n_classes must be in [2, " + std::to_string(g.n_mels - 8) + "]");
  }
  if (!(clip_s > 0.0)) throw ArgumentError("synthetic: clip_s must be positive");
  if (min_events < 1 || min_events > max_events) throw ArgumentError("synthetic: need 1 <= min_events <= max_events");
  if (max_events > n_classes - 1) throw ArgumentError("synthetic: more events per clip than foreground classes");
  if (!(min_event_s > 0.0 && max_event_s >= min_event_s)) {
    throw ArgumentError("synthetic: need 0 < min_event_s <= max_event_s");
  }
  if (static_cast<double>(max_events) * max_event_s > clip_s) {
    throw ArgumentError("synthetic: max_events x max_event_s does not fit in the clip");
  }
  if (!(min_amplitude > 0.0 && max_amplitude >= min_amplitude && max_amplitude <= 0.5)) {
    throw ArgumentError("synthetic: need 0 < min_amplitude <= max_amplitude <= 0.5");
  }
  if (!(background_sigma >= 0.0)) throw ArgumentError("synthetic: background_sigma must be >= 0");
  if (!(background_prob >= 0.0 && background_prob <= 1.0)) throw ArgumentError("synthetic: background_prob must be in [0, 1]");
  if (sample_rate <= 0) throw ArgumentError("synthetic: sample_rate must be positive");
  if (!(align_s > 0.0) || std::llround(align_s * sample_rate) < 1) {
    throw ArgumentError("synthetic: align_s must be at least one sample");
  }
  if (std::ceil(min_event_s / align_s - 1e-9) * align_s > max_event_s + 1e-9) {
    throw ArgumentError("synthetic: no grid-aligned duration lies in [min_event_s, max_event_s]");
  }
}

SyntheticKind synthetic_kind(std::size_t class_id) {
  if (class_id == 0) return SyntheticKind::kStationary;
  static constexpr SyntheticKind kCycle[] = {SyntheticKind::kToneBurst, SyntheticKind::kChirp,
                                             SyntheticKind::kNoiseBurst, SyntheticKind::kAmTone};
  return kCycle[(class_id - 1) % 4];
}

double synthetic_center_hz(std::size_t class_id, std::size_t n_classes) {
  const dsp::SpectrogramGeometry g;
  static const dsp::MelFilterbank fb = dsp::mel_filterbank(g);
  // Filters 4 .. n_mels-5, evenly spread; distinct for n_classes <= n_mels-8.
  const double span = static_cast<double>(g.n_mels - 9);
  const auto idx = 4 + static_cast<std::size_t>(
                           std::lround(static_cast<double>(class_id) * span / static_cast<double>(n_classes - 1)));
  return fb.center_freqs.at(idx);
}

ClassList synthetic_classes(std::size_t n_classes) {
  static constexpr const char* kKindName[] = {"stationary hum", "tone burst", "chirp", "noise burst", "am tone"};
  ClassList out;
  for (std::size_t c = 0; c < n_classes; ++c) {
    char id[32], name[96];
    std::snprintf(id, sizeof id, "/synth/c%02zu", c);
    std::snprintf(name, sizeof name, "%s %.0f Hz", kKindName[static_cast<int>(synthetic_kind(c))],
                  synthetic_center_hz(c, n_classes));
    out.add(id, name);
  }
  return out;
}

DatasetManifest generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed, Split split) {
  cfg.validate();
  DatasetManifest m;
  m.classes = synthetic_classes(cfg.n_classes);
  m.split = split;
  const int sr = cfg.sample_rate;
  const auto n_samples = static_cast<std::size_t>(std::llround(cfg.clip_s * sr));
  const std::uint64_t split_stream = rnd::combine(seed, rnd::hash_string(split_name(split)));

  for (std::size_t i = 0; i < cfg.n_clips; ++i) {
    Draws d(rnd::combine(split_stream, i));
    ClipRecord r;
    char id[48];
    std::snprintf(id, sizeof id, "syn_%s_%05zu", split_name(split), i);
    r.clip_id = id;

    std::vector<double> w(n_samples, 0.0);
    const std::size_t n_fg = cfg.n_classes - 1;
    const std::size_t n_events = cfg.min_events + std::min(cfg.max_events - cfg.min_events,
                                                           static_cast<std::size_t>(d.uniform() * static_cast<double>(cfg.max_events - cfg.min_events + 1)));
    // Distinct foreground classes by a partial shuffle.
    std::vector<std::size_t> pool(n_fg);
    for (std::size_t k = 0; k < n_fg; ++k) pool[k] = k + 1;
    for (std::size_t k = 0; k < n_events; ++k) {
      const std::size_t j = k + std::min(n_fg - k - 1, static_cast<std::size_t>(d.uniform() * static_cast<double>(n_fg - k)));
      std::swap(pool[k], pool[j]);
    }

    // Event boundaries sit on the alignment grid.
    const auto grid = static_cast<std::size_t>(std::llround(cfg.align_s * sr));
    const std::size_t grid_total = n_samples / grid;
    const auto min_units = static_cast<std::size_t>(std::ceil(cfg.min_event_s / cfg.align_s - 1e-9));
    std::vector<std::size_t> units(n_events);
    std::size_t total = 0;
    for (auto& u : units) {
      const double dur = cfg.min_event_s + (cfg.max_event_s - cfg.min_event_s) * d.uniform();
      u = std::max(min_units, static_cast<std::size_t>(std::llround(dur / cfg.align_s)));
      total += u;
    }
    if (total > grid_total) throw ArgumentError("synthetic: events do not fit in the clip");
    // Free time is split into n_events + 1 random gaps, so events never overlap.
    std::vector<double> weights(n_events + 1);
    double wsum = 0.0;
    for (auto& x : weights) wsum += (x = d.uniform());
    const double slack = static_cast<double>(grid_total - total);

    std::vector<EventLabel> events;
    double gap_acc = 0.0;
    std::size_t used = 0;
    for (std::size_t k = 0; k < n_events; ++k) {
      gap_acc += weights[k];
      const std::size_t first = (static_cast<std::size_t>(std::floor(slack * gap_acc / wsum)) + used) * grid;
      const std::size_t count = units[k] * grid;
      const std::size_t c = pool[k];
      const double amp = cfg.min_amplitude * std::pow(cfg.max_amplitude / cfg.min_amplitude, d.uniform());
      render_event(w, sr, first, count, synthetic_kind(c), synthetic_center_hz(c, cfg.n_classes), amp, d);
      events.push_back({c, static_cast<double>(first) / sr, static_cast<double>(first + count) / sr});
      used += units[k];
    }

    if (d.uniform() < cfg.background_prob) {
      const double f = synthetic_center_hz(0, cfg.n_classes);
      const double phase = 2.0 * std::numbers::pi * d.uniform();
      for (std::size_t n = 0; n < n_samples; ++n) {
        const double t = static_cast<double>(n) / sr;
        w[n] += kHumAmplitude * (1.0 + 0.3 * std::sin(2.0 * std::numbers::pi * 3.0 * t)) / 1.3 *
                std::sin(2.0 * std::numbers::pi * f * t + phase);
      }
      r.weak_labels.push_back(0);
    }
    if (cfg.background_sigma > 0.0) {
      for (double& x : w) x += cfg.background_sigma * d.normal();
    }

    double peak = 0.0;
    for (double x : w) peak = std::max(peak, std::abs(x));
    if (peak > kPeakLimit) {
      for (double& x : w) x *= kPeakLimit / peak;
    }

    for (const auto& e : events) r.weak_labels.push_back(e.class_id);
    std::sort(r.weak_labels.begin(), r.weak_labels.end());
    std::sort(events.begin(), events.end(), [](const EventLabel& a, const EventLabel& b) { return a.t0_s < b.t0_s; });
    r.strong_labels = std::move(events);
    r.waveform = dsp::Waveform{std::move(w), sr};
    m.clips.push_back(std::move(r));
  }
  return m;
}

void write_dataset(const fs::path& dir, const DatasetManifest& m) {
  std::error_code ec;
  fs::create_directories(dir / "audio", ec);
  if (ec) throw IoError("cannot create " + (dir / "audio").string() + ": " + ec.message());
  write_class_list(dir / "classes.csv", m.classes);
  const std::string s = split_name(m.split);
  write_weak_csv(dir / (s + "_weak.csv"), m);
  write_strong_csv(dir / (s + "_strong.csv"), m);
  for (const auto& r : m.clips) {
    if (!r.waveform) throw ArgumentError("write_dataset: clip " + r.clip_id + " has no waveform");
    dsp::write_wav(dir / "audio" / (r.clip_id + ".wav"), *r.waveform);
  }
}

DatasetManifest read_dataset(const fs::path& dir, Split split) {
  const std::string s = split_name(split);
  const ClassList classes = load_class_list(dir / "classes.csv");
  DatasetManifest m = load_weak_csv(dir / (s + "_weak.csv"), classes, dir / "audio");
  m.split = split;
  const fs::path strong = dir / (s + "_strong.csv");
  if (fs::exists(strong)) attach_strong_labels(m, load_strong_csv(strong, classes));
  return m;
}

dsp::Waveform clip_waveform(const ClipRecord& r, int sample_rate) {
  dsp::Waveform w = r.waveform ? *r.waveform : dsp::read_wav(r.audio_path);
  if (w.sample_rate != sample_rate) w = dsp::resample(w, sample_rate);
  return w;
}

std::vector<std::uint8_t> encode_feature_cache(const dsp::LogMelSpectrogram& s) {
  const auto& g = s.geometry();
  std::vector<std::uint8_t> b;
  b.reserve(kHeaderBytes + 4 * s.values().size());
  b.insert(b.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(b, kCacheVersion);
  put_u32(b, checked_u32(g.n_mels, "n_mels"));
  put_u32(b, checked_u32(s.n_frames(), "n_frames"));
  put_u32(b, checked_u32(static_cast<std::size_t>(g.sample_rate), "sample_rate"));
  put_u32(b, checked_u32(g.window_len, "window_len"));
  put_u32(b, checked_u32(g.hop, "hop"));
  put_u32(b, checked_u32(g.fft_len, "fft_len"));
  put_u64(b, std::bit_cast<std::uint64_t>(g.f_min));
  put_u64(b, std::bit_cast<std::uint64_t>(g.f_max));
  put_u64(b, std::bit_cast<std::uint64_t>(g.log_floor));
  for (double v : s.values()) put_u32(b, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return b;
}

dsp::LogMelSpectrogram decode_feature_cache(std::span<const std::uint8_t> b) {
  if (b.size() < kHeaderBytes) throw FormatError("feature cache: truncated header");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), b.begin())) throw FormatError("feature cache: bad magic");
  const std::uint32_t version = get_u32(b, 4);
  if (version != kCacheVersion) throw FormatError("feature cache: unsupported version " + std::to_string(version));
  dsp::SpectrogramGeometry g;
  g.n_mels = get_u32(b, 8);
  const std::size_t n_frames = get_u32(b, 12);
  g.sample_rate = static_cast<int>(get_u32(b, 16));
  g.window_len = get_u32(b, 20);
  g.hop = get_u32(b, 24);
  g.fft_len = get_u32(b, 28);
  g.f_min = std::bit_cast<double>(get_u64(b, 32));
  g.f_max = std::bit_cast<double>(get_u64(b, 40));
  g.log_floor = std::bit_cast<double>(get_u64(b, 48));
  try {
    g.validate();
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("feature cache: invalid geometry: ") + e.what());
  }
  const std::size_t count = g.n_mels * n_frames;
  if (b.size() - kHeaderBytes != 4 * count) {
    throw FormatError("feature cache: header declares " + std::to_string(count) + " values but payload holds " +
                      std::to_string(b.size() - kHeaderBytes) + " bytes");
  }
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = static_cast<double>(std::bit_cast<float>(get_u32(b, kHeaderBytes + 4 * i)));
  }
  return dsp::LogMelSpectrogram(g, n_frames, std::move(values));
}

void write_feature_cache(const fs::path& path, const dsp::LogMelSpectrogram& s) {
  const auto bytes = encode_feature_cache(s);
  // Write aside and rename, so concurrent readers never see a partial file.
  const fs::path tmp = path.string() + ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

dsp::LogMelSpectrogram read_feature_cache(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_feature_cache(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

dsp::LogMelSpectrogram round_to_f32(const dsp::LogMelSpectrogram& s) {
  std::vector<double> v(s.values().begin(), s.values().end());
  for (double& x : v) x = static_cast<double>(static_cast<float>(x));
  return dsp::LogMelSpectrogram(s.geometry(), s.n_frames(), std::move(v));
}

}  // namespace aerobust::data
