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
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "aerobust/attack.hpp"
#include "aerobust/data.hpp"
#include "aerobust/dsp.hpp"
#include "aerobust/metrics.hpp"
#include "aerobust/nn/model.hpp"
#include "aerobust/nn/train.hpp"
#include "aerobust/zoo.hpp"

namespace aerobust::bench {

using Json = nlohmann::json;

inline constexpr const char* kToolkitVersion = "aerobust 0.1.0";

namespace cond {
struct Clean {};
struct Consecutive {
  double start_s = 0.0;
  double duration_s = 0.0;
};
struct Intermittent {
  double interval_s = 1.0;
};
struct Concat {
  double interval_s = 1.0;
};
struct StrongLabel {};
// Noise seeds are mixed with the per-clip seed.
struct Gaussian1D {
  double sigma = 0.1;
  std::uint64_t seed = 0;
};
struct Gaussian2D {
  double sigma = 0.1;
  std::uint64_t seed = 0;
};
struct Fgsm {
  double epsilon = 0.1;
};
struct Pgd {
  attack::AttackConfig config;
};
}  // namespace cond

using ConditionKind = std::variant<cond::Clean, cond::Consecutive, cond::Intermittent, cond::Concat,
                                   cond::StrongLabel, cond::Gaussian1D, cond::Gaussian2D, cond::Fgsm, cond::Pgd>;

struct ConditionSpec {
  std::string name;
  ConditionKind kind;

  void validate() const;
  bool is_attack() const;
  Json to_json() const;
  static ConditionSpec from_json(const Json& j);
};

// Default grid: Clean, 4s (every 2 s), first/mid/last 5 s, every 1..0.125 s,
// concat 0.125..1 s, 2D/1D white noise, strong-label masking, FGSM and PGD
// under both norms.
std::vector<ConditionSpec> default_conditions(double noise_sigma = 0.1, double epsilon = 0.1, double alpha = 0.01,
                                              std::size_t steps = 20);

// Report order: clean, consecutive, intermittent by descending d, concat by
// ascending d, strong label, Gaussian, attacks. Ties keep input order.
std::vector<ConditionSpec> report_order(std::vector<ConditionSpec> conditions);

struct ExperimentConfig {
  std::filesystem::path data_dir;
  data::Split split = data::Split::kEval;
  std::vector<std::filesystem::path> models;
  std::vector<ConditionSpec> conditions;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::filesystem::path out_dir;
  std::filesystem::path cache_dir;  // optional .lmel cache for the eval clips
  std::vector<double> d_grid;       // empty: every intermittent d in the grid
  std::size_t top_k = 5;

  // Adds Clean when missing and checks names are unique.
  void validate();
  Json to_json() const;
  std::string hash() const;
};

// Flat `key = value` lines followed by repeated [condition] blocks; '#'
// starts a comment. Relative paths resolve against the file's directory.
// Unknown keys are errors.
ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ModelInfo {
  std::string name;
  std::string family;
  std::filesystem::path path;
};

struct CellResult {
  bool ok = false;
  std::string error;
  metrics::MetricTriple triple;
  std::vector<std::optional<double>> class_ap;
  std::vector<std::optional<double>> class_auc;
  metrics::PredictionSet predictions;
};

struct EvalReport {
  std::vector<ModelInfo> models;
  std::vector<ConditionSpec> conditions;  // report order
  std::vector<std::string> class_names;
  std::vector<std::string> clip_ids;
  std::vector<CellResult> cells;  // models x conditions, row-major
  Json provenance;

  CellResult& cell(std::size_t model, std::size_t condition) { return cells[model * conditions.size() + condition]; }
  const CellResult& cell(std::size_t model, std::size_t condition) const {
    return cells[model * conditions.size() + condition];
  }
  std::optional<std::size_t> condition_index(const std::string& name) const;
  std::optional<std::size_t> model_index(const std::string& name) const;

  Json to_json() const;
  static EvalReport from_json(const Json& j);
};

// Features are rounded to float32, the precision of the feature cache, so a
// cached and an uncached run see identical inputs.
dsp::LogMelSpectrogram featurize(const dsp::Waveform& w, const dsp::LogMelFrontend& fe);
std::vector<dsp::LogMelSpectrogram> featurize_all(const data::DatasetManifest& m, std::size_t jobs,
                                                  const std::filesystem::path& cache_dir = {});

nn::Tensor to_tensor(const dsp::LogMelSpectrogram& s);
std::vector<double> label_vector(const data::ClipRecord& r, std::size_t n_classes);

// Seed of one (clip, condition) cell, independent of evaluation order.
std::uint64_t cell_seed(std::uint64_t experiment_seed, const std::string& clip_id, const std::string& condition);

struct ClipContext {
  const dsp::LogMelSpectrogram* features = nullptr;
  const dsp::Waveform* waveform = nullptr;
  const data::ClipRecord* record = nullptr;
  const dsp::LogMelFrontend* frontend = nullptr;
  std::uint64_t seed = 0;
};

// Model input for one clip under one condition.
nn::Tensor apply_condition(const ConditionSpec& c, const ClipContext& clip, const nn::Model& m,
                           std::span<const double> y);

struct TrainOptions {
  zoo::ModelFamily family = zoo::ModelFamily::kCnnTransformer;
  zoo::FamilyConfig config;
  nn::TrainConfig train;
};

// Builds a model of the family, fits input normalization to the training
// features and trains it. Family, config and training settings are stored in
// the checkpoint metadata.
nn::Model train_model(const data::DatasetManifest& train_set, const std::vector<dsp::LogMelSpectrogram>& features,
                      const TrainOptions& opt, const nn::EpochCallback& on_epoch = {});

// Every referenced checkpoint and clip is loaded before any evaluation;
// a missing one raises ConfigError. Per-cell failures are recorded.
EvalReport run_experiment(const ExperimentConfig& cfg);

struct DHalf {
  enum class Censor { kNone, kBelow, kAbove };
  Censor censor = Censor::kNone;
  double value = 0.0;  // the estimate, or the bound when censored

  std::string text() const;
};

struct AttackPoint {
  std::string condition;
  std::string method;  // "fgsm" or "pgd"
  std::string norm;    // "linf" or "l2"
  double epsilon = 0.0;
  double mAP = 0.0;
};

struct ModelSummary {
  std::string model;
  double clean_map = 0.0;
  DHalf d_half;
  std::vector<AttackPoint> attacks;
};

struct RobustnessSummary {
  std::vector<ModelSummary> models;
  Json to_json() const;
};

// d_half: the intermittent interval at which mAP falls to half the clean mAP,
// interpolated linearly in log2(d) between the bracketing grid points (first
// crossing from the longest interval down). Censored when no bracket exists.
RobustnessSummary robustness_summary(const EvalReport& report, const std::vector<double>& d_grid = {});

enum class Format { kCsv, kMarkdown, kSvg, kSummary, kJson };
std::vector<Format> parse_formats(const std::string& list);

std::string report_csv(const EvalReport& report);
std::string report_markdown(const EvalReport& report, const RobustnessSummary& summary, std::size_t top_k = 5);
std::string map_vs_d_svg(const EvalReport& report);

// report.csv, report.md, plots/map_vs_d.svg, summary.json, report.json.
void emit_report(const EvalReport& report, const RobustnessSummary& summary, const std::vector<Format>& formats,
                 const std::filesystem::path& out_dir, std::size_t top_k = 5);

EvalReport load_report(const std::filesystem::path& dir);

}  // namespace aerobust::bench
