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

#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "aerobust/bench.hpp"
#include "aerobust/error.hpp"
#include "aerobust/parallel.hpp"

namespace aerobust::bench {
namespace {

// JSON has no infinities; d' reaches them at AUC 0 and 1.
Json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double from_number(const Json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw FormatError("report: bad number '" + s + "'");
}

Json optionals(const std::vector<std::optional<double>>& v) {
  Json a = Json::array();
  for (const auto& x : v) a.push_back(x ? Json(*x) : Json(nullptr));
  return a;
}

std::vector<std::optional<double>> optionals_from(const Json& j) {
  std::vector<std::optional<double>> v;
  for (const auto& x : j) v.push_back(x.is_null() ? std::nullopt : std::optional<double>(x.get<double>()));
  return v;
}

std::string describe(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    return ex.what();
  } catch (...) {
    return "unknown error";
  }
}

}  // namespace

std::optional<std::size_t> EvalReport::condition_index(const std::string& name) const {
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    if (conditions[i].name == name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> EvalReport::model_index(const std::string& name) const {
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (models[i].name == name) return i;
  }
  return std::nullopt;
}

Json EvalReport::to_json() const {
  Json j;
  j["provenance"] = provenance;
  j["models"] = Json::array();
  for (const auto& m : models) {
    j["models"].push_back({{"name", m.name}, {"family", m.family}, {"path", m.path.generic_string()}});
  }
  j["conditions"] = Json::array();
  for (const auto& c : conditions) j["conditions"].push_back(c.to_json());
  j["class_names"] = class_names;
  j["clip_ids"] = clip_ids;
  j["cells"] = Json::array();
  for (const auto& c : cells) {
    Json cell = {{"ok", c.ok}};
    if (!c.ok) {
      cell["error"] = c.error;
    } else {
      cell["mAP"] = number(c.triple.mAP);
      cell["auc"] = number(c.triple.auc);
      cell["d_prime"] = number(c.triple.d_prime);
      cell["class_ap"] = optionals(c.class_ap);
      cell["class_auc"] = optionals(c.class_auc);
      cell["scores"] = c.predictions.scores;
      cell["labels"] = c.predictions.labels;
    }
    j["cells"].push_back(std::move(cell));
  }
  return j;
}

EvalReport EvalReport::from_json(const Json& j) {
  EvalReport r;
  try {
    r.provenance = j.value("provenance", Json::object());
    for (const auto& m : j.at("models")) {
      r.models.push_back({m.at("name").get<std::string>(), m.at("family").get<std::string>(),
                          std::filesystem::path(m.at("path").get<std::string>())});
    }
    for (const auto& c : j.at("conditions")) r.conditions.push_back(ConditionSpec::from_json(c));
    r.class_names = j.at("class_names").get<std::vector<std::string>>();
    r.clip_ids = j.at("clip_ids").get<std::vector<std::string>>();
    for (const auto& c : j.at("cells")) {
      CellResult cell;
      cell.ok = c.at("ok").get<bool>();
      if (!cell.ok) {
        cell.error = c.value("error", "");
      } else {
        cell.triple = {from_number(c.at("mAP")), from_number(c.at("auc")), from_number(c.at("d_prime"))};
        cell.class_ap = optionals_from(c.at("class_ap"));
        cell.class_auc = optionals_from(c.at("class_auc"));
        cell.predictions = metrics::PredictionSet(r.clip_ids.size(), r.class_names.size());
        cell.predictions.scores = c.at("scores").get<std::vector<double>>();
        cell.predictions.labels = c.at("labels").get<std::vector<double>>();
        cell.predictions.validate();
      }
      r.cells.push_back(std::move(cell));
    }
  } catch (const Json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
  if (r.cells.size() != r.models.size() * r.conditions.size()) throw FormatError("report: cell count mismatch");
  return r;
}

dsp::LogMelSpectrogram featurize(const dsp::Waveform& w, const dsp::LogMelFrontend& fe) {
  return data::round_to_f32(fe(w));
}

std::vector<dsp::LogMelSpectrogram> featurize_all(const data::DatasetManifest& m, std::size_t jobs,
                                                  const std::filesystem::path& cache_dir) {
  const dsp::LogMelFrontend fe;
  if (!cache_dir.empty()) std::filesystem::create_directories(cache_dir);
  std::vector<dsp::LogMelSpectrogram> out(m.clips.size());
  parallel_for(out.size(), jobs, [&](std::size_t i) {
    const auto& r = m.clips[i];
    const auto path = cache_dir.empty() ? std::filesystem::path() : cache_dir / (r.clip_id + ".lmel");
    if (!path.empty() && std::filesystem::exists(path)) {
      try {
        auto cached = data::read_feature_cache(path);
        if (cached.geometry() == fe.geometry()) {
          out[i] = std::move(cached);
          return;
        }
        spdlog::warn("feature cache {} has a different geometry, recomputing", path.string());
      } catch (const FormatError& e) {
        spdlog::warn("feature cache {} unreadable ({}), recomputing", path.string(), e.what());
      }
    }
    out[i] = featurize(data::clip_waveform(r, fe.geometry().sample_rate), fe);
    if (!path.empty()) data::write_feature_cache(path, out[i]);
  });
  return out;
}

nn::Tensor to_tensor(const dsp::LogMelSpectrogram& s) {
  return nn::Tensor({s.n_mels(), s.n_frames()}, std::vector<double>(s.values().begin(), s.values().end()));
}

std::vector<double> label_vector(const data::ClipRecord& r, std::size_t n_classes) {
  std::vector<double> y(n_classes, 0.0);
  for (auto c : r.weak_labels) {
    if (c >= n_classes) throw ArgumentError("clip " + r.clip_id + ": label out of range");
    y[c] = 1.0;
  }
  return y;
}

nn::Model train_model(const data::DatasetManifest& train_set, const std::vector<dsp::LogMelSpectrogram>& features,
                      const TrainOptions& opt, const nn::EpochCallback& on_epoch) {
  if (features.size() != train_set.clips.size() || features.empty()) {
    throw ArgumentError("train_model: need one feature matrix per training clip");
  }
  if (opt.config.n_classes != train_set.classes.size()) {
    throw ArgumentError("train_model: model has " + std::to_string(opt.config.n_classes) + " classes, dataset has " +
                        std::to_string(train_set.classes.size()));
  }
  std::vector<nn::Example> examples;
  examples.reserve(features.size());
  double sum = 0.0, sum_sq = 0.0, count = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    examples.push_back({to_tensor(features[i]), label_vector(train_set.clips[i], opt.config.n_classes)});
    for (double v : features[i].values()) {
      sum += v;
      sum_sq += v * v;
      count += 1.0;
    }
  }
  const double mean = sum / count;
  const double sd = std::sqrt(std::max(sum_sq / count - mean * mean, 0.0));

  auto m = zoo::build_model(opt.family, opt.config, opt.train.seed);
  zoo::set_input_normalization(m, mean, sd > 0.0 ? sd : 1.0);
  const auto losses = nn::train(m, examples, opt.train, on_epoch);
  m.metadata()["train"] = {{"lr", opt.train.lr},
                           {"epochs", opt.train.epochs},
                           {"batch_size", opt.train.batch_size},
                           {"seed", opt.train.seed},
                           {"clips", examples.size()},
                           {"final_loss", losses.empty() ? 0.0 : losses.back()}};
  return m;
}

EvalReport run_experiment(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  cfg.validate();

  // Load everything up front so a bad path fails before any work.
  data::DatasetManifest manifest;
  try {
    manifest = data::read_dataset(cfg.data_dir, cfg.split);
  } catch (const std::exception& e) {
    throw ConfigError("cannot load dataset " + cfg.data_dir.string() + ": " + e.what());
  }
  if (manifest.clips.empty()) throw ConfigError("dataset " + cfg.data_dir.string() + " has no clips");
  const dsp::LogMelFrontend fe;
  std::vector<dsp::Waveform> waveforms(manifest.clips.size());
  try {
    parallel_for(waveforms.size(), cfg.jobs, [&](std::size_t i) {
      waveforms[i] = data::clip_waveform(manifest.clips[i], fe.geometry().sample_rate);
    });
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cannot load audio: ") + e.what());
  }
  for (std::size_t i = 0; i < waveforms.size(); ++i) manifest.clips[i].waveform = waveforms[i];

  std::vector<nn::Model> models;
  EvalReport report;
  for (const auto& path : cfg.models) {
    if (!std::filesystem::exists(path)) throw ConfigError("model checkpoint not found: " + path.string());
    try {
      models.push_back(nn::load(path));
    } catch (const std::exception& e) {
      throw ConfigError("cannot load model " + path.string() + ": " + e.what());
    }
    if (models.back().n_classes() != manifest.classes.size()) {
      throw ConfigError("model " + path.string() + " has " + std::to_string(models.back().n_classes()) +
                        " classes, dataset has " + std::to_string(manifest.classes.size()));
    }
    std::string family = "unknown";
    try {
      family = zoo::family_name(zoo::model_family(models.back()));
    } catch (const std::exception&) {
    }
    report.models.push_back({path.stem().string(), family, path});
  }

  const auto features = featurize_all(manifest, cfg.jobs, cfg.cache_dir);

  report.conditions = report_order(cfg.conditions);
  report.class_names = manifest.classes.names;
  for (const auto& r : manifest.clips) report.clip_ids.push_back(r.clip_id);

  const std::size_t n_models = models.size();
  const std::size_t n_conditions = report.conditions.size();
  const std::size_t n_clips = manifest.clips.size();
  const std::size_t n_classes = manifest.classes.size();

  std::vector<std::vector<double>> labels(n_clips);
  for (std::size_t i = 0; i < n_clips; ++i) labels[i] = label_vector(manifest.clips[i], n_classes);

  std::vector<metrics::PredictionSet> predictions(n_models * n_conditions,
                                                  metrics::PredictionSet(n_clips, n_classes));
  std::vector<std::exception_ptr> errors(n_models * n_conditions * n_clips);

  spdlog::info("evaluating {} models x {} conditions x {} clips on {} threads", n_models, n_conditions, n_clips,
               cfg.jobs);
  parallel_for(n_models * n_conditions * n_clips, cfg.jobs, [&](std::size_t task) {
    const std::size_t cell = task / n_clips;
    const std::size_t clip = task % n_clips;
    const std::size_t model = cell / n_conditions;
    const auto& condition = report.conditions[cell % n_conditions];
    try {
      const ClipContext ctx{&features[clip], &waveforms[clip], &manifest.clips[clip], &fe,
                            cell_seed(cfg.seed, manifest.clips[clip].clip_id, condition.name)};
      const auto x = apply_condition(condition, ctx, models[model], labels[clip]);
      const auto scores = models[model].forward(x);
      auto& p = predictions[cell];
      for (std::size_t c = 0; c < n_classes; ++c) {
        p.score(clip, c) = scores[c];
        p.label(clip, c) = labels[clip][c];
      }
    } catch (...) {
      errors[task] = std::current_exception();
    }
  });

  report.cells.resize(n_models * n_conditions);
  for (std::size_t cell = 0; cell < report.cells.size(); ++cell) {
    auto& out = report.cells[cell];
    for (std::size_t clip = 0; clip < n_clips && out.error.empty(); ++clip) {
      if (errors[cell * n_clips + clip]) {
        out.error = report.clip_ids[clip] + ": " + describe(errors[cell * n_clips + clip]);
      }
    }
    if (out.error.empty()) {
      try {
        const auto m = metrics::evaluate_set(predictions[cell]);
        out.triple = m.triple;
        out.class_ap = m.class_ap;
        out.class_auc = m.class_auc;
        out.predictions = std::move(predictions[cell]);
        out.ok = true;
      } catch (const std::exception& e) {
        out.error = e.what();
      }
    }
    if (!out.ok) {
      spdlog::warn("{} / {} failed: {}", report.models[cell / n_conditions].name,
                   report.conditions[cell % n_conditions].name, out.error);
    }
  }

  report.provenance = {{"toolkit", kToolkitVersion},
                       {"config_hash", cfg.hash()},
                       {"seed", cfg.seed},
                       {"split", data::split_name(cfg.split)},
                       {"clips", n_clips}};
  return report;
}

}  // namespace aerobust::bench
