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

#include <chrono>
#include <cstdio>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "aerobust/bench.hpp"
#include "aerobust/data.hpp"
#include "aerobust/error.hpp"
#include "aerobust/parallel.hpp"

namespace fs = std::filesystem;
using namespace aerobust;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  bool verbose = false;
};

int featurize_cmd(const Globals& g, const fs::path& wav_dir, const fs::path& out_dir) {
  if (!fs::is_directory(wav_dir)) throw ConfigError("not a directory: " + wav_dir.string());
  std::vector<fs::path> wavs;
  for (const auto& e : fs::directory_iterator(wav_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") wavs.push_back(e.path());
  }
  std::sort(wavs.begin(), wavs.end());
  fs::create_directories(out_dir);
  const dsp::LogMelFrontend fe;
  parallel_for(wavs.size(), g.jobs, [&](std::size_t i) {
    const auto w = dsp::resample(dsp::read_wav(wavs[i]), fe.geometry().sample_rate);
    data::write_feature_cache(out_dir / (wavs[i].stem().string() + ".lmel"), bench::featurize(w, fe));
  });
  spdlog::info("featurized {} clips into {}", wavs.size(), out_dir.string());
  return 0;
}

int gen_data_cmd(const Globals& g, data::SyntheticConfig cfg, std::size_t train_clips, std::size_t eval_clips,
                 const fs::path& out) {
  const std::uint64_t seed = g.seed.value_or(0);
  cfg.n_clips = train_clips;
  data::write_dataset(out, data::generate_synthetic(cfg, seed, data::Split::kTrain));
  cfg.n_clips = eval_clips;
  data::write_dataset(out, data::generate_synthetic(cfg, seed, data::Split::kEval));
  spdlog::info("wrote {} train and {} eval clips to {}", train_clips, eval_clips, out.string());
  return 0;
}

int train_cmd(const Globals& g, const std::string& family, const fs::path& data_dir, const fs::path& out,
              const fs::path& cache, bench::TrainOptions opt) {
  opt.family = zoo::parse_family(family);
  const auto train_set = data::read_dataset(data_dir, data::Split::kTrain);
  opt.config.n_classes = train_set.classes.size();
  opt.train.seed = g.seed.value_or(0);
  opt.train.jobs = g.jobs;
  const auto features = bench::featurize_all(train_set, g.jobs, cache);
  const auto t0 = std::chrono::steady_clock::now();
  const auto model = bench::train_model(train_set, features, opt, [&](std::size_t epoch, double loss) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    spdlog::info("{} epoch {} loss {:.4f} ({:.1f} s)", family, epoch + 1, loss, s);
  });
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  nn::save(model, out);
  spdlog::info("saved {}", out.string());
  return 0;
}

std::vector<bench::Format> all_formats() { return bench::parse_formats("all"); }

bench::RobustnessSummary summarize(const bench::EvalReport& report, const std::vector<double>& d_grid,
                                   std::vector<bench::Format>& formats) {
  const auto wanted = [&](bench::Format f) { return std::find(formats.begin(), formats.end(), f) != formats.end(); };
  if (!wanted(bench::Format::kSummary) && !wanted(bench::Format::kMarkdown)) return {};
  try {
    return bench::robustness_summary(report, d_grid);
  } catch (const ArgumentError& e) {
    spdlog::warn("no robustness summary: {}", e.what());
    std::erase(formats, bench::Format::kSummary);
    return {};
  }
}

int run_cmd(const Globals& g, const fs::path& config, const fs::path& out, bool jobs_given,
            const std::string& formats) {
  auto cfg = bench::load_experiment_config(config);
  if (g.seed) cfg.seed = *g.seed;
  if (jobs_given) cfg.jobs = g.jobs;
  if (!out.empty()) cfg.out_dir = out;
  if (cfg.out_dir.empty()) throw ConfigError("no output directory: pass --out or set 'out' in the config");
  auto fmts = formats.empty() ? all_formats() : bench::parse_formats(formats);
  const auto report = bench::run_experiment(cfg);
  const auto summary = summarize(report, cfg.d_grid, fmts);
  bench::emit_report(report, summary, fmts, cfg.out_dir, cfg.top_k);
  spdlog::info("report written to {}", cfg.out_dir.string());
  std::size_t failed = 0;
  for (const auto& c : report.cells) failed += c.ok ? 0 : 1;
  if (failed) spdlog::warn("{} of {} cells failed", failed, report.cells.size());
  return 0;
}

int report_cmd(const fs::path& in, const fs::path& out, const std::string& formats, std::size_t top_k) {
  const auto report = bench::load_report(in);
  auto fmts = bench::parse_formats(formats);
  const auto summary = summarize(report, {}, fmts);
  bench::emit_report(report, summary, fmts, out.empty() ? in : out, top_k);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robustness benchmark for audio event classifiers"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Experiment or generation seed")->capture_default_str();
  auto* jobs_opt = app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", g.verbose, "Log progress");

  fs::path wav_dir, feat_out;
  auto* featurize = app.add_subcommand("featurize", "Compute log-mel caches for a directory of WAV files");
  featurize->add_option("wav-dir", wav_dir, "Directory of .wav files")->required();
  featurize->add_option("--out", feat_out, "Cache directory")->required();

  data::SyntheticConfig syn;
  std::size_t train_clips = 150, eval_clips = 48;
  fs::path gen_out;
  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset (train and eval splits)");
  gen->add_option("--clips", train_clips, "Training clips")->capture_default_str();
  gen->add_option("--eval-clips", eval_clips, "Evaluation clips")->capture_default_str();
  gen->add_option("--classes", syn.n_classes, "Number of classes")->capture_default_str();
  gen->add_option("--min-amplitude", syn.min_amplitude, "Quietest event peak")->capture_default_str();
  gen->add_option("--noise", syn.background_sigma, "Background noise standard deviation")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory")->required();

  std::string family;
  fs::path train_data, train_out, train_cache;
  bench::TrainOptions topt;
  topt.train.lr = 3e-3;
  auto* train = app.add_subcommand("train", "Train one model family on the train split");
  train->add_option("--family", family, "vit, cnntrans, resnet or crnn")
      ->required()
      ->check(CLI::IsMember({"vit", "cnntrans", "resnet", "crnn"}));
  train->add_option("--data", train_data, "Dataset directory")->required();
  train->add_option("--out", train_out, "Checkpoint path")->required();
  train->add_option("--cache", train_cache, "Feature cache directory");
  train->add_option("--epochs", topt.train.epochs, "Epochs")->capture_default_str();
  train->add_option("--lr", topt.train.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--batch", topt.train.batch_size, "Batch size")->capture_default_str();
  train->add_option("--width", topt.config.width, "Channel width multiplier")->capture_default_str();

  fs::path config, run_out;
  std::string run_formats;
  auto* run = app.add_subcommand("run", "Evaluate every model under every condition of a config");
  run->add_option("--config", config, "Experiment config")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "Output directory (overrides the config)");
  run->add_option("--formats", run_formats, "csv,md,svg,summary,json (default: all)");

  fs::path report_in, report_out;
  std::string report_formats = "csv,md,svg";
  std::size_t top_k = 5;
  auto* report = app.add_subcommand("report", "Re-emit outputs from a saved report.json");
  report->add_option("--in", report_in, "Directory holding report.json")->required();
  report->add_option("--out", report_out, "Output directory (default: --in)");
  report->add_option("--formats", report_formats, "csv,md,svg,summary,json")->capture_default_str();
  report->add_option("--top-k", top_k, "Classes in the score shift tables")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) g.seed = seed;
  spdlog::set_level(g.verbose ? spdlog::level::info : spdlog::level::warn);

  try {
    if (*featurize) return featurize_cmd(g, wav_dir, feat_out);
    if (*gen) return gen_data_cmd(g, syn, train_clips, eval_clips, gen_out);
    if (*train) return train_cmd(g, family, train_data, train_out, train_cache, topt);
    if (*run) return run_cmd(g, config, run_out, static_cast<bool>(*jobs_opt), run_formats);
    if (*report) return report_cmd(report_in, report_out, report_formats, top_k);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
