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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "aerobust/bench.hpp"
#include "aerobust/error.hpp"
#include "aerobust/perturb.hpp"

namespace {

using namespace aerobust;
using namespace aerobust::bench;
namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("aerobust_bench_test_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Small eval split on disk plus two untrained checkpoints.
class BenchFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(scratch("suite"));
    data::SyntheticConfig cfg;
    cfg.n_clips = 6;
    data::write_dataset(*root_ / "data", data::generate_synthetic(cfg, 11, data::Split::kEval));
    for (std::uint64_t seed : {1, 2}) {
      auto m = zoo::build_model(zoo::ModelFamily::kResNetMini, zoo::FamilyConfig{}, seed);
      zoo::set_input_normalization(m, -8.0, 6.0);
      nn::save(m, *root_ / ("model" + std::to_string(seed) + ".apnn"));
    }
  }
  static void TearDownTestSuite() {
    fs::remove_all(*root_);
    delete root_;
  }

  static ExperimentConfig config(std::vector<ConditionSpec> conditions, std::size_t n_models = 2) {
    ExperimentConfig c;
    c.data_dir = *root_ / "data";
    for (std::size_t i = 1; i <= n_models; ++i) c.models.push_back(*root_ / ("model" + std::to_string(i) + ".apnn"));
    c.conditions = std::move(conditions);
    c.seed = 5;
    return c;
  }

  static const fs::path& root() { return *root_; }

 private:
  static fs::path* root_;
};

fs::path* BenchFixture::root_ = nullptr;

std::vector<ConditionSpec> stochastic_conditions() {
  attack::AttackConfig pgd;
  pgd.steps = 2;
  pgd.random_start = true;
  return {{"Every 0.5s Occlusion", cond::Intermittent{0.5}},
          {"White Noise 2D", cond::Gaussian2D{0.1, 0}},
          {"White Noise 1D", cond::Gaussian1D{0.01, 0}},
          {"FGSM", cond::Fgsm{0.1}},
          {"l-inf attack", cond::Pgd{pgd}}};
}

TEST_F(BenchFixture, GridHasOneCellPerModelAndConditionPlusClean) {
  const auto report = run_experiment(config({{"Every 1s Occlusion", cond::Intermittent{1.0}},
                                             {"First 5s Occlusion", cond::Consecutive{0.0, 5.0}},
                                             {"0.5s Concat", cond::Concat{0.5}}}));
  ASSERT_EQ(report.models.size(), 2u);
  ASSERT_EQ(report.conditions.size(), 4u);
  EXPECT_EQ(report.cells.size(), 8u);
  EXPECT_EQ(report.conditions[0].name, "Clean");
  for (const auto& c : report.cells) EXPECT_TRUE(c.ok) << c.error;
  EXPECT_EQ(report.clip_ids.size(), 6u);
}

TEST_F(BenchFixture, ResultsDoNotDependOnJobs) {
  auto cfg = config(stochastic_conditions());
  cfg.jobs = 1;
  const auto serial = run_experiment(cfg);
  cfg.jobs = 8;
  const auto parallel = run_experiment(cfg);
  ASSERT_EQ(serial.cells.size(), parallel.cells.size());
  for (std::size_t i = 0; i < serial.cells.size(); ++i) {
    ASSERT_TRUE(serial.cells[i].ok) << serial.cells[i].error;
    EXPECT_EQ(serial.cells[i].predictions.scores, parallel.cells[i].predictions.scores);
  }
  EXPECT_EQ(report_csv(serial), report_csv(parallel));
}

TEST_F(BenchFixture, ResultsDoNotDependOnClipOrder) {
  auto m = data::read_dataset(root() / "data", data::Split::kEval);
  for (auto& r : m.clips) r.waveform = data::clip_waveform(r, 16000);
  std::reverse(m.clips.begin(), m.clips.end());
  const auto dir = scratch("reversed");
  data::write_dataset(dir, m);

  auto cfg = config(stochastic_conditions(), 1);
  const auto forward = run_experiment(cfg);
  cfg.data_dir = dir;
  const auto backward = run_experiment(cfg);
  const std::size_t n = forward.clip_ids.size();
  for (std::size_t c = 0; c < forward.conditions.size(); ++c) {
    const auto& a = forward.cell(0, c).predictions;
    const auto& b = backward.cell(0, c).predictions;
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_EQ(forward.clip_ids[i], backward.clip_ids[n - 1 - i]);
      for (std::size_t k = 0; k < a.n_classes; ++k) {
        EXPECT_EQ(a.score(i, k), b.score(n - 1 - i, k)) << forward.conditions[c].name;
      }
    }
  }
  fs::remove_all(dir);
}

TEST_F(BenchFixture, CleanCellEqualsDirectInference) {
  const auto report = run_experiment(config({}, 1));
  const auto manifest = data::read_dataset(root() / "data", data::Split::kEval);
  const auto model = nn::load(root() / "model1.apnn");
  const dsp::LogMelFrontend fe;
  const auto& cell = report.cell(0, *report.condition_index("Clean"));
  ASSERT_TRUE(cell.ok);
  for (std::size_t i = 0; i < manifest.clips.size(); ++i) {
    const auto x = to_tensor(featurize(dsp::read_wav(manifest.clips[i].audio_path), fe));
    const auto s = model.forward(x);
    for (std::size_t k = 0; k < model.n_classes(); ++k) EXPECT_EQ(cell.predictions.score(i, k), s[k]);
  }
}

TEST_F(BenchFixture, ZeroNoiseWaveformPathMatchesClean) {
  const auto report = run_experiment(config({{"Silent noise", cond::Gaussian1D{0.0, 0}}}, 1));
  EXPECT_EQ(report.cell(0, 0).predictions.scores, report.cell(0, 1).predictions.scores);
}

TEST_F(BenchFixture, CachedFeaturesGiveIdenticalScores) {
  auto cfg = config(stochastic_conditions(), 1);
  const auto plain = run_experiment(cfg);
  cfg.cache_dir = scratch("cache");
  const auto first = run_experiment(cfg);  // fills the cache
  const auto second = run_experiment(cfg);  // reads it
  EXPECT_EQ(report_csv(plain), report_csv(first));
  for (std::size_t i = 0; i < plain.cells.size(); ++i) {
    EXPECT_EQ(plain.cells[i].predictions.scores, second.cells[i].predictions.scores);
  }
  fs::remove_all(cfg.cache_dir);
}

TEST_F(BenchFixture, MissingInputsFailBeforeWork) {
  auto cfg = config({});
  cfg.models.push_back(root() / "missing.apnn");
  EXPECT_THROW(run_experiment(cfg), ConfigError);
  cfg = config({});
  cfg.data_dir = root() / "no_such_dir";
  EXPECT_THROW(run_experiment(cfg), ConfigError);
}

TEST_F(BenchFixture, CellFailureIsRecordedAndRunContinues) {
  const auto dir = scratch("weak_only");
  fs::copy(root() / "data", dir, fs::copy_options::recursive);
  fs::remove(dir / "eval_strong.csv");
  auto cfg = config({{"Masking Strong", cond::StrongLabel{}}, {"Every 1s Occlusion", cond::Intermittent{1.0}}}, 1);
  cfg.data_dir = dir;
  const auto report = run_experiment(cfg);
  const auto& strong = report.cell(0, *report.condition_index("Masking Strong"));
  EXPECT_FALSE(strong.ok);
  EXPECT_NE(strong.error.find("strong"), std::string::npos);
  EXPECT_TRUE(report.cell(0, *report.condition_index("Every 1s Occlusion")).ok);
  EXPECT_NE(report_csv(report).find("Masking Strong,NA,NA,NA"), std::string::npos);
  fs::remove_all(dir);
}

TEST_F(BenchFixture, EmitWritesEveryFormatAndIsByteStable) {
  const auto report = run_experiment(config({{"Every 1s Occlusion", cond::Intermittent{1.0}},
                                             {"Every 0.5s Occlusion", cond::Intermittent{0.5}},
                                             {"FGSM", cond::Fgsm{0.1}}}));
  const auto summary = robustness_summary(report);
  const auto out = scratch("emit");
  emit_report(report, summary, parse_formats("all"), out);
  for (const char* f : {"report.csv", "report.md", "plots/map_vs_d.svg", "summary.json", "report.json"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const auto csv = slurp(out / "report.csv");
  emit_report(report, summary, parse_formats("csv"), out);
  EXPECT_EQ(csv, slurp(out / "report.csv"));

  // Header plus one row per cell.
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 4);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "model,condition,mAP,AUC,d_prime");

  const auto reloaded = load_report(out);
  EXPECT_EQ(report_csv(reloaded), csv);
  EXPECT_EQ(reloaded.cell(1, 3).predictions.scores, report.cell(1, 3).predictions.scores);

  const auto md = slurp(out / "report.md");
  for (const auto& c : report.conditions) EXPECT_NE(md.find("| " + c.name + " |"), std::string::npos) << c.name;
  EXPECT_NE(md.find("model1, FGSM"), std::string::npos);
  fs::remove_all(out);
}

TEST(ReportCsv, FixedThreeDecimals) {
  EvalReport r;
  r.models = {{"m", "resnet", "m.apnn"}};
  r.conditions = {{"Clean", cond::Clean{}}, {"Bad", cond::Intermittent{1.0}}};
  r.cells.resize(2);
  r.cells[0].ok = true;
  r.cells[0].triple = {0.4566, 0.99949, std::numeric_limits<double>::infinity()};
  r.cells[1].error = "boom";
  EXPECT_EQ(report_csv(r), "model,condition,mAP,AUC,d_prime\nm,Clean,0.457,0.999,inf\nm,Bad,NA,NA,NA\n");
}

TEST(Conditions, JsonRoundTripForEveryKind) {
  attack::AttackConfig a;
  a.norm = attack::Norm::kL2;
  a.epsilon = 0.2;
  a.steps = 7;
  a.random_start = true;
  a.seed = 9;
  const std::vector<ConditionSpec> all = {{"c", cond::Clean{}},
                                          {"k", cond::Consecutive{2.5, 5.0}},
                                          {"i", cond::Intermittent{0.25}},
                                          {"n", cond::Concat{0.125}},
                                          {"s", cond::StrongLabel{}},
                                          {"g1", cond::Gaussian1D{0.3, 4}},
                                          {"g2", cond::Gaussian2D{0.2, 3}},
                                          {"f", cond::Fgsm{0.05}},
                                          {"p", cond::Pgd{a}}};
  for (const auto& c : all) {
    const auto back = ConditionSpec::from_json(c.to_json());
    EXPECT_EQ(back.name, c.name);
    EXPECT_EQ(back.to_json(), c.to_json());
  }
}

TEST(Conditions, RejectsBadSpecs) {
  EXPECT_THROW(ConditionSpec::from_json({{"name", "x"}, {"kind", "blur"}}), ConfigError);
  EXPECT_THROW(ConditionSpec::from_json({{"name", "x"}, {"kind", "intermittent"}}), ConfigError);
  EXPECT_THROW(ConditionSpec::from_json({{"name", "x"}, {"kind", "intermittent"}, {"interval", -1}}), ConfigError);
  EXPECT_THROW(ConditionSpec::from_json({{"name", "x"}, {"kind", "intermittent"}, {"interval", 1}, {"intervl", 1}}),
               ConfigError);
  EXPECT_THROW(ConditionSpec::from_json({{"name", "x"}, {"kind", "pgd"}, {"norm", "l1"}}), ConfigError);
  EXPECT_THROW(ConditionSpec::from_json({{"name", "x"}, {"kind", "pgd"}, {"steps", 0}}), ConfigError);
  EXPECT_THROW(ConditionSpec::from_json({{"name", ""}, {"kind", "clean"}}), ConfigError);
}

TEST(Conditions, DefaultGridInReportOrder) {
  const auto defaults = default_conditions();
  std::vector<std::string> names;
  for (const auto& c : report_order(defaults)) names.push_back(c.name);
  const std::vector<std::string> expected = {
      "Clean",          "First 5s Occlusion",  "Mid 5s Occlusion",     "Last 5s Occlusion",
      "4s Occlusion",   "Every 1s Occlusion",  "Every 0.5s Occlusion", "Every 0.25s Occlusion",
      "Every 0.125s Occlusion", "0.125s Concat", "0.25s Concat",       "0.5s Concat",
      "1s Concat",      "Masking Strong",      "White Noise 2D",       "White Noise 1D",
      "FGSM",           "l-inf attack",        "l2 attack"};
  EXPECT_EQ(names, expected);
}

TEST(Conditions, ReportOrderSortsByKindThenInterval) {
  std::vector<ConditionSpec> c = {{"cat1", cond::Concat{1.0}},       {"pgd", cond::Pgd{}},
                                  {"int0.5", cond::Intermittent{0.5}}, {"strong", cond::StrongLabel{}},
                                  {"cat0.25", cond::Concat{0.25}},   {"int2", cond::Intermittent{2.0}},
                                  {"clean", cond::Clean{}}};
  std::vector<std::string> names;
  for (const auto& x : report_order(c)) names.push_back(x.name);
  EXPECT_EQ(names, (std::vector<std::string>{"clean", "int2", "int0.5", "cat0.25", "cat1", "strong", "pgd"}));
}

TEST(Conditions, CellSeedDependsOnClipAndCondition) {
  EXPECT_EQ(cell_seed(1, "a", "x"), cell_seed(1, "a", "x"));
  EXPECT_NE(cell_seed(1, "a", "x"), cell_seed(2, "a", "x"));
  EXPECT_NE(cell_seed(1, "a", "x"), cell_seed(1, "b", "x"));
  EXPECT_NE(cell_seed(1, "a", "x"), cell_seed(1, "a", "y"));
}

TEST(Config, ParsesKeysAndBlocks) {
  const auto cfg = parse_experiment_config(
      "# comment\n"
      "data = ds\n"
      "model = m/a.apnn\n"
      "model = /abs/b.apnn\n"
      "seed = 42\n"
      "jobs = 3\n"
      "out = results\n"
      "top_k = 3\n"
      "d_grid = 1, 0.5\n"
      "[condition]\n"
      "name = Every 0.25s Occlusion\n"
      "kind = intermittent\n"
      "interval = 0.25  # trailing comment\n"
      "[condition]\n"
      "name = strong pgd\n"
      "kind = pgd\n"
      "norm = l2\n"
      "steps = 5\n"
      "random_start = true\n",
      "/base");
  EXPECT_EQ(cfg.data_dir, fs::path("/base/ds"));
  ASSERT_EQ(cfg.models.size(), 2u);
  EXPECT_EQ(cfg.models[0], fs::path("/base/m/a.apnn"));
  EXPECT_EQ(cfg.models[1], fs::path("/abs/b.apnn"));
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.jobs, 3u);
  EXPECT_EQ(cfg.out_dir, fs::path("/base/results"));
  EXPECT_EQ(cfg.top_k, 3u);
  EXPECT_EQ(cfg.d_grid, (std::vector<double>{1.0, 0.5}));
  // Clean is added implicitly, custom blocks replace the default grid.
  ASSERT_EQ(cfg.conditions.size(), 3u);
  EXPECT_EQ(cfg.conditions[0].name, "Clean");
  const auto& pgd = std::get<cond::Pgd>(cfg.conditions[2].kind).config;
  EXPECT_EQ(pgd.norm, attack::Norm::kL2);
  EXPECT_EQ(pgd.steps, 5u);
  EXPECT_TRUE(pgd.random_start);
}

TEST(Config, DefaultGridAndNoiseVariance) {
  const auto cfg = parse_experiment_config("data = d\nmodel = m\nnoise_sigma = 0.04\nnoise_is_variance = true\n");
  EXPECT_EQ(cfg.conditions.size(), default_conditions().size());
  for (const auto& c : cfg.conditions) {
    if (const auto* g = std::get_if<cond::Gaussian2D>(&c.kind)) EXPECT_DOUBLE_EQ(g->sigma, 0.2);
  }
  const auto both = parse_experiment_config(
      "data = d\nmodel = m\ndefault_conditions = true\n[condition]\nname = extra\nkind = concat\ninterval = 2\n");
  EXPECT_EQ(both.conditions.size(), default_conditions().size() + 1);
}

TEST(Config, RejectsTyposAndIncompleteConfigs) {
  EXPECT_THROW(parse_experiment_config("data = d\nmodel = m\nsed = 1\n"), ConfigError);
  EXPECT_THROW(parse_experiment_config("data = d\n"), ConfigError);
  EXPECT_THROW(parse_experiment_config("model = m\n"), ConfigError);
  EXPECT_THROW(parse_experiment_config("data = d\nmodel = m\njobs = 0\n"), ConfigError);
  EXPECT_THROW(parse_experiment_config("data = d\nmodel = m\nseed = -1\n"), ConfigError);
  EXPECT_THROW(parse_experiment_config("data = d\nmodel = m\n[section]\n"), ConfigError);
  EXPECT_THROW(parse_experiment_config("data = d\nmodel = m\njust text\n"), ConfigError);
  EXPECT_THROW(parse_experiment_config("data = d\nmodel = m\n[condition]\nname = a\nkind = concat\ninterval = 1\n"
                                       "[condition]\nname = a\nkind = concat\ninterval = 2\n"),
               ConfigError);
  EXPECT_THROW(parse_experiment_config("data = d\nmodel = m\n[condition]\nname = a\nkind = concat\nwidth = 1\n"),
               ConfigError);
  EXPECT_THROW(load_experiment_config("/nonexistent/x.cfg"), ConfigError);
}

TEST(Config, HashIgnoresJobsAndOutput) {
  auto a = parse_experiment_config("data = d\nmodel = m\njobs = 1\nout = x\n");
  auto b = parse_experiment_config("data = d\nmodel = m\njobs = 8\nout = y\n");
  EXPECT_EQ(a.hash(), b.hash());
  b.seed = 1;
  EXPECT_NE(a.hash(), b.hash());
}

// Report with a given clean mAP and (d, mAP) intermittent points.
EvalReport curve(double clean, const std::vector<std::pair<double, double>>& points) {
  EvalReport r;
  r.models = {{"m", "resnet", "m.apnn"}};
  r.conditions.push_back({"Clean", cond::Clean{}});
  for (const auto& [d, v] : points) r.conditions.push_back({"Every " + std::to_string(d), cond::Intermittent{d}});
  r.cells.resize(r.conditions.size());
  r.cells[0].ok = true;
  r.cells[0].triple.mAP = clean;
  for (std::size_t i = 0; i < points.size(); ++i) {
    r.cells[i + 1].ok = true;
    r.cells[i + 1].triple.mAP = points[i].second;
  }
  return r;
}

TEST(Summary, DHalfInterpolatesInLog2D) {
  // Target 0.20 lies between (0.5, 0.21) and (0.25, 0.05): t = 0.01 / 0.16,
  // log2 d = -1 - t.
  const auto s = robustness_summary(curve(0.4, {{1.0, 0.32}, {0.5, 0.21}, {0.25, 0.05}}));
  ASSERT_EQ(s.models.size(), 1u);
  EXPECT_EQ(s.models[0].d_half.censor, DHalf::Censor::kNone);
  EXPECT_NEAR(s.models[0].d_half.value, std::exp2(-1.0625), 1e-12);
  EXPECT_NEAR(s.models[0].d_half.value, 0.479, 5e-4);
  EXPECT_DOUBLE_EQ(s.models[0].clean_map, 0.4);
}

TEST(Summary, DHalfCensoring) {
  const auto above = robustness_summary(curve(0.4, {{1.0, 0.39}, {0.5, 0.3}, {0.125, 0.25}}));
  EXPECT_EQ(above.models[0].d_half.censor, DHalf::Censor::kBelow);
  EXPECT_EQ(above.models[0].d_half.text(), "< 0.125");

  const auto constant = robustness_summary(curve(0.4, {{1.0, 0.3}, {0.5, 0.3}, {0.25, 0.3}}));
  EXPECT_EQ(constant.models[0].d_half.censor, DHalf::Censor::kBelow);

  const auto below = robustness_summary(curve(0.4, {{1.0, 0.1}, {0.5, 0.1}, {0.25, 0.05}}));
  EXPECT_EQ(below.models[0].d_half.censor, DHalf::Censor::kAbove);
  EXPECT_EQ(below.models[0].d_half.text(), "> 1");

  // A restricted grid only sees its own points.
  const auto grid = robustness_summary(curve(0.4, {{1.0, 0.32}, {0.5, 0.21}, {0.25, 0.05}}), {1.0, 0.5});
  EXPECT_EQ(grid.models[0].d_half.censor, DHalf::Censor::kBelow);
  EXPECT_EQ(grid.models[0].d_half.text(), "< 0.5");
}

TEST(Summary, RequiresIntermittentConditions) {
  EXPECT_THROW(robustness_summary(curve(0.4, {})), ArgumentError);
}

TEST(Summary, CollectsAttackPoints) {
  auto r = curve(0.4, {{1.0, 0.3}});
  attack::AttackConfig a;
  a.norm = attack::Norm::kL2;
  a.epsilon = 0.2;
  r.conditions.push_back({"l2 attack", cond::Pgd{a}});
  r.cells.push_back({});
  r.cells.back().ok = true;
  r.cells.back().triple.mAP = 0.1;
  const auto s = robustness_summary(r);
  ASSERT_EQ(s.models[0].attacks.size(), 1u);
  EXPECT_EQ(s.models[0].attacks[0].method, "pgd");
  EXPECT_EQ(s.models[0].attacks[0].norm, "l2");
  EXPECT_DOUBLE_EQ(s.models[0].attacks[0].epsilon, 0.2);
  EXPECT_DOUBLE_EQ(s.models[0].attacks[0].mAP, 0.1);
}

TEST(Formats, Parse) {
  EXPECT_EQ(parse_formats("csv,md,svg"), (std::vector<Format>{Format::kCsv, Format::kMarkdown, Format::kSvg}));
  EXPECT_EQ(parse_formats("all").size(), 5u);
  EXPECT_THROW(parse_formats("csv,pdf"), ConfigError);
}

TEST(Training, RejectsClassCountMismatch) {
  data::SyntheticConfig cfg;
  cfg.n_clips = 2;
  const auto m = data::generate_synthetic(cfg, 1);
  const dsp::LogMelFrontend fe;
  std::vector<dsp::LogMelSpectrogram> f;
  for (const auto& r : m.clips) f.push_back(featurize(*r.waveform, fe));
  TrainOptions opt;
  opt.config.n_classes = 5;
  EXPECT_THROW(train_model(m, f, opt), ArgumentError);
  opt.config.n_classes = 10;
  f.pop_back();
  EXPECT_THROW(train_model(m, f, opt), ArgumentError);
}

TEST(Training, StoresSettingsInMetadata) {
  data::SyntheticConfig cfg;
  cfg.n_clips = 4;
  const auto m = data::generate_synthetic(cfg, 1);
  const dsp::LogMelFrontend fe;
  std::vector<dsp::LogMelSpectrogram> f;
  for (const auto& r : m.clips) f.push_back(featurize(*r.waveform, fe));
  TrainOptions opt;
  opt.family = zoo::ModelFamily::kResNetMini;
  opt.train.epochs = 1;
  opt.train.seed = 3;
  const auto model = train_model(m, f, opt);
  EXPECT_EQ(zoo::model_family(model), zoo::ModelFamily::kResNetMini);
  EXPECT_EQ(model.metadata()["train"]["epochs"], 1);
  EXPECT_EQ(model.metadata()["train"]["seed"], 3);
  const auto again = train_model(m, f, opt);
  EXPECT_EQ(nn::to_bytes(model), nn::to_bytes(again));
}

}  // namespace
