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
#include <set>

#include "aerobust/bench.hpp"
#include "aerobust/error.hpp"
#include "aerobust/perturb.hpp"
#include "aerobust/random.hpp"

namespace aerobust::bench {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

const char* norm_name(attack::Norm n) { return n == attack::Norm::kL2 ? "l2" : "linf"; }

attack::Norm parse_norm(const std::string& s) {
  if (s == "l2") return attack::Norm::kL2;
  if (s == "linf") return attack::Norm::kLinf;
  throw ConfigError("unknown norm '" + s + "' (expected linf or l2)");
}

const std::vector<std::string>& allowed_keys(const std::string& kind) {
  static const std::map<std::string, std::vector<std::string>> keys = {
      {"clean", {}},
      {"consecutive", {"start", "duration"}},
      {"intermittent", {"interval"}},
      {"concat", {"interval"}},
      {"strong", {}},
      {"gaussian1d", {"sigma", "seed"}},
      {"gaussian2d", {"sigma", "seed"}},
      {"fgsm", {"epsilon"}},
      {"pgd", {"norm", "epsilon", "alpha", "steps", "literal_linf_step", "random_start", "seed"}},
  };
  const auto it = keys.find(kind);
  if (it == keys.end()) throw ConfigError("unknown condition kind '" + kind + "'");
  return it->second;
}

template <class T>
T get(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("condition key '") + key + "': " + e.what());
  }
}

double require_number(const Json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("condition is missing '") + key + "'");
  return get<double>(j, key, 0.0);
}

// Sort key for report order.
int group(const ConditionKind& k) {
  return std::visit(Overloaded{[](const cond::Clean&) { return 0; }, [](const cond::Consecutive&) { return 1; },
                               [](const cond::Intermittent&) { return 2; }, [](const cond::Concat&) { return 3; },
                               [](const cond::StrongLabel&) { return 4; }, [](const cond::Gaussian2D&) { return 5; },
                               [](const cond::Gaussian1D&) { return 5; }, [](const cond::Fgsm&) { return 6; },
                               [](const cond::Pgd&) { return 6; }},
                    k);
}

double order_value(const ConditionKind& k) {
  if (const auto* i = std::get_if<cond::Intermittent>(&k)) return -i->interval_s;
  if (const auto* c = std::get_if<cond::Concat>(&k)) return c->interval_s;
  return 0.0;
}

std::string format_seconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", s);
  return buf;
}

}  // namespace

void ConditionSpec::validate() const {
  if (name.empty()) throw ConfigError("condition name must not be empty");
  const std::string where = "condition '" + name + "': ";
  std::visit(Overloaded{
                 [](const cond::Clean&) {},
                 [&](const cond::Consecutive& c) {
                   if (!(c.start_s >= 0.0 && c.duration_s > 0.0)) throw ConfigError(where + "need start >= 0, duration > 0");
                 },
                 [&](const cond::Intermittent& c) {
                   if (!(c.interval_s > 0.0)) throw ConfigError(where + "interval must be positive");
                 },
                 [&](const cond::Concat& c) {
                   if (!(c.interval_s > 0.0)) throw ConfigError(where + "interval must be positive");
                 },
                 [](const cond::StrongLabel&) {},
                 [&](const cond::Gaussian1D& c) {
                   if (!(c.sigma >= 0.0)) throw ConfigError(where + "sigma must be >= 0");
                 },
                 [&](const cond::Gaussian2D& c) {
                   if (!(c.sigma >= 0.0)) throw ConfigError(where + "sigma must be >= 0");
                 },
                 [&](const cond::Fgsm& c) {
                   if (!(c.epsilon > 0.0)) throw ConfigError(where + "epsilon must be positive");
                 },
                 [&](const cond::Pgd& c) {
                   try {
                     c.config.validate();
                   } catch (const ArgumentError& e) {
                     throw ConfigError(where + e.what());
                   }
                 }},
             kind);
}

bool ConditionSpec::is_attack() const {
  return std::holds_alternative<cond::Fgsm>(kind) || std::holds_alternative<cond::Pgd>(kind);
}

Json ConditionSpec::to_json() const {
  Json j = {{"name", name}};
  std::visit(Overloaded{[&](const cond::Clean&) { j["kind"] = "clean"; },
                        [&](const cond::Consecutive& c) {
                          j["kind"] = "consecutive";
                          j["start"] = c.start_s;
                          j["duration"] = c.duration_s;
                        },
                        [&](const cond::Intermittent& c) {
                          j["kind"] = "intermittent";
                          j["interval"] = c.interval_s;
                        },
                        [&](const cond::Concat& c) {
                          j["kind"] = "concat";
                          j["interval"] = c.interval_s;
                        },
                        [&](const cond::StrongLabel&) { j["kind"] = "strong"; },
                        [&](const cond::Gaussian1D& c) {
                          j["kind"] = "gaussian1d";
                          j["sigma"] = c.sigma;
                          j["seed"] = c.seed;
                        },
                        [&](const cond::Gaussian2D& c) {
                          j["kind"] = "gaussian2d";
                          j["sigma"] = c.sigma;
                          j["seed"] = c.seed;
                        },
                        [&](const cond::Fgsm& c) {
                          j["kind"] = "fgsm";
                          j["epsilon"] = c.epsilon;
                        },
                        [&](const cond::Pgd& c) {
                          j["kind"] = "pgd";
                          j["norm"] = norm_name(c.config.norm);
                          j["epsilon"] = c.config.epsilon;
                          j["alpha"] = c.config.alpha;
                          j["steps"] = c.config.steps;
                          j["literal_linf_step"] = c.config.literal_linf_step;
                          j["random_start"] = c.config.random_start;
                          j["seed"] = c.config.seed;
                        }},
             kind);
  return j;
}

ConditionSpec ConditionSpec::from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("condition must be an object");
  ConditionSpec c;
  c.name = get<std::string>(j, "name", "");
  if (!j.contains("kind")) throw ConfigError("condition '" + c.name + "' is missing 'kind'");
  const auto kind = get<std::string>(j, "kind", "");
  const auto& allowed = allowed_keys(kind);
  for (const auto& [key, value] : j.items()) {
    if (key == "name" || key == "kind") continue;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("condition '" + c.name + "': unknown key '" + key + "' for kind " + kind);
    }
  }
  if (kind == "clean") {
    c.kind = cond::Clean{};
  } else if (kind == "consecutive") {
    c.kind = cond::Consecutive{require_number(j, "start"), require_number(j, "duration")};
  } else if (kind == "intermittent") {
    c.kind = cond::Intermittent{require_number(j, "interval")};
  } else if (kind == "concat") {
    c.kind = cond::Concat{require_number(j, "interval")};
  } else if (kind == "strong") {
    c.kind = cond::StrongLabel{};
  } else if (kind == "gaussian1d") {
    c.kind = cond::Gaussian1D{get<double>(j, "sigma", 0.1), get<std::uint64_t>(j, "seed", 0)};
  } else if (kind == "gaussian2d") {
    c.kind = cond::Gaussian2D{get<double>(j, "sigma", 0.1), get<std::uint64_t>(j, "seed", 0)};
  } else if (kind == "fgsm") {
    c.kind = cond::Fgsm{get<double>(j, "epsilon", 0.1)};
  } else {
    attack::AttackConfig a;
    a.norm = parse_norm(get<std::string>(j, "norm", "linf"));
    a.epsilon = get<double>(j, "epsilon", a.epsilon);
    a.alpha = get<double>(j, "alpha", a.alpha);
    a.steps = get<std::size_t>(j, "steps", a.steps);
    a.literal_linf_step = get<bool>(j, "literal_linf_step", false);
    a.random_start = get<bool>(j, "random_start", false);
    a.seed = get<std::uint64_t>(j, "seed", 0);
    c.kind = cond::Pgd{a};
  }
  c.validate();
  return c;
}

std::vector<ConditionSpec> default_conditions(double noise_sigma, double epsilon, double alpha, std::size_t steps) {
  std::vector<ConditionSpec> out;
  out.push_back({"Clean", cond::Clean{}});
  out.push_back({"4s Occlusion", cond::Intermittent{2.0}});
  out.push_back({"First 5s Occlusion", cond::Consecutive{0.0, 5.0}});
  out.push_back({"Mid 5s Occlusion", cond::Consecutive{2.5, 5.0}});
  out.push_back({"Last 5s Occlusion", cond::Consecutive{5.0, 5.0}});
  for (double d : {1.0, 0.5, 0.25, 0.125}) {
    out.push_back({"Every " + format_seconds(d) + "s Occlusion", cond::Intermittent{d}});
  }
  for (double d : {0.125, 0.25, 0.5, 1.0}) out.push_back({format_seconds(d) + "s Concat", cond::Concat{d}});
  out.push_back({"White Noise 2D", cond::Gaussian2D{noise_sigma, 0}});
  out.push_back({"White Noise 1D", cond::Gaussian1D{noise_sigma, 0}});
  out.push_back({"Masking Strong", cond::StrongLabel{}});
  out.push_back({"FGSM", cond::Fgsm{epsilon}});
  for (auto norm : {attack::Norm::kLinf, attack::Norm::kL2}) {
    attack::AttackConfig a;
    a.norm = norm;
    a.epsilon = epsilon;
    a.alpha = alpha;
    a.steps = steps;
    out.push_back({norm == attack::Norm::kLinf ? "l-inf attack" : "l2 attack", cond::Pgd{a}});
  }
  for (const auto& c : out) c.validate();
  return out;
}

std::vector<ConditionSpec> report_order(std::vector<ConditionSpec> conditions) {
  std::stable_sort(conditions.begin(), conditions.end(), [](const ConditionSpec& a, const ConditionSpec& b) {
    const int ga = group(a.kind), gb = group(b.kind);
    if (ga != gb) return ga < gb;
    return order_value(a.kind) < order_value(b.kind);
  });
  return conditions;
}

std::uint64_t cell_seed(std::uint64_t experiment_seed, const std::string& clip_id, const std::string& condition) {
  return rnd::combine(rnd::combine(experiment_seed, rnd::hash_string(clip_id)), rnd::hash_string(condition));
}

nn::Tensor apply_condition(const ConditionSpec& c, const ClipContext& clip, const nn::Model& m,
                           std::span<const double> y) {
  const auto& x = *clip.features;
  return std::visit(
      Overloaded{
          [&](const cond::Clean&) { return to_tensor(x); },
          [&](const cond::Consecutive& k) { return to_tensor(perturb::consecutive_mask(x, k.start_s, k.duration_s)); },
          [&](const cond::Intermittent& k) { return to_tensor(perturb::intermittent_mask(x, k.interval_s)); },
          [&](const cond::Concat& k) { return to_tensor(perturb::concat_unmasked(x, k.interval_s)); },
          [&](const cond::StrongLabel&) {
            if (!clip.record->strong_labels) {
              throw ArgumentError("clip " + clip.record->clip_id + " has no strong labels");
            }
            return to_tensor(perturb::strong_label_mask(x, clip.record->strong_intervals()));
          },
          [&](const cond::Gaussian1D& k) {
            const perturb::NoiseSpec ns{k.sigma, perturb::NoiseDomain::kWaveform1D, rnd::combine(clip.seed, k.seed)};
            return to_tensor(featurize(perturb::gaussian_waveform(*clip.waveform, ns), *clip.frontend));
          },
          [&](const cond::Gaussian2D& k) {
            const perturb::NoiseSpec ns{k.sigma, perturb::NoiseDomain::kSpectrogram2D, rnd::combine(clip.seed, k.seed)};
            return to_tensor(perturb::gaussian_spectrogram(x, ns));
          },
          [&](const cond::Fgsm& k) { return attack::fgsm(m, to_tensor(x), y, k.epsilon); },
          [&](const cond::Pgd& k) {
            attack::AttackConfig a = k.config;
            a.seed = rnd::combine(clip.seed, a.seed);
            return attack::pgd(m, to_tensor(x), y, a);
          }},
      c.kind);
}

}  // namespace aerobust::bench
