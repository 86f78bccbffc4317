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

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "aerobust/bench.hpp"
#include "aerobust/error.hpp"
#include "aerobust/perturb.hpp"
#include "aerobust/random.hpp"

namespace aerobust::bench {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

// Scalars in [condition] blocks: numbers and booleans, anything else a string.
Json scalar(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  if (!v.empty() && v.front() != '"') {
    std::int64_t i = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), i);
    if (ec == std::errc() && p == v.data() + v.size()) return i >= 0 ? Json(static_cast<std::uint64_t>(i)) : Json(i);
    double d = 0.0;
    auto [q, ec2] = std::from_chars(v.data(), v.data() + v.size(), d);
    if (ec2 == std::errc() && q == v.data() + v.size()) return d;
  }
  return unquote(v);
}

double to_double(const std::string& v, std::size_t line, const std::string& key) {
  double d = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("line " + std::to_string(line) + ": '" + key + "' expects a number, got '" + v + "'");
  }
  return d;
}

std::uint64_t to_uint(const std::string& v, std::size_t line, const std::string& key) {
  std::uint64_t u = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), u);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("line " + std::to_string(line) + ": '" + key + "' expects a non-negative integer, got '" + v +
                      "'");
  }
  return u;
}

bool to_bool(const std::string& v, std::size_t line, const std::string& key) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("line " + std::to_string(line) + ": '" + key + "' expects true or false");
}

std::filesystem::path resolve(const std::string& v, const std::filesystem::path& base) {
  std::filesystem::path p(unquote(v));
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

}  // namespace

void ExperimentConfig::validate() {
  if (data_dir.empty()) throw ConfigError("config: 'data' is required");
  if (models.empty()) throw ConfigError("config: at least one 'model' is required");
  if (jobs == 0) throw ConfigError("config: jobs must be >= 1");
  for (double d : d_grid) {
    if (!(d > 0.0)) throw ConfigError("config: d_grid values must be positive");
  }
  bool has_clean = false;
  std::set<std::string> names;
  for (const auto& c : conditions) {
    c.validate();
    if (!names.insert(c.name).second) throw ConfigError("config: duplicate condition name '" + c.name + "'");
    has_clean = has_clean || std::holds_alternative<cond::Clean>(c.kind);
  }
  if (!has_clean) {
    if (names.count("Clean")) throw ConfigError("config: 'Clean' names a perturbed condition");
    conditions.insert(conditions.begin(), ConditionSpec{"Clean", cond::Clean{}});
  }
}

Json ExperimentConfig::to_json() const {
  Json j;
  j["data"] = data_dir.generic_string();
  j["split"] = data::split_name(split);
  j["models"] = Json::array();
  for (const auto& m : models) j["models"].push_back(m.generic_string());
  j["conditions"] = Json::array();
  for (const auto& c : conditions) j["conditions"].push_back(c.to_json());
  j["seed"] = seed;
  j["d_grid"] = d_grid;
  j["top_k"] = top_k;
  return j;
}

// jobs and output locations do not change results and are left out.
std::string ExperimentConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rnd::hash_string(to_json().dump())));
  return buf;
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  std::optional<bool> use_defaults;
  double noise = 0.1;
  bool noise_is_variance = false;
  double epsilon = 0.1, alpha = 0.01;
  std::size_t steps = 20;
  std::vector<Json> blocks;
  std::vector<std::size_t> block_lines;

  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash_pos = raw.find('#');
    const std::string s = trim(hash_pos == std::string::npos ? raw : raw.substr(0, hash_pos));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s != "[condition]") throw ConfigError("line " + std::to_string(line) + ": unknown section " + s);
      blocks.push_back(Json::object());
      block_lines.push_back(line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line) + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError("line " + std::to_string(line) + ": expected key = value");
    if (!blocks.empty()) {
      if (blocks.back().contains(key)) throw ConfigError("line " + std::to_string(line) + ": duplicate key " + key);
      blocks.back()[key] = scalar(value);
      continue;
    }
    if (key == "data") {
      cfg.data_dir = resolve(value, base_dir);
    } else if (key == "split") {
      try {
        cfg.split = data::parse_split(unquote(value));
      } catch (const std::exception& e) {
        throw ConfigError("line " + std::to_string(line) + ": " + e.what());
      }
    } else if (key == "model") {
      cfg.models.push_back(resolve(value, base_dir));
    } else if (key == "seed") {
      cfg.seed = to_uint(value, line, key);
    } else if (key == "jobs") {
      cfg.jobs = to_uint(value, line, key);
    } else if (key == "out") {
      cfg.out_dir = resolve(value, base_dir);
    } else if (key == "cache") {
      cfg.cache_dir = resolve(value, base_dir);
    } else if (key == "default_conditions") {
      use_defaults = to_bool(value, line, key);
    } else if (key == "noise_sigma") {
      noise = to_double(value, line, key);
    } else if (key == "noise_is_variance") {
      noise_is_variance = to_bool(value, line, key);
    } else if (key == "epsilon") {
      epsilon = to_double(value, line, key);
    } else if (key == "alpha") {
      alpha = to_double(value, line, key);
    } else if (key == "steps") {
      steps = to_uint(value, line, key);
    } else if (key == "top_k") {
      cfg.top_k = to_uint(value, line, key);
    } else if (key == "d_grid") {
      std::istringstream list(unquote(value));
      std::string item;
      while (std::getline(list, item, ',')) cfg.d_grid.push_back(to_double(trim(item), line, key));
    } else {
      throw ConfigError("line " + std::to_string(line) + ": unknown key '" + key + "'");
    }
  }

  if (use_defaults.value_or(blocks.empty())) {
    double sigma = 0.0;
    try {
      sigma = perturb::noise_sigma(noise, noise_is_variance);
      cfg.conditions = default_conditions(sigma, epsilon, alpha, steps);
    } catch (const ArgumentError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    try {
      cfg.conditions.push_back(ConditionSpec::from_json(blocks[b]));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(block_lines[b]) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return parse_experiment_config(ss.str(), path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace aerobust::bench
