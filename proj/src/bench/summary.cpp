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
#include <cstdio>
#include <limits>

#include "aerobust/bench.hpp"
#include "aerobust/error.hpp"

namespace aerobust::bench {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

const char* censor_name(DHalf::Censor c) {
  switch (c) {
    case DHalf::Censor::kBelow:
      return "below";
    case DHalf::Censor::kAbove:
      return "above";
    default:
      return "none";
  }
}

}  // namespace

std::string DHalf::text() const {
  if (std::isnan(value)) return "n/a";
  switch (censor) {
    case Censor::kBelow:
      return "< " + fmt(value);
    case Censor::kAbove:
      return "> " + fmt(value);
    default:
      return fmt(value);
  }
}

Json RobustnessSummary::to_json() const {
  Json j = Json::array();
  for (const auto& m : models) {
    Json attacks = Json::array();
    for (const auto& a : m.attacks) {
      attacks.push_back({{"condition", a.condition},
                         {"method", a.method},
                         {"norm", a.norm},
                         {"epsilon", a.epsilon},
                         {"mAP", a.mAP}});
    }
    Json d_half = {{"censor", censor_name(m.d_half.censor)}, {"text", m.d_half.text()}};
    d_half["value"] = std::isnan(m.d_half.value) ? Json(nullptr) : Json(m.d_half.value);
    j.push_back({{"model", m.model}, {"clean_mAP", m.clean_map}, {"d_half", d_half}, {"attacks", attacks}});
  }
  return {{"models", j}};
}

RobustnessSummary robustness_summary(const EvalReport& report, const std::vector<double>& d_grid) {
  RobustnessSummary out;
  if (std::none_of(report.conditions.begin(), report.conditions.end(),
                   [](const ConditionSpec& c) { return std::holds_alternative<cond::Intermittent>(c.kind); })) {
    throw ArgumentError("robustness_summary: the report has no intermittent conditions");
  }
  for (std::size_t mi = 0; mi < report.models.size(); ++mi) {
    ModelSummary s;
    s.model = report.models[mi].name;
    s.d_half.value = std::numeric_limits<double>::quiet_NaN();

    std::optional<double> clean;
    std::vector<std::pair<double, double>> points;  // (d, mAP)
    for (std::size_t ci = 0; ci < report.conditions.size(); ++ci) {
      const auto& c = report.conditions[ci];
      const auto& cell = report.cell(mi, ci);
      if (!cell.ok) continue;
      if (std::holds_alternative<cond::Clean>(c.kind) && !clean) clean = cell.triple.mAP;
      if (const auto* k = std::get_if<cond::Intermittent>(&c.kind)) {
        const bool in_grid = d_grid.empty() || std::any_of(d_grid.begin(), d_grid.end(), [&](double d) {
                               return std::abs(d - k->interval_s) <= 1e-9 * d;
                             });
        if (in_grid) points.emplace_back(k->interval_s, cell.triple.mAP);
      }
      if (const auto* k = std::get_if<cond::Fgsm>(&c.kind)) {
        s.attacks.push_back({c.name, "fgsm", "linf", k->epsilon, cell.triple.mAP});
      }
      if (const auto* k = std::get_if<cond::Pgd>(&c.kind)) {
        s.attacks.push_back({c.name, "pgd", k->config.norm == attack::Norm::kL2 ? "l2" : "linf", k->config.epsilon,
                             cell.triple.mAP});
      }
    }
    if (clean) s.clean_map = *clean;

    std::sort(points.begin(), points.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    points.erase(std::unique(points.begin(), points.end(),
                             [](const auto& a, const auto& b) { return a.first == b.first; }),
                 points.end());
    if (clean && !points.empty()) {
      const double target = *clean / 2.0;
      if (points.front().second < target) {
        s.d_half = {DHalf::Censor::kAbove, points.front().first};
      } else {
        s.d_half = {DHalf::Censor::kBelow, points.back().first};
        for (std::size_t i = 0; i + 1 < points.size(); ++i) {
          const auto [d0, m0] = points[i];
          const auto [d1, m1] = points[i + 1];
          if (m0 >= target && m1 < target) {
            const double t = (m0 - target) / (m0 - m1);
            s.d_half = {DHalf::Censor::kNone, std::exp2(std::log2(d0) + t * (std::log2(d1) - std::log2(d0)))};
            break;
          }
        }
      }
    }
    out.models.push_back(std::move(s));
  }
  return out;
}

}  // namespace aerobust::bench
