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
#include <optional>
#include <span>
#include <vector>

namespace aerobust::metrics {

// Row-major n_samples x n_classes scores and {0,1} labels.
struct PredictionSet {
  std::size_t n_samples = 0;
  std::size_t n_classes = 0;
  std::vector<double> scores;
  std::vector<double> labels;

  PredictionSet() = default;
  PredictionSet(std::size_t samples, std::size_t classes);

  double& score(std::size_t i, std::size_t c) { return scores[i * n_classes + c]; }
  double score(std::size_t i, std::size_t c) const { return scores[i * n_classes + c]; }
  double& label(std::size_t i, std::size_t c) { return labels[i * n_classes + c]; }
  double label(std::size_t i, std::size_t c) const { return labels[i * n_classes + c]; }

  std::vector<double> class_scores(std::size_t c) const;
  std::vector<double> class_labels(std::size_t c) const;
  void validate() const;
};

struct MetricTriple {
  double mAP = 0.0;
  double auc = 0.0;
  double d_prime = 0.0;
};

struct SetMetrics {
  MetricTriple triple;
  std::vector<std::optional<double>> class_ap;   // empty where the class has no positive
  std::vector<std::optional<double>> class_auc;  // empty unless both labels present
  std::size_t skipped_ap = 0;
  std::size_t skipped_auc = 0;
};

// Step-wise AP over the descending ranking (ties keep input order).
// Empty when there is no positive label.
std::optional<double> average_precision(std::span<const double> scores, std::span<const double> labels);

// Mann-Whitney AUC, ties count one half. Empty unless both classes occur.
std::optional<double> auc(std::span<const double> scores, std::span<const double> labels);

// Inverse standard normal CDF; ArgumentError outside (0, 1).
double probit(double p);

// sqrt(2) probit(auc); +-infinity at auc 1 and 0.
double d_prime(double auc_value);

// Throws ArgumentError when no class has a positive label.
SetMetrics evaluate_set(const PredictionSet& p);

struct ShiftReport {
  std::vector<double> delta;        // mean(perturbed - clean) per class
  std::vector<std::size_t> ranked;  // classes by |delta| descending, at most top_k
};

ShiftReport distribution_shift(const PredictionSet& clean, const PredictionSet& perturbed, std::size_t top_k = 5);

}  // namespace aerobust::metrics
