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

#include "aerobust/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "aerobust/error.hpp"

namespace aerobust::metrics {
namespace {

void check_pair(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw ArgumentError("metrics: scores and labels differ in length");
  for (double l : labels) {
    if (l != 0.0 && l != 1.0) throw ArgumentError("metrics: labels must be 0 or 1");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw NumericError("metrics: NaN score");
  }
}

// Acklam's rational approximation of the normal quantile, |rel err| < 1.2e-9.
double acklam(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double lo = 0.02425;
  if (p < lo) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - lo) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

PredictionSet::PredictionSet(std::size_t samples, std::size_t classes)
    : n_samples(samples), n_classes(classes), scores(samples * classes), labels(samples * classes) {}

std::vector<double> PredictionSet::class_scores(std::size_t c) const {
  std::vector<double> v(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) v[i] = score(i, c);
  return v;
}

std::vector<double> PredictionSet::class_labels(std::size_t c) const {
  std::vector<double> v(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) v[i] = label(i, c);
  return v;
}

void PredictionSet::validate() const {
  if (scores.size() != n_samples * n_classes || labels.size() != n_samples * n_classes) {
    throw ArgumentError("prediction set: matrix sizes do not match " + std::to_string(n_samples) + "x" +
                        std::to_string(n_classes));
  }
}

std::optional<double> average_precision(std::span<const double> scores, std::span<const double> labels) {
  check_pair(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] == 1.0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

std::optional<double> auc(std::span<const double> scores, std::span<const double> labels) {
  check_pair(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of 1-based average ranks of the positives.
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1.0) {
        rank_sum += avg;
        ++pos;
      }
    }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  const double np = static_cast<double>(pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(neg));
}

double probit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("probit: p must lie in (0, 1), got " + std::to_string(p));
  double z = acklam(p);
  // Halley refinement on Phi(z) - p, Phi via erfc for accuracy in both tails.
  for (int it = 0; it < 2; ++it) {
    const double e = 0.5 * std::erfc(-z / std::numbers::sqrt2) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * z * z);
    z -= u / (1.0 + 0.5 * z * u);
  }
  return z;
}

double d_prime(double auc_value) {
  if (!(auc_value >= 0.0 && auc_value <= 1.0)) throw ArgumentError("d_prime: AUC outside [0, 1]");
  if (auc_value == 0.0) return -std::numeric_limits<double>::infinity();
  if (auc_value == 1.0) return std::numeric_limits<double>::infinity();
  // Antisymmetric by construction: d'(1 - a) = -d'(a) whenever 1 - a is exact.
  if (auc_value > 0.5) return -std::numbers::sqrt2 * probit(1.0 - auc_value);
  return std::numbers::sqrt2 * probit(auc_value);
}

SetMetrics evaluate_set(const PredictionSet& p) {
  p.validate();
  SetMetrics out;
  out.class_ap.resize(p.n_classes);
  out.class_auc.resize(p.n_classes);
  double ap_sum = 0.0, auc_sum = 0.0;
  std::size_t ap_n = 0, auc_n = 0;
  for (std::size_t c = 0; c < p.n_classes; ++c) {
    const auto s = p.class_scores(c);
    const auto l = p.class_labels(c);
    out.class_ap[c] = average_precision(s, l);
    out.class_auc[c] = auc(s, l);
    if (out.class_ap[c]) {
      ap_sum += *out.class_ap[c];
      ++ap_n;
    } else {
      ++out.skipped_ap;
    }
    if (out.class_auc[c]) {
      auc_sum += *out.class_auc[c];
      ++auc_n;
    } else {
      ++out.skipped_auc;
    }
  }
  if (ap_n == 0) throw ArgumentError("evaluate_set: no class has a positive label");
  out.triple.mAP = ap_sum / static_cast<double>(ap_n);
  if (auc_n > 0) {
    out.triple.auc = auc_sum / static_cast<double>(auc_n);
    out.triple.d_prime = d_prime(out.triple.auc);
  } else {
    out.triple.auc = std::numeric_limits<double>::quiet_NaN();
    out.triple.d_prime = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

ShiftReport distribution_shift(const PredictionSet& clean, const PredictionSet& perturbed, std::size_t top_k) {
  clean.validate();
  perturbed.validate();
  if (clean.n_samples != perturbed.n_samples || clean.n_classes != perturbed.n_classes) {
    throw ArgumentError("distribution_shift: prediction sets differ in shape");
  }
  if (clean.n_samples == 0) throw ArgumentError("distribution_shift: empty prediction set");
  ShiftReport r;
  r.delta.assign(clean.n_classes, 0.0);
  for (std::size_t c = 0; c < clean.n_classes; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < clean.n_samples; ++i) s += perturbed.score(i, c) - clean.score(i, c);
    r.delta[c] = s / static_cast<double>(clean.n_samples);
  }
  r.ranked.resize(clean.n_classes);
  std::iota(r.ranked.begin(), r.ranked.end(), 0);
  std::stable_sort(r.ranked.begin(), r.ranked.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(r.delta[a]) > std::abs(r.delta[b]); });
  r.ranked.resize(std::min(top_k, r.ranked.size()));
  return r;
}

}  // namespace aerobust::metrics
