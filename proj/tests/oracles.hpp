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

#include <algorithm>
#include <numeric>
#include <vector>

namespace aerobust::testutil {

// Explicit precision/recall walk down the stable descending ranking.
inline double ap_oracle(const std::vector<double>& s, const std::vector<double>& l) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return s[a] > s[b]; });
  const double positives = std::accumulate(l.begin(), l.end(), 0.0);
  double tp = 0.0, prev_recall = 0.0, ap = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    tp += l[order[k]];
    const double precision = tp / static_cast<double>(k + 1);
    const double recall = tp / positives;
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

// Every (positive, negative) pair, ties worth one half.
inline double auc_oracle(const std::vector<double>& s, const std::vector<double>& l) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (l[i] != 1.0 || l[j] != 0.0) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

}  // namespace aerobust::testutil
