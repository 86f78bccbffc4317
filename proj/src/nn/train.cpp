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

#include "aerobust/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "aerobust/error.hpp"
#include "aerobust/parallel.hpp"
#include "aerobust/random.hpp"

namespace aerobust::nn {
namespace {

// Fisher-Yates driven by the counter-based generator, so the permutation is
// the same on every platform.
void shuffle(std::vector<std::size_t>& v, std::uint64_t seed, std::uint64_t round) {
  const std::uint64_t stream = rnd::combine(seed, round);
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rnd::uniform(stream, i) * static_cast<double>(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

// Seeded permutation of [0, n).
std::vector<std::size_t> random_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  shuffle(idx, seed, 0);
  return idx;
}

// loss(z_up) - loss(z_down) for mean BCE, summed per class without
// subtracting two rounded loss totals. Each softplus difference is
// log1p(sigmoid(b) * expm1(a - b)).
double loss_difference(const Tensor& za, const Tensor& zb, std::span<const double> y) {
  double d = 0.0;
  for (std::size_t c = 0; c < za.size(); ++c) {
    const double delta = za[c] - zb[c];
    d += std::log1p(sigmoid(zb[c]) * std::expm1(delta)) - y[c] * delta;
  }
  return d / static_cast<double>(za.size());
}

constexpr double kNoiseSafety = 8.0;
constexpr double kOracleResolution = 1e-5;

// Rounding noise of loss_difference(...) / (2h) around logits z.
double difference_noise(const Tensor& z, std::span<const double> y, double h) {
  double s = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) s += std::abs(sigmoid(z[c]) - y[c]) * std::max(std::abs(z[c]), 1.0);
  return kNoiseSafety * std::numeric_limits<double>::epsilon() * s / (static_cast<double>(z.size()) * 2.0 * h);
}

bool resolvable(double numeric, double noise) { return noise <= kOracleResolution * std::abs(numeric); }

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-12, std::abs(analytic) + std::abs(numeric));
}

}  // namespace

std::vector<double> train(Model& m, std::span<const Example> data, const TrainConfig& cfg,
                          const EpochCallback& on_epoch) {
  if (data.empty()) throw ArgumentError("train: empty dataset");
  if (!(cfg.lr >= 0.0)) throw ArgumentError("train: lr must be >= 0");
  if (cfg.batch_size == 0) throw ArgumentError("train: batch_size must be positive");
  for (const auto& ex : data) check_labels(ex.y, m.n_classes());

  const auto& params = m.parameters();
  std::vector<Tensor> m1, m2;
  for (const auto& p : params) {
    m1.emplace_back(p.param->value.shape());
    m2.emplace_back(p.param->value.shape());
  }

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> sample_loss(data.size());
  std::vector<double> history;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, cfg.seed, epoch);
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const std::size_t n = end - begin;
      std::vector<Gradients> per_sample(n);
      parallel_for(n, cfg.jobs, [&](std::size_t i) {
        const Example& ex = data[order[begin + i]];
        per_sample[i] = m.make_gradients();
        sample_loss[order[begin + i]] = m.loss_and_gradients(ex.x, ex.y, per_sample[i]);
      });
      // Reduce in batch order; scheduling never changes the sum.
      Gradients total = std::move(per_sample[0]);
      for (std::size_t i = 1; i < n; ++i) total += per_sample[i];

      ++step;
      const double inv_n = 1.0 / static_cast<double>(n);
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter& p = *params[k].param;
        if (!p.trainable) continue;
        for (std::size_t i = 0; i < p.value.size(); ++i) {
          const double g = total[k][i] * inv_n;
          m1[k][i] = cfg.beta1 * m1[k][i] + (1.0 - cfg.beta1) * g;
          m2[k][i] = cfg.beta2 * m2[k][i] + (1.0 - cfg.beta2) * g * g;
          p.value[i] -= cfg.lr * (m1[k][i] / c1) / (std::sqrt(m2[k][i] / c2) + cfg.eps);
        }
      }
    }
    double sum = 0.0;
    for (double l : sample_loss) sum += l;
    history.push_back(sum / static_cast<double>(data.size()));
    if (on_epoch) on_epoch(epoch, history.back());
  }
  return history;
}

GradCheckResult grad_check(const Model& m, const Tensor& x, std::span<const double> y, double h,
                           std::size_t samples, std::uint64_t seed) {
  if (!(h > 0.0)) throw ArgumentError("grad_check: h must be positive");
  const LossAndGrad lg = m.loss_and_input_gradient(x, y);
  const std::uint64_t sig = m.branch_signature(x);
  const double noise = difference_noise(m.logits(x), y, h);
  GradCheckResult out;
  Tensor probe = x;
  for (std::size_t i : random_order(x.size(), seed)) {
    if (out.checked == samples) break;
    probe[i] = x[i] + h;
    const Tensor up = m.logits(probe);
    const bool kink_up = m.branch_signature(probe) != sig;
    probe[i] = x[i] - h;
    const Tensor down = m.logits(probe);
    const bool kink_down = m.branch_signature(probe) != sig;
    probe[i] = x[i];
    if (kink_up || kink_down) {
      ++out.skipped_kinks;
      continue;
    }
    const double numeric = loss_difference(up, down, y) / (2.0 * h);
    if (!resolvable(numeric, noise)) {
      ++out.skipped_unresolved;
      continue;
    }
    out.max_rel_error = std::max(out.max_rel_error, relative_error(lg.grad[i], numeric));
    ++out.checked;
  }
  return out;
}

GradCheckResult grad_check_parameters(Model& m, const Tensor& x, std::span<const double> y, double h,
                                      std::size_t samples, std::uint64_t seed) {
  if (!(h > 0.0)) throw ArgumentError("grad_check: h must be positive");
  Gradients grads = m.make_gradients();
  m.loss_and_gradients(x, y, grads);
  const std::uint64_t sig = m.branch_signature(x);
  const double noise = difference_noise(m.logits(x), y, h);

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  const auto& params = m.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k].param->trainable) continue;
    for (std::size_t i = 0; i < params[k].param->value.size(); ++i) coords.emplace_back(k, i);
  }
  GradCheckResult out;
  for (std::size_t c : random_order(coords.size(), seed)) {
    if (out.checked == samples) break;
    const auto [k, i] = coords[c];
    double& v = params[k].param->value[i];
    const double orig = v;
    v = orig + h;
    const Tensor up = m.logits(x);
    const bool kink_up = m.branch_signature(x) != sig;
    v = orig - h;
    const Tensor down = m.logits(x);
    const bool kink_down = m.branch_signature(x) != sig;
    v = orig;
    if (kink_up || kink_down) {
      ++out.skipped_kinks;
      continue;
    }
    const double numeric = loss_difference(up, down, y) / (2.0 * h);
    if (!resolvable(numeric, noise)) {
      ++out.skipped_unresolved;
      continue;
    }
    out.max_rel_error = std::max(out.max_rel_error, relative_error(grads[k][i], numeric));
    ++out.checked;
  }
  return out;
}

}  // namespace aerobust::nn
