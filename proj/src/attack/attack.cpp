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

#include "aerobust/attack.hpp"

#include <algorithm>
#include <cmath>

#include "aerobust/error.hpp"
#include "aerobust/random.hpp"

namespace aerobust::attack {
namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

nn::Tensor checked_gradient(const nn::Model& m, const nn::Tensor& x, std::span<const double> y, std::size_t step) {
  nn::LossAndGrad lg = m.loss_and_input_gradient(x, y);
  for (std::size_t i = 0; i < lg.grad.size(); ++i) {
    if (!std::isfinite(lg.grad[i])) {
      throw NumericError("attack: non-finite input gradient at step " + std::to_string(step) + ", coordinate " +
                         std::to_string(i) + " (loss " + std::to_string(lg.loss) + ")");
    }
  }
  return std::move(lg.grad);
}

// Unit step direction for the chosen norm (zero when the gradient is zero).
nn::Tensor direction(const nn::Tensor& g, const AttackConfig& cfg) {
  nn::Tensor d = g;
  if (cfg.norm == Norm::kLinf && !cfg.literal_linf_step) {
    for (double& v : d.values()) v = sign(v);
    return d;
  }
  const double n = lp_norm(g.values(), cfg.norm);
  if (n == 0.0) return nn::Tensor(g.shape());
  for (double& v : d.values()) v /= n;
  return d;
}

nn::Tensor random_start(const nn::Tensor& x, const AttackConfig& cfg) {
  nn::Tensor d(x.shape());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = cfg.epsilon * (2.0 * rnd::uniform(cfg.seed, i) - 1.0);
  return project_lp(d, cfg.norm, cfg.epsilon);
}

}  // namespace

void AttackConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ArgumentError("attack: epsilon must be positive");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ArgumentError("attack: alpha must be positive");
  if (steps == 0) throw ArgumentError("attack: steps must be >= 1");
}

double lp_norm(std::span<const double> v, Norm p) {
  double n = 0.0;
  if (p == Norm::kLinf) {
    for (double x : v) n = std::max(n, std::abs(x));
    return n;
  }
  for (double x : v) n += x * x;
  return std::sqrt(n);
}

nn::Tensor project_lp(const nn::Tensor& delta, Norm p, double eps) {
  if (!(eps > 0.0)) throw ArgumentError("project_lp: eps must be positive");
  nn::Tensor out = delta;
  if (p == Norm::kLinf) {
    for (double& v : out.values()) v = std::clamp(v, -eps, eps);
    return out;
  }
  const double n = lp_norm(delta.values(), Norm::kL2);
  if (n > eps) {
    const double s = eps / n;
    for (double& v : out.values()) v *= s;
  }
  return out;
}

nn::Tensor fgsm(const nn::Model& m, const nn::Tensor& x, std::span<const double> y, double eps) {
  if (!(eps > 0.0)) throw ArgumentError("fgsm: eps must be positive");
  const nn::Tensor g = checked_gradient(m, x, y, 0);
  nn::Tensor delta(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) delta[i] = eps * sign(g[i]);
  nn::Tensor out = x;
  out += delta;
  return out;
}

nn::Tensor pgd(const nn::Model& m, const nn::Tensor& x, std::span<const double> y, const AttackConfig& cfg) {
  cfg.validate();
  nn::Tensor delta = cfg.random_start ? random_start(x, cfg) : nn::Tensor(x.shape());
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    nn::Tensor probe = x;
    probe += delta;
    const nn::Tensor dir = direction(checked_gradient(m, probe, y, step), cfg);
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] += cfg.alpha * dir[i];
    delta = project_lp(delta, cfg.norm, cfg.epsilon);
  }
  nn::Tensor out = x;
  out += delta;
  return out;
}

}  // namespace aerobust::attack
