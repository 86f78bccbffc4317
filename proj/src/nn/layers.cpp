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

#include "aerobust/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "aerobust/error.hpp"
#include "aerobust/random.hpp"

namespace aerobust::nn {
namespace {

void require(bool ok, const std::string& layer, const std::string& what, const Shape& in) {
  if (!ok) throw ArgumentError(layer + ": " + what + ", got input " + shape_string(in));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Output positions o in [lo, hi) for which o*stride + k - pad lands in [0, n).
void valid_range(std::size_t n, std::size_t out_n, std::size_t k, std::size_t stride, std::size_t pad,
                 std::size_t& lo, std::size_t& hi) {
  lo = k < pad ? (pad - k + stride - 1) / stride : 0;
  const long long last = static_cast<long long>(n) - 1 + static_cast<long long>(pad) - static_cast<long long>(k);
  hi = last < 0 ? 0 : std::min(out_n, static_cast<std::size_t>(last) / stride + 1);
  if (hi < lo) hi = lo;
}

Tensor shape_tensor(const Shape& s) {
  std::vector<double> v(s.begin(), s.end());
  return Tensor({s.size()}, std::move(v));
}

Shape tensor_shape(const Tensor& t) {
  Shape s;
  for (double v : t.values()) s.push_back(static_cast<std::size_t>(v));
  return s;
}

void add_colsum(const Tensor& g, std::size_t rows, std::size_t cols, Tensor* out, std::size_t offset = 0) {
  if (!out) return;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) (*out)[offset + c] += g[r * cols + c];
  }
}

}  // namespace

void Tape::note_branch(std::uint64_t v) { hash_ = rnd::combine(hash_, v); }

std::vector<Tensor> Tape::pop() {
  if (frames_.empty()) throw ArgumentError("tape: backward called without a matching forward");
  auto f = std::move(frames_.back());
  frames_.pop_back();
  return f;
}

void Gradients::zero() {
  for (auto& g : grads_) g.fill(0.0);
}

Gradients& Gradients::operator+=(const Gradients& other) {
  for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i] += other.grads_[i];
  return *this;
}

std::vector<const Layer*> Layer::children() const {
  auto v = const_cast<Layer*>(this)->children();
  return {v.begin(), v.end()};
}

Parameter& Layer::add_param(std::string name, Shape shape, double init_bound, double fill, bool trainable) {
  params_.push_back(Parameter{std::move(name), Tensor(std::move(shape), fill), trainable, init_bound});
  return params_.back();
}

// ---------------------------------------------------------------- Conv2D

Conv2D::Conv2D(std::size_t in_ch, std::size_t out_ch, std::size_t kernel_h, std::size_t kernel_w,
               std::size_t stride_h, std::size_t stride_w, std::size_t pad_h, std::size_t pad_w)
    : in_ch_(in_ch), out_ch_(out_ch), kh_(kernel_h), kw_(kernel_w), sh_(stride_h), sw_(stride_w), ph_(pad_h),
      pw_(pad_w) {
  if (!in_ch || !out_ch || !kh_ || !kw_ || !sh_ || !sw_) throw ArgumentError("conv2d: zero-sized configuration");
  const double fan_in = static_cast<double>(in_ch * kh_ * kw_);
  add_param("weight", {out_ch, in_ch, kh_, kw_}, std::sqrt(6.0 / fan_in));
  add_param("bias", {out_ch}, 0.0);
}

Json Conv2D::config() const {
  return {{"in_ch", in_ch_}, {"out_ch", out_ch_}, {"kh", kh_}, {"kw", kw_},
          {"sh", sh_},       {"sw", sw_},         {"ph", ph_}, {"pw", pw_}};
}

Shape Conv2D::output_shape(const Shape& in) const {
  require(in.size() == 3 && in[0] == in_ch_, "conv2d", "expected (" + std::to_string(in_ch_) + ", H, W)", in);
  require(in[1] + 2 * ph_ >= kh_ && in[2] + 2 * pw_ >= kw_, "conv2d", "kernel larger than padded input", in);
  return {out_ch_, (in[1] + 2 * ph_ - kh_) / sh_ + 1, (in[2] + 2 * pw_ - kw_) / sw_ + 1};
}

Tensor Conv2D::forward(const Tensor& x, Tape* tape) const {
  const Shape os = output_shape(x.shape());
  const std::size_t H = x.dim(1), W = x.dim(2), OH = os[1], OW = os[2];
  Tensor y(os);
  const Tensor& w = p(0);
  const Tensor& b = p(1);
  for (std::size_t o = 0; o < out_ch_; ++o) {
    double* yo = y.data() + o * OH * OW;
    std::fill(yo, yo + OH * OW, b[o]);
    for (std::size_t c = 0; c < in_ch_; ++c) {
      const double* xc = x.data() + c * H * W;
      for (std::size_t ky = 0; ky < kh_; ++ky) {
        std::size_t oy0, oy1;
        valid_range(H, OH, ky, sh_, ph_, oy0, oy1);
        for (std::size_t kx = 0; kx < kw_; ++kx) {
          std::size_t ox0, ox1;
          valid_range(W, OW, kx, sw_, pw_, ox0, ox1);
          const double wv = w[((o * in_ch_ + c) * kh_ + ky) * kw_ + kx];
          for (std::size_t oy = oy0; oy < oy1; ++oy) {
            const double* xr = xc + (oy * sh_ + ky - ph_) * W;
            double* yr = yo + oy * OW;
            if (sw_ == 1) {
              const double* xs = xr + (ox0 + kx - pw_);
              double* ys = yr + ox0;
              for (std::size_t i = 0, n = ox1 - ox0; i < n; ++i) ys[i] += wv * xs[i];
            } else {
              for (std::size_t ox = ox0; ox < ox1; ++ox) yr[ox] += wv * xr[ox * sw_ + kx - pw_];
            }
          }
        }
      }
    }
  }
  if (tape) tape->push({x});
  return y;
}

Tensor Conv2D::backward(const Tensor& g, Tape& tape, Gradients* grads) const {
  const Tensor x = std::move(tape.pop()[0]);
  const std::size_t H = x.dim(1), W = x.dim(2), OH = g.dim(1), OW = g.dim(2);
  Tensor gx(x.shape());
  Tensor* gw = grad(grads, 0);
  Tensor* gb = grad(grads, 1);
  const Tensor& w = p(0);
  for (std::size_t o = 0; o < out_ch_; ++o) {
    const double* go = g.data() + o * OH * OW;
    if (gb) {
      double s = 0.0;
      for (std::size_t i = 0; i < OH * OW; ++i) s += go[i];
      (*gb)[o] += s;
    }
    for (std::size_t c = 0; c < in_ch_; ++c) {
      const double* xc = x.data() + c * H * W;
      double* gxc = gx.data() + c * H * W;
      for (std::size_t ky = 0; ky < kh_; ++ky) {
        std::size_t oy0, oy1;
        valid_range(H, OH, ky, sh_, ph_, oy0, oy1);
        for (std::size_t kx = 0; kx < kw_; ++kx) {
          std::size_t ox0, ox1;
          valid_range(W, OW, kx, sw_, pw_, ox0, ox1);
          const std::size_t widx = ((o * in_ch_ + c) * kh_ + ky) * kw_ + kx;
          const double wv = w[widx];
          double gw_acc = 0.0;
          for (std::size_t oy = oy0; oy < oy1; ++oy) {
            const std::size_t off = (oy * sh_ + ky - ph_) * W;
            const double* xr = xc + off;
            double* gxr = gxc + off;
            const double* gr = go + oy * OW;
            for (std::size_t ox = ox0; ox < ox1; ++ox) {
              const std::size_t ix = ox * sw_ + kx - pw_;
              gxr[ix] += wv * gr[ox];
              gw_acc += xr[ix] * gr[ox];
            }
          }
          if (gw) (*gw)[widx] += gw_acc;
        }
      }
    }
  }
  return gx;
}

// ---------------------------------------------------------------- pointwise

Tensor ReLU::forward(const Tensor& x, Tape* tape) const {
  Tensor y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  if (tape && tape->tracks_branches()) {
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      bits = (bits << 1) | (x[i] > 0.0 ? 1u : 0u);
      if (i % 64 == 63 || i + 1 == x.size()) tape->note_branch(bits);
    }
  }
  if (tape) tape->push({x});
  return y;
}

Tensor ReLU::backward(const Tensor& g, Tape& tape, Gradients*) const {
  const Tensor x = std::move(tape.pop()[0]);
  Tensor gx = g;
  // Subgradient at 0 is 0.
  for (std::size_t i = 0; i < gx.size(); ++i) {
    if (!(x[i] > 0.0)) gx[i] = 0.0;
  }
  return gx;
}

Tensor Sigmoid::forward(const Tensor& x, Tape* tape) const {
  Tensor y = x;
  for (double& v : y.values()) v = sigmoid(v);
  if (tape) tape->push({y});
  return y;
}

Tensor Sigmoid::backward(const Tensor& g, Tape& tape, Gradients*) const {
  const Tensor y = std::move(tape.pop()[0]);
  Tensor gx = g;
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= y[i] * (1.0 - y[i]);
  return gx;
}

// ---------------------------------------------------------------- MaxPool2D

MaxPool2D::MaxPool2D(std::size_t kh, std::size_t kw) : kh_(kh), kw_(kw) {
  if (!kh || !kw) throw ArgumentError("maxpool2d: zero window");
}

Shape MaxPool2D::output_shape(const Shape& in) const {
  require(in.size() == 3, "maxpool2d", "expected (C, H, W)", in);
  require(in[1] >= kh_ && in[2] >= kw_, "maxpool2d", "input smaller than the pooling window", in);
  return {in[0], in[1] / kh_, in[2] / kw_};
}

Tensor MaxPool2D::forward(const Tensor& x, Tape* tape) const {
  const Shape os = output_shape(x.shape());
  const std::size_t C = os[0], H = x.dim(1), W = x.dim(2), OH = os[1], OW = os[2];
  Tensor y(os);
  Tensor arg(os);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox) {
        std::size_t best = c * H * W + oy * kh_ * W + ox * kw_;
        for (std::size_t dy = 0; dy < kh_; ++dy) {
          for (std::size_t dx = 0; dx < kw_; ++dx) {
            const std::size_t idx = c * H * W + (oy * kh_ + dy) * W + ox * kw_ + dx;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t o = (c * OH + oy) * OW + ox;
        y[o] = x[best];
        arg[o] = static_cast<double>(best);
        if (tape && tape->tracks_branches()) tape->note_branch(best);
      }
    }
  }
  if (tape) tape->push({std::move(arg), shape_tensor(x.shape())});
  return y;
}

Tensor MaxPool2D::backward(const Tensor& g, Tape& tape, Gradients*) const {
  auto saved = tape.pop();
  Tensor gx(tensor_shape(saved[1]));
  for (std::size_t o = 0; o < g.size(); ++o) gx[static_cast<std::size_t>(saved[0][o])] += g[o];
  return gx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(std::size_t in, std::size_t out) : in_(in), out_(out) {
  if (!in || !out) throw ArgumentError("linear: zero-sized configuration");
  add_param("weight", {out, in}, std::sqrt(3.0 / static_cast<double>(in)));
  add_param("bias", {out}, 0.0);
}

Shape Linear::output_shape(const Shape& in) const {
  require(!in.empty() && in.back() == in_, "linear", "last axis must be " + std::to_string(in_), in);
  Shape out = in;
  out.back() = out_;
  return out;
}

Tensor Linear::forward(const Tensor& x, Tape* tape) const {
  Tensor y(output_shape(x.shape()));
  const std::size_t rows = x.size() / in_;
  matmul_nt(x.data(), p(0).data(), y.data(), rows, in_, out_);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < out_; ++j) y[r * out_ + j] += p(1)[j];
  }
  if (tape) tape->push({x});
  return y;
}

Tensor Linear::backward(const Tensor& g, Tape& tape, Gradients* grads) const {
  const Tensor x = std::move(tape.pop()[0]);
  const std::size_t rows = x.size() / in_;
  Tensor gx(x.shape());
  matmul_nn(g.data(), p(0).data(), gx.data(), rows, out_, in_);
  if (Tensor* gw = grad(grads, 0)) matmul_tn(g.data(), x.data(), gw->data(), out_, rows, in_, true);
  add_colsum(g, rows, out_, grad(grads, 1));
  return gx;
}

// ---------------------------------------------------------------- LayerNorm

LayerNorm::LayerNorm(std::size_t dim, double eps) : dim_(dim), eps_(eps) {
  if (!dim) throw ArgumentError("layernorm: zero dim");
  add_param("gamma", {dim}, 0.0, 1.0);
  add_param("beta", {dim}, 0.0, 0.0);
}

Shape LayerNorm::output_shape(const Shape& in) const {
  require(!in.empty() && in.back() == dim_, "layernorm", "last axis must be " + std::to_string(dim_), in);
  return in;
}

Tensor LayerNorm::forward(const Tensor& x, Tape* tape) const {
  output_shape(x.shape());
  const std::size_t rows = x.size() / dim_;
  Tensor y(x.shape());
  Tensor xhat(x.shape());
  Tensor rstd({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * dim_;
    double mean = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) mean += xr[i];
    mean /= static_cast<double>(dim_);
    double var = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<double>(dim_);
    const double rs = 1.0 / std::sqrt(var + eps_);
    rstd[r] = rs;
    for (std::size_t i = 0; i < dim_; ++i) {
      const double h = (xr[i] - mean) * rs;
      xhat[r * dim_ + i] = h;
      y[r * dim_ + i] = p(0)[i] * h + p(1)[i];
    }
  }
  if (tape) tape->push({std::move(xhat), std::move(rstd)});
  return y;
}

Tensor LayerNorm::backward(const Tensor& g, Tape& tape, Gradients* grads) const {
  auto saved = tape.pop();
  const Tensor& xhat = saved[0];
  const Tensor& rstd = saved[1];
  const std::size_t rows = xhat.size() / dim_;
  Tensor gx(xhat.shape());
  Tensor* gg = grad(grads, 0);
  Tensor* gbeta = grad(grads, 1);
  const double n = static_cast<double>(dim_);
  for (std::size_t r = 0; r < rows; ++r) {
    double sum_d = 0.0, sum_dh = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      const std::size_t k = r * dim_ + i;
      const double d = g[k] * p(0)[i];
      sum_d += d;
      sum_dh += d * xhat[k];
      if (gg) (*gg)[i] += g[k] * xhat[k];
      if (gbeta) (*gbeta)[i] += g[k];
    }
    for (std::size_t i = 0; i < dim_; ++i) {
      const std::size_t k = r * dim_ + i;
      const double d = g[k] * p(0)[i];
      gx[k] = rstd[r] * (d - sum_d / n - xhat[k] * sum_dh / n);
    }
  }
  return gx;
}

// ---------------------------------------------------------------- attention

MultiHeadSelfAttention::MultiHeadSelfAttention(std::size_t dim, std::size_t heads) : dim_(dim), heads_(heads) {
  if (!dim || !heads || dim % heads != 0) throw ArgumentError("mhsa: dim must be a positive multiple of heads");
  const double bound = std::sqrt(3.0 / static_cast<double>(dim));
  for (const char* n : {"q", "k", "v", "o"}) {
    add_param(std::string("w") + n, {dim, dim}, bound);
    add_param(std::string("b") + n, {dim}, 0.0);
  }
}

Shape MultiHeadSelfAttention::output_shape(const Shape& in) const {
  require(in.size() == 2 && in[1] == dim_ && in[0] > 0, "mhsa", "expected (T, " + std::to_string(dim_) + ")", in);
  return in;
}

Tensor MultiHeadSelfAttention::forward(const Tensor& x, Tape* tape) const {
  output_shape(x.shape());
  const std::size_t T = x.dim(0), D = dim_, dh = D / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  auto project = [&](std::size_t wi) {
    Tensor out({T, D});
    matmul_nt(x.data(), p(wi).data(), out.data(), T, D, D);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t j = 0; j < D; ++j) out[t * D + j] += p(wi + 1)[j];
    }
    return out;
  };
  Tensor q = project(0), k = project(2), v = project(4);
  Tensor probs({heads_, T, T});
  Tensor o({T, D});
  for (std::size_t h = 0; h < heads_; ++h) {
    double* ph = probs.data() + h * T * T;
    for (std::size_t i = 0; i < T; ++i) {
      double* row = ph + i * T;
      const double* qi = q.data() + i * D + h * dh;
      double mx = -HUGE_VAL;
      for (std::size_t j = 0; j < T; ++j) {
        const double* kj = k.data() + j * D + h * dh;
        double s = 0.0;
        for (std::size_t d = 0; d < dh; ++d) s += qi[d] * kj[d];
        row[j] = s * scale;
        mx = std::max(mx, row[j]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < T; ++j) {
        row[j] = std::exp(row[j] - mx);
        z += row[j];
      }
      const double inv = 1.0 / z;
      double* oi = o.data() + i * D + h * dh;
      for (std::size_t j = 0; j < T; ++j) {
        row[j] *= inv;
        const double* vj = v.data() + j * D + h * dh;
        for (std::size_t d = 0; d < dh; ++d) oi[d] += row[j] * vj[d];
      }
    }
  }
  Tensor y({T, D});
  matmul_nt(o.data(), p(6).data(), y.data(), T, D, D);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < D; ++j) y[t * D + j] += p(7)[j];
  }
  if (tape) tape->push({x, std::move(q), std::move(k), std::move(v), std::move(probs), std::move(o)});
  return y;
}

Tensor MultiHeadSelfAttention::backward(const Tensor& g, Tape& tape, Gradients* grads) const {
  auto saved = tape.pop();
  const Tensor& x = saved[0];
  const Tensor& q = saved[1];
  const Tensor& k = saved[2];
  const Tensor& v = saved[3];
  const Tensor& probs = saved[4];
  const Tensor& o = saved[5];
  const std::size_t T = x.dim(0), D = dim_, dh = D / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor go({T, D});
  matmul_nn(g.data(), p(6).data(), go.data(), T, D, D);
  if (Tensor* gw = grad(grads, 6)) matmul_tn(g.data(), o.data(), gw->data(), D, T, D, true);
  add_colsum(g, T, D, grad(grads, 7));

  Tensor gq({T, D}), gk({T, D}), gv({T, D});
  std::vector<double> dp(T);
  for (std::size_t h = 0; h < heads_; ++h) {
    const double* ph = probs.data() + h * T * T;
    for (std::size_t i = 0; i < T; ++i) {
      const double* row = ph + i * T;
      const double* goi = go.data() + i * D + h * dh;
      double dot = 0.0;
      for (std::size_t j = 0; j < T; ++j) {
        const double* vj = v.data() + j * D + h * dh;
        double* gvj = gv.data() + j * D + h * dh;
        double s = 0.0;
        for (std::size_t d = 0; d < dh; ++d) {
          s += goi[d] * vj[d];
          gvj[d] += row[j] * goi[d];
        }
        dp[j] = s;
        dot += s * row[j];
      }
      const double* qi = q.data() + i * D + h * dh;
      double* gqi = gq.data() + i * D + h * dh;
      for (std::size_t j = 0; j < T; ++j) {
        const double ds = row[j] * (dp[j] - dot) * scale;
        if (ds == 0.0) continue;
        const double* kj = k.data() + j * D + h * dh;
        double* gkj = gk.data() + j * D + h * dh;
        for (std::size_t d = 0; d < dh; ++d) {
          gqi[d] += ds * kj[d];
          gkj[d] += ds * qi[d];
        }
      }
    }
  }

  Tensor gx({T, D});
  const Tensor* proj_grads[3] = {&gq, &gk, &gv};
  for (std::size_t n = 0; n < 3; ++n) {
    const Tensor& gp = *proj_grads[n];
    matmul_nn(gp.data(), p(2 * n).data(), gx.data(), T, D, D, true);
    if (Tensor* gw = grad(grads, 2 * n)) matmul_tn(gp.data(), x.data(), gw->data(), D, T, D, true);
    add_colsum(gp, T, D, grad(grads, 2 * n + 1));
  }
  return gx;
}

// ---------------------------------------------------------------- positional encoding

double SinusoidalPositionalEncoding::value(std::size_t pos, std::size_t i, std::size_t dim) {
  const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(dim);
  const double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
  return i % 2 == 0 ? std::sin(angle) : std::cos(angle);
}

Shape SinusoidalPositionalEncoding::output_shape(const Shape& in) const {
  require(in.size() == 2 && in[1] == dim_, "posenc", "expected (T, " + std::to_string(dim_) + ")", in);
  return in;
}

Tensor SinusoidalPositionalEncoding::forward(const Tensor& x, Tape* tape) const {
  output_shape(x.shape());
  Tensor y = x;
  for (std::size_t t = 0; t < x.dim(0); ++t) {
    for (std::size_t i = 0; i < dim_; ++i) y[t * dim_ + i] += value(t, i, dim_);
  }
  if (tape) tape->push({});
  return y;
}

Tensor SinusoidalPositionalEncoding::backward(const Tensor& g, Tape& tape, Gradients*) const {
  tape.pop();
  return g;
}

// ---------------------------------------------------------------- GRU

Gru::Gru(std::size_t in, std::size_t hidden, bool reverse) : in_(in), hidden_(hidden), reverse_(reverse) {
  if (!in || !hidden) throw ArgumentError("gru: zero-sized configuration");
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  add_param("w_ih", {3 * hidden, in}, bound);
  add_param("w_hh", {3 * hidden, hidden}, bound);
  add_param("b_ih", {3 * hidden}, bound);
  add_param("b_hh", {3 * hidden}, bound);
}

Shape Gru::output_shape(const Shape& in) const {
  require(in.size() == 2 && in[1] == in_ && in[0] > 0, "gru", "expected (T, " + std::to_string(in_) + ")", in);
  return {in[0], hidden_};
}

Tensor Gru::forward(const Tensor& x, Tape* tape) const {
  const Shape os = output_shape(x.shape());
  const std::size_t T = x.dim(0), H = hidden_;
  Tensor xi({T, 3 * H});
  matmul_nt(x.data(), p(0).data(), xi.data(), T, in_, 3 * H);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < 3 * H; ++j) xi[t * 3 * H + j] += p(2)[j];
  }
  Tensor y(os);
  Tensor hprev({T, H}), r({T, H}), z({T, H}), n({T, H}), hn({T, H});
  std::vector<double> h(H, 0.0), hh(3 * H);
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t t = reverse_ ? T - 1 - s : s;
    matmul_nt(p(1).data(), h.data(), hh.data(), 3 * H, H, 1);
    const double* xt = xi.data() + t * 3 * H;
    for (std::size_t j = 0; j < H; ++j) {
      const double rj = sigmoid(xt[j] + hh[j] + p(3)[j]);
      const double zj = sigmoid(xt[H + j] + hh[H + j] + p(3)[H + j]);
      const double hnj = hh[2 * H + j] + p(3)[2 * H + j];
      const double nj = std::tanh(xt[2 * H + j] + rj * hnj);
      const std::size_t k = t * H + j;
      hprev[k] = h[j];
      r[k] = rj;
      z[k] = zj;
      n[k] = nj;
      hn[k] = hnj;
    }
    for (std::size_t j = 0; j < H; ++j) {
      const std::size_t k = t * H + j;
      h[j] = (1.0 - z[k]) * n[k] + z[k] * h[j];
      y[k] = h[j];
    }
  }
  if (tape) tape->push({x, std::move(hprev), std::move(r), std::move(z), std::move(n), std::move(hn)});
  return y;
}

Tensor Gru::backward(const Tensor& g, Tape& tape, Gradients* grads) const {
  auto saved = tape.pop();
  const Tensor& x = saved[0];
  const Tensor& hprev = saved[1];
  const Tensor& r = saved[2];
  const Tensor& z = saved[3];
  const Tensor& n = saved[4];
  const Tensor& hn = saved[5];
  const std::size_t T = x.dim(0), H = hidden_;
  Tensor gxi({T, 3 * H});
  Tensor* gwhh = grad(grads, 1);
  Tensor* gbhh = grad(grads, 3);
  std::vector<double> dh_next(H, 0.0), dhh(3 * H), dh(H);
  for (std::size_t s = T; s-- > 0;) {
    const std::size_t t = reverse_ ? T - 1 - s : s;
    double* gx_t = gxi.data() + t * 3 * H;
    for (std::size_t j = 0; j < H; ++j) {
      const std::size_t k = t * H + j;
      const double d = g[k] + dh_next[j];
      const double dn = d * (1.0 - z[k]);
      const double dz = d * (hprev[k] - n[k]);
      dh[j] = d * z[k];
      const double dan = dn * (1.0 - n[k] * n[k]);
      const double dr = dan * hn[k];
      const double daz = dz * z[k] * (1.0 - z[k]);
      const double dar = dr * r[k] * (1.0 - r[k]);
      gx_t[j] = dar;
      gx_t[H + j] = daz;
      gx_t[2 * H + j] = dan;
      dhh[j] = dar;
      dhh[H + j] = daz;
      dhh[2 * H + j] = dan * r[k];
    }
    // dh += W_hh^T dhh
    matmul_tn(p(1).data(), dhh.data(), dh.data(), H, 3 * H, 1, true);
    if (gwhh) matmul_nn(dhh.data(), hprev.data() + t * H, gwhh->data(), 3 * H, 1, H, true);
    if (gbhh) {
      for (std::size_t j = 0; j < 3 * H; ++j) (*gbhh)[j] += dhh[j];
    }
    dh_next = dh;
  }
  Tensor gx(x.shape());
  matmul_nn(gxi.data(), p(0).data(), gx.data(), T, 3 * H, in_);
  if (Tensor* gw = grad(grads, 0)) matmul_tn(gxi.data(), x.data(), gw->data(), 3 * H, T, in_, true);
  add_colsum(gxi, T, 3 * H, grad(grads, 2));
  return gx;
}

// ---------------------------------------------------------------- pooling / reshapes

Shape GlobalMeanPool::output_shape(const Shape& in) const {
  require((in.size() == 2 || in.size() == 3) && shape_size(in) > 0, "meanpool", "expected (T, D) or (C, H, W)", in);
  return {in.size() == 2 ? in[1] : in[0]};
}

Tensor GlobalMeanPool::forward(const Tensor& x, Tape* tape) const {
  Tensor y(output_shape(x.shape()));
  if (x.rank() == 2) {
    const std::size_t T = x.dim(0), D = x.dim(1);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t d = 0; d < D; ++d) y[d] += x[t * D + d];
    }
    y *= 1.0 / static_cast<double>(T);
  } else {
    const std::size_t C = x.dim(0), area = x.dim(1) * x.dim(2);
    for (std::size_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < area; ++i) s += x[c * area + i];
      y[c] = s / static_cast<double>(area);
    }
  }
  if (tape) tape->push({shape_tensor(x.shape())});
  return y;
}

Tensor GlobalMeanPool::backward(const Tensor& g, Tape& tape, Gradients*) const {
  const Shape in = tensor_shape(tape.pop()[0]);
  Tensor gx(in);
  if (in.size() == 2) {
    const double inv = 1.0 / static_cast<double>(in[0]);
    for (std::size_t t = 0; t < in[0]; ++t) {
      for (std::size_t d = 0; d < in[1]; ++d) gx[t * in[1] + d] = g[d] * inv;
    }
  } else {
    const std::size_t area = in[1] * in[2];
    const double inv = 1.0 / static_cast<double>(area);
    for (std::size_t c = 0; c < in[0]; ++c) {
      for (std::size_t i = 0; i < area; ++i) gx[c * area + i] = g[c] * inv;
    }
  }
  return gx;
}

Standardize::Standardize(double mean, double scale) {
  add_param("mean", {1}, 0.0, mean, false);
  add_param("scale", {1}, 0.0, scale, false);
}

void Standardize::set(double mean, double scale) {
  params()[0].value[0] = mean;
  params()[1].value[0] = scale;
}

Tensor Standardize::forward(const Tensor& x, Tape* tape) const {
  Tensor y = x;
  const double m = p(0)[0], s = p(1)[0];
  for (double& v : y.values()) v = (v - m) * s;
  if (tape) tape->push({});
  return y;
}

Tensor Standardize::backward(const Tensor& g, Tape& tape, Gradients*) const {
  tape.pop();
  Tensor gx = g;
  gx *= p(1)[0];
  return gx;
}

Shape AddChannelAxis::output_shape(const Shape& in) const {
  require(in.size() == 2, "add_channel", "expected (H, W)", in);
  require(rows_ == 0 || in[0] == rows_, "add_channel", "expected " + std::to_string(rows_) + " rows", in);
  return {1, in[0], in[1]};
}

Tensor AddChannelAxis::forward(const Tensor& x, Tape* tape) const {
  if (tape) tape->push({});
  return x.reshaped(output_shape(x.shape()));
}

Tensor AddChannelAxis::backward(const Tensor& g, Tape& tape, Gradients*) const {
  tape.pop();
  return g.reshaped({g.dim(1), g.dim(2)});
}

Shape FlattenTime::output_shape(const Shape& in) const {
  require(in.size() == 3, "flatten_time", "expected (C, F, T)", in);
  return {in[2], in[0] * in[1]};
}

Tensor FlattenTime::forward(const Tensor& x, Tape* tape) const {
  Tensor y(output_shape(x.shape()));
  const std::size_t C = x.dim(0), F = x.dim(1), T = x.dim(2);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t t = 0; t < T; ++t) y[t * C * F + c * F + f] = x[(c * F + f) * T + t];
    }
  }
  if (tape) tape->push({shape_tensor(x.shape())});
  return y;
}

Tensor FlattenTime::backward(const Tensor& g, Tape& tape, Gradients*) const {
  const Shape in = tensor_shape(tape.pop()[0]);
  Tensor gx(in);
  const std::size_t C = in[0], F = in[1], T = in[2];
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t t = 0; t < T; ++t) gx[(c * F + f) * T + t] = g[t * C * F + c * F + f];
    }
  }
  return gx;
}

Shape FlattenPatches::output_shape(const Shape& in) const {
  require(in.size() == 3, "flatten_patches", "expected (C, R, K)", in);
  return {in[1] * in[2], in[0]};
}

Tensor FlattenPatches::forward(const Tensor& x, Tape* tape) const {
  Tensor y(output_shape(x.shape()));
  const std::size_t C = x.dim(0), P = x.dim(1) * x.dim(2);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < P; ++i) y[i * C + c] = x[c * P + i];
  }
  if (tape) tape->push({shape_tensor(x.shape())});
  return y;
}

Tensor FlattenPatches::backward(const Tensor& g, Tape& tape, Gradients*) const {
  const Shape in = tensor_shape(tape.pop()[0]);
  Tensor gx(in);
  const std::size_t C = in[0], P = in[1] * in[2];
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < P; ++i) gx[c * P + i] = g[i * C + c];
  }
  return gx;
}

// ---------------------------------------------------------------- composites

Sequential& Sequential::add(LayerPtr layer) {
  layers_.push_back(std::move(layer));
  return *this;
}

Shape Sequential::output_shape(const Shape& in) const {
  Shape s = in;
  for (const auto& l : layers_) s = l->output_shape(s);
  return s;
}

Tensor Sequential::forward(const Tensor& x, Tape* tape) const {
  Tensor h = x;
  for (const auto& l : layers_) h = l->forward(h, tape);
  return h;
}

Tensor Sequential::backward(const Tensor& g, Tape& tape, Gradients* grads) const {
  Tensor d = g;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) d = (*it)->backward(d, tape, grads);
  return d;
}

std::vector<Layer*> Sequential::children() {
  std::vector<Layer*> out;
  for (auto& l : layers_) out.push_back(l.get());
  return out;
}

Residual::Residual(LayerPtr body, LayerPtr shortcut) : body_(std::move(body)), shortcut_(std::move(shortcut)) {
  if (!body_) throw ArgumentError("residual: missing body");
}

Shape Residual::output_shape(const Shape& in) const {
  const Shape b = body_->output_shape(in);
  const Shape s = shortcut_ ? shortcut_->output_shape(in) : in;
  if (b != s) {
    throw ArgumentError("residual: body output " + shape_string(b) + " does not match shortcut " + shape_string(s));
  }
  return b;
}

Tensor Residual::forward(const Tensor& x, Tape* tape) const {
  output_shape(x.shape());
  Tensor y = body_->forward(x, tape);
  y += shortcut_ ? shortcut_->forward(x, tape) : x;
  return y;
}

Tensor Residual::backward(const Tensor& g, Tape& tape, Gradients* grads) const {
  Tensor gs = shortcut_ ? shortcut_->backward(g, tape, grads) : g;
  Tensor gx = body_->backward(g, tape, grads);
  gx += gs;
  return gx;
}

std::vector<Layer*> Residual::children() {
  std::vector<Layer*> out{body_.get()};
  if (shortcut_) out.push_back(shortcut_.get());
  return out;
}

ParallelConcat::ParallelConcat(std::vector<LayerPtr> branches) : branches_(std::move(branches)) {
  if (branches_.empty()) throw ArgumentError("parallel_concat: no branches");
}

Shape ParallelConcat::output_shape(const Shape& in) const {
  Shape out;
  for (const auto& b : branches_) {
    const Shape s = b->output_shape(in);
    if (out.empty()) {
      out = s;
      continue;
    }
    if (s.size() != out.size() || !std::equal(s.begin(), s.end() - 1, out.begin())) {
      throw ArgumentError("parallel_concat: branch shapes differ beyond the last axis");
    }
    out.back() += s.back();
  }
  return out;
}

Tensor ParallelConcat::forward(const Tensor& x, Tape* tape) const {
  const Shape os = output_shape(x.shape());
  Tensor y(os);
  const std::size_t rows = y.size() / os.back();
  std::size_t offset = 0;
  std::vector<double> widths;
  for (const auto& b : branches_) {
    const Tensor yb = b->forward(x, tape);
    const std::size_t w = yb.shape().back();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(yb.data() + r * w, w, y.data() + r * os.back() + offset);
    }
    widths.push_back(static_cast<double>(w));
    offset += w;
  }
  if (tape) {
    const std::size_t n = widths.size();
    tape->push({Tensor({n}, std::move(widths))});
  }
  return y;
}

Tensor ParallelConcat::backward(const Tensor& g, Tape& tape, Gradients* grads) const {
  const Tensor widths = std::move(tape.pop()[0]);
  const std::size_t total = g.shape().back();
  const std::size_t rows = g.size() / total;
  std::size_t offset = total;
  Tensor gx;
  for (std::size_t bi = branches_.size(); bi-- > 0;) {
    const auto w = static_cast<std::size_t>(widths[bi]);
    offset -= w;
    Shape bs = g.shape();
    bs.back() = w;
    Tensor gb(bs);
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(g.data() + r * total + offset, w, gb.data() + r * w);
    Tensor d = branches_[bi]->backward(gb, tape, grads);
    if (gx.size() == 0) {
      gx = std::move(d);
    } else {
      gx += d;
    }
  }
  return gx;
}

std::vector<Layer*> ParallelConcat::children() {
  std::vector<Layer*> out;
  for (auto& b : branches_) out.push_back(b.get());
  return out;
}

// ---------------------------------------------------------------- graph description

Json describe(const Layer& layer) {
  Json j{{"kind", layer.kind()}};
  Json cfg = layer.config();
  if (!cfg.empty()) j["config"] = std::move(cfg);
  auto kids = layer.children();
  if (!kids.empty()) {
    Json arr = Json::array();
    for (const Layer* k : kids) arr.push_back(describe(*k));
    j["children"] = std::move(arr);
  }
  return j;
}

LayerPtr layer_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const Json cfg = j.value("config", Json::object());
  auto sz = [&](const char* key) { return cfg.at(key).get<std::size_t>(); };
  auto kids = [&] {
    std::vector<LayerPtr> out;
    for (const auto& c : j.value("children", Json::array())) out.push_back(layer_from_json(c));
    return out;
  };
  if (kind == "conv2d") {
    return std::make_unique<Conv2D>(sz("in_ch"), sz("out_ch"), sz("kh"), sz("kw"), sz("sh"), sz("sw"), sz("ph"),
                                    sz("pw"));
  }
  if (kind == "relu") return std::make_unique<ReLU>();
  if (kind == "sigmoid") return std::make_unique<Sigmoid>();
  if (kind == "maxpool2d") return std::make_unique<MaxPool2D>(sz("kh"), sz("kw"));
  if (kind == "linear") return std::make_unique<Linear>(sz("in"), sz("out"));
  if (kind == "layernorm") return std::make_unique<LayerNorm>(sz("dim"), cfg.at("eps").get<double>());
  if (kind == "mhsa") return std::make_unique<MultiHeadSelfAttention>(sz("dim"), sz("heads"));
  if (kind == "posenc") return std::make_unique<SinusoidalPositionalEncoding>(sz("dim"));
  if (kind == "gru") return std::make_unique<Gru>(sz("in"), sz("hidden"), cfg.at("reverse").get<bool>());
  if (kind == "meanpool") return std::make_unique<GlobalMeanPool>();
  if (kind == "standardize") return std::make_unique<Standardize>();
  if (kind == "add_channel") return std::make_unique<AddChannelAxis>(cfg.value("rows", std::size_t{0}));
  if (kind == "flatten_time") return std::make_unique<FlattenTime>();
  if (kind == "flatten_patches") return std::make_unique<FlattenPatches>();
  if (kind == "sequential") return std::make_unique<Sequential>(kids());
  if (kind == "residual") {
    auto c = kids();
    if (c.empty() || c.size() > 2) throw FormatError("graph: residual needs 1 or 2 children");
    return std::make_unique<Residual>(std::move(c[0]), c.size() == 2 ? std::move(c[1]) : nullptr);
  }
  if (kind == "parallel_concat") return std::make_unique<ParallelConcat>(kids());
  throw FormatError("graph: unknown layer kind '" + kind + "'");
}

}  // namespace aerobust::nn
