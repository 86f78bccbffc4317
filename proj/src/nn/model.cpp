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

#include "aerobust/nn/model.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include "aerobust/error.hpp"
#include "aerobust/random.hpp"

namespace aerobust::nn {
namespace {

constexpr char kMagic[4] = {'A', 'P', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;

void collect(Layer& layer, const std::string& prefix, std::vector<ParameterRef>& out) {
  std::vector<std::size_t> slots;
  for (auto& p : layer.params()) {
    slots.push_back(out.size());
    out.push_back({prefix.empty() ? p.name : prefix + "." + p.name, &p});
  }
  layer.set_slots(std::move(slots));
  auto kids = layer.children();
  for (std::size_t i = 0; i < kids.size(); ++i) {
    collect(*kids[i], prefix.empty() ? std::to_string(i) : prefix + "." + std::to_string(i), out);
  }
}

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw FormatError("checkpoint: truncated at byte " + std::to_string(pos_));
  }
  std::uint64_t uint(int width) {
    need(width);
    std::uint64_t v = 0;
    for (int i = width - 1; i >= 0; --i) v = (v << 8) | b_[pos_ + i];
    pos_ += width;
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  std::uint64_t u64() { return uint(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_labels(std::span<const double> y, std::size_t n_classes) {
  if (y.size() != n_classes) {
    throw ArgumentError("labels: expected " + std::to_string(n_classes) + " entries, got " + std::to_string(y.size()));
  }
  for (double v : y) {
    if (v != 0.0 && v != 1.0) throw ArgumentError("labels: entries must be 0 or 1");
  }
}

Model::Model(LayerPtr body, std::size_t n_classes, Json metadata)
    : body_(std::move(body)), n_classes_(n_classes), metadata_(std::move(metadata)) {
  if (!body_) throw ArgumentError("model: missing body");
  if (n_classes_ == 0) throw ArgumentError("model: n_classes must be positive");
  index_parameters();
}

Model::Model(const Model& other)
    : body_(layer_from_json(describe(*other.body_))), n_classes_(other.n_classes_), metadata_(other.metadata_) {
  index_parameters();
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i].param->value = other.params_[i].param->value;
}

Model& Model::operator=(const Model& other) {
  if (this != &other) *this = Model(other);
  return *this;
}

void Model::index_parameters() {
  params_.clear();
  collect(*body_, "", params_);
}

void Model::check_input(const Shape& in) const {
  const Shape out = body_->output_shape(in);
  if (out != Shape{n_classes_}) {
    throw ArgumentError("model: input " + shape_string(in) + " maps to " + shape_string(out) + ", expected (" +
                        std::to_string(n_classes_) + ")");
  }
}

Tensor Model::logits(const Tensor& x) const {
  check_input(x.shape());
  Tensor z = body_->forward(x, nullptr);
  for (double v : z.values()) {
    if (!std::isfinite(v)) throw NumericError("model: non-finite logit");
  }
  return z;
}

std::uint64_t Model::branch_signature(const Tensor& x) const {
  check_input(x.shape());
  Tape tape(true);
  body_->forward(x, &tape);
  return tape.branch_hash();
}

Tensor Model::forward(const Tensor& x) const {
  Tensor z = logits(x);
  for (double& v : z.values()) v = sigmoid(v);
  return z;
}

namespace {

double bce_from_logits(const Tensor& z, std::span<const double> y) {
  double loss = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    // softplus(z) - y z, stable for large |z|
    loss += std::max(z[c], 0.0) + std::log1p(std::exp(-std::abs(z[c]))) - y[c] * z[c];
  }
  return loss / static_cast<double>(z.size());
}

Tensor bce_grad(const Tensor& z, std::span<const double> y) {
  Tensor g(z.shape());
  const double inv = 1.0 / static_cast<double>(z.size());
  for (std::size_t c = 0; c < z.size(); ++c) g[c] = (sigmoid(z[c]) - y[c]) * inv;
  return g;
}

}  // namespace

double Model::loss(const Tensor& x, std::span<const double> y) const {
  check_labels(y, n_classes_);
  return bce_from_logits(logits(x), y);
}

LossAndGrad Model::loss_and_input_gradient(const Tensor& x, std::span<const double> y) const {
  check_labels(y, n_classes_);
  check_input(x.shape());
  Tape tape;
  const Tensor z = body_->forward(x, &tape);
  LossAndGrad out;
  out.loss = bce_from_logits(z, y);
  out.grad = body_->backward(bce_grad(z, y), tape, nullptr);
  return out;
}

double Model::loss_and_gradients(const Tensor& x, std::span<const double> y, Gradients& grads,
                                 Tensor* input_grad) const {
  check_labels(y, n_classes_);
  check_input(x.shape());
  Tape tape;
  const Tensor z = body_->forward(x, &tape);
  const double loss = bce_from_logits(z, y);
  Tensor gx = body_->backward(bce_grad(z, y), tape, &grads);
  if (input_grad) *input_grad = std::move(gx);
  return loss;
}

Gradients Model::make_gradients() const {
  std::vector<Tensor> g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.emplace_back(p.param->value.shape());
  return Gradients(std::move(g));
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.param->value.size();
  return n;
}

std::size_t Model::trainable_parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.param->trainable) n += p.param->value.size();
  }
  return n;
}

void Model::initialize(std::uint64_t seed) {
  for (auto& ref : params_) {
    Parameter& p = *ref.param;
    if (p.init_bound <= 0.0) continue;
    const std::uint64_t stream = rnd::combine(seed, rnd::hash_string(ref.path));
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      p.value[i] = (2.0 * rnd::uniform(stream, i) - 1.0) * p.init_bound;
    }
  }
}

std::vector<std::uint8_t> to_bytes(const Model& m) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(m.n_classes()));
  w.str(m.metadata().dump());
  w.str(describe(m.body()).dump());
  w.u32(static_cast<std::uint32_t>(m.parameters().size()));
  for (const auto& ref : m.parameters()) {
    const Tensor& t = ref.param->value;
    w.str(ref.path);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.u64(d);
    for (double v : t.values()) w.f64(v);
  }
  return w.take();
}

Model from_bytes(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.need(4);
  if (!std::equal(kMagic, kMagic + 4, bytes.begin())) throw FormatError("checkpoint: bad magic");
  r.uint(4);
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  const std::uint32_t n_classes = r.u32();
  Json metadata, graph;
  try {
    metadata = Json::parse(r.str());
    graph = Json::parse(r.str());
  } catch (const Json::exception& e) {
    throw FormatError(std::string("checkpoint: bad header JSON: ") + e.what());
  }
  Model m(layer_from_json(graph), n_classes, std::move(metadata));
  const std::uint32_t n_params = r.u32();
  if (n_params != m.parameters().size()) {
    throw FormatError("checkpoint: " + std::to_string(n_params) + " tensors for a graph with " +
                      std::to_string(m.parameters().size()));
  }
  for (const auto& ref : m.parameters()) {
    const std::string name = r.str();
    if (name != ref.path) throw FormatError("checkpoint: expected tensor '" + ref.path + "', found '" + name + "'");
    const std::uint32_t rank = r.u32();
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    if (shape != ref.param->value.shape()) {
      throw FormatError("checkpoint: tensor '" + name + "' has shape " + shape_string(shape) + ", graph expects " +
                        shape_string(ref.param->value.shape()));
    }
    for (double& v : ref.param->value.values()) v = r.f64();
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes after parameters");
  return m;
}

void save(const Model& m, const std::filesystem::path& path) {
  const auto bytes = to_bytes(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

Model load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_bytes(bytes);
}

}  // namespace aerobust::nn
