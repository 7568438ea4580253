/*
 * Copyright 2026 The osslab Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "osslab/nn.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "osslab/errors.hpp"

namespace osslab {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Identity: return "identity";
  }
  return "unknown";
}

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "identity") return Activation::Identity;
  throw ConfigError("unknown activation '" + name + "'");
}

void MlpShape::validate() const {
  if (input_dim < 1 || feature_dim < 1 || num_classes < 1 ||
      std::any_of(hidden.begin(), hidden.end(), [](int h) { return h < 1; })) {
    throw ConfigError("network sizes must be positive");
  }
  if (feature_dim < num_classes) {
    throw ConfigError("feature_dim must be >= num_classes");
  }
}

MlpParams::MlpParams(MlpShape shape) : shape_(std::move(shape)) {
  shape_.validate();
  std::size_t offset = 0;
  auto add = [&](std::string name, int rows, int cols) {
    blocks_.push_back({std::move(name), offset, rows, cols});
    offset += static_cast<std::size_t>(rows) * cols;
  };
  int fan_in = shape_.input_dim;
  for (int l = 0; l < num_backbone_layers(); ++l) {
    const int out = l + 1 < num_backbone_layers() ? shape_.hidden[l] : shape_.feature_dim;
    add(fmt::format("f{}.weight", l), out, fan_in);
    add(fmt::format("f{}.bias", l), out, 1);
    fan_in = out;
  }
  add("g.weight", shape_.num_classes, shape_.feature_dim);
  add("g.bias", shape_.num_classes, 1);
  add("h.weight", shape_.feature_dim, shape_.feature_dim);
  data_.assign(offset, 0.0);
}

MlpParams MlpParams::glorot(const MlpShape& shape, Rng& rng) {
  MlpParams p(shape);
  for (const auto& b : p.blocks_) {
    if (b.cols == 1) continue;  // biases start at zero
    const double a = std::sqrt(6.0 / (b.rows + b.cols));
    std::uniform_real_distribution<double> u(-a, a);
    for (std::size_t i = 0; i < static_cast<std::size_t>(b.rows) * b.cols; ++i) {
      p.data_[b.offset + i] = u(rng);
    }
  }
  return p;
}

MlpParams::MatrixMap MlpParams::block_matrix(std::size_t index) {
  const auto& b = blocks_.at(index);
  return MatrixMap(data_.data() + b.offset, b.rows, b.cols);
}

MlpParams::ConstMatrixMap MlpParams::block_matrix(std::size_t index) const {
  const auto& b = blocks_.at(index);
  return ConstMatrixMap(data_.data() + b.offset, b.rows, b.cols);
}

MlpParams::MatrixMap MlpParams::backbone_weight(int layer) { return block_matrix(2 * layer); }
MlpParams::ConstMatrixMap MlpParams::backbone_weight(int layer) const {
  return block_matrix(2 * layer);
}
MlpParams::VectorMap MlpParams::backbone_bias(int layer) {
  const auto& b = blocks_.at(2 * layer + 1);
  return VectorMap(data_.data() + b.offset, b.rows);
}
MlpParams::ConstVectorMap MlpParams::backbone_bias(int layer) const {
  const auto& b = blocks_.at(2 * layer + 1);
  return ConstVectorMap(data_.data() + b.offset, b.rows);
}
MlpParams::MatrixMap MlpParams::head_weight() { return block_matrix(2 * num_backbone_layers()); }
MlpParams::ConstMatrixMap MlpParams::head_weight() const {
  return block_matrix(2 * num_backbone_layers());
}
MlpParams::VectorMap MlpParams::head_bias() {
  const auto& b = blocks_.at(2 * num_backbone_layers() + 1);
  return VectorMap(data_.data() + b.offset, b.rows);
}
MlpParams::ConstVectorMap MlpParams::head_bias() const {
  const auto& b = blocks_.at(2 * num_backbone_layers() + 1);
  return ConstVectorMap(data_.data() + b.offset, b.rows);
}
MlpParams::MatrixMap MlpParams::projection_weight() {
  return block_matrix(2 * num_backbone_layers() + 2);
}
MlpParams::ConstMatrixMap MlpParams::projection_weight() const {
  return block_matrix(2 * num_backbone_layers() + 2);
}

void MlpParams::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

namespace {

Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& pre) {
  switch (a) {
    case Activation::Tanh: return pre.array().tanh().matrix();
    case Activation::Relu: return pre.cwiseMax(0.0);
    case Activation::Identity: return pre;
  }
  return pre;
}

// d(post)/d(pre), elementwise.
Eigen::MatrixXd activation_slope(Activation a, const Eigen::MatrixXd& pre,
                                 const Eigen::MatrixXd& post) {
  switch (a) {
    case Activation::Tanh: return (1.0 - post.array().square()).matrix();
    case Activation::Relu:
      return (pre.array() > 0.0).cast<double>().matrix();
    case Activation::Identity:
      return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
  }
  return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
}

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) {
    throw NumericalError(fmt::format("non-finite values in {}", what));
  }
}

}  // namespace

Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double m = logits.col(j).maxCoeff();
    out.col(j) = (logits.col(j).array() - m).exp().matrix();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

ForwardTrace forward(const MlpParams& params, const Eigen::MatrixXd& inputs) {
  const auto& shape = params.shape();
  if (inputs.rows() != shape.input_dim) {
    throw std::invalid_argument(fmt::format(
        "forward: input has {} rows, network expects {}", inputs.rows(), shape.input_dim));
  }
  ForwardTrace t;
  t.input = inputs;
  const int layers = params.num_backbone_layers();
  t.pre.reserve(layers);
  t.post.reserve(layers);
  const Eigen::MatrixXd* a = &t.input;
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = params.backbone_weight(l) * *a;
    z.colwise() += params.backbone_bias(l);
    const bool last = l + 1 == layers;
    t.post.push_back(last ? z : activate(shape.activation, z));
    t.pre.push_back(std::move(z));
    a = &t.post.back();
  }
  t.features = t.post.back();
  t.logits = params.head_weight() * t.features;
  t.logits.colwise() += params.head_bias();
  require_finite(t.logits, "forward pass");
  t.probs = softmax(t.logits);
  return t;
}

ForwardTrace forward(const MlpParams& params, const Eigen::VectorXd& input) {
  return forward(params, Eigen::MatrixXd(input));
}

Eigen::MatrixXd project(const MlpParams& params, const Eigen::MatrixXd& features) {
  return params.projection_weight() * features;
}

void backward(const MlpParams& params, const ForwardTrace& trace,
              const Upstream& upstream, MlpParams& grad) {
  if (!(grad.shape() == params.shape())) {
    throw std::invalid_argument("backward: gradient shape does not match params");
  }
  const auto n = trace.features.cols();
  auto check = [&](const Eigen::MatrixXd* m, Eigen::Index rows, const char* what) {
    if (m != nullptr && (m->rows() != rows || m->cols() != n)) {
      throw std::invalid_argument(fmt::format("backward: bad upstream shape for {}", what));
    }
  };
  const auto& shape = params.shape();
  check(upstream.features, shape.feature_dim, "features");
  check(upstream.logits, shape.num_classes, "logits");
  check(upstream.projection, shape.feature_dim, "projection");
  if (upstream.features == nullptr && upstream.logits == nullptr &&
      upstream.projection == nullptr) {
    return;
  }

  Eigen::MatrixXd d_features = Eigen::MatrixXd::Zero(shape.feature_dim, n);
  if (upstream.features != nullptr) d_features += *upstream.features;
  if (upstream.logits != nullptr) {
    grad.head_weight() += *upstream.logits * trace.features.transpose();
    grad.head_bias() += upstream.logits->rowwise().sum();
    d_features.noalias() += params.head_weight().transpose() * *upstream.logits;
  }
  if (upstream.projection != nullptr) {
    grad.projection_weight() += *upstream.projection * trace.features.transpose();
    d_features.noalias() += params.projection_weight().transpose() * *upstream.projection;
  }

  Eigen::MatrixXd delta = std::move(d_features);  // gradient w.r.t. pre of last layer
  for (int l = params.num_backbone_layers() - 1; l >= 0; --l) {
    const Eigen::MatrixXd& below = l == 0 ? trace.input : trace.post[l - 1];
    grad.backbone_weight(l) += delta * below.transpose();
    grad.backbone_bias(l) += delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd d_below = params.backbone_weight(l).transpose() * delta;
    delta = d_below.cwiseProduct(
        activation_slope(shape.activation, trace.pre[l - 1], trace.post[l - 1]));
  }
}

GradCheckReport grad_check(const MlpParams& params, const LossClosure& loss,
                           double tolerance, Rng& rng, std::size_t min_coords,
                           double step) {
  MlpParams analytic(params.shape());
  loss(params, &analytic);

  std::vector<std::size_t> coords(params.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (coords.size() > min_coords) {
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(min_coords);
  }

  GradCheckReport report;
  MlpParams probe = params;
  for (const auto i : coords) {
    const double original = probe.flat()[i];
    probe.flat()[i] = original + step;
    const double up = loss(probe, nullptr);
    probe.flat()[i] = original - step;
    const double down = loss(probe, nullptr);
    probe.flat()[i] = original;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.flat()[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > report.max_rel_error || !std::isfinite(rel)) {
      report.max_rel_error = std::isfinite(rel) ? rel : HUGE_VAL;
      report.worst_index = i;
    }
    ++report.checked;
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

void write_params(std::ostream& out, const MlpParams& params) {
  const auto& s = params.shape();
  out << "osslab-params v1\n";
  std::string line = fmt::format("shape {} {}", s.input_dim, s.hidden.size());
  for (int h : s.hidden) line += fmt::format(" {}", h);
  line += fmt::format(" {} {} {}\n", s.feature_dim, s.num_classes, to_string(s.activation));
  out << line;
  const auto data = params.flat();
  for (const auto& b : params.blocks()) {
    out << fmt::format("block {} {} {}\n", b.name, b.rows, b.cols);
    for (int r = 0; r < b.rows; ++r) {
      line.clear();
      for (int c = 0; c < b.cols; ++c) {
        // Column-major storage, row-major on disk.
        fmt::format_to(std::back_inserter(line), "{}{}", c == 0 ? "" : " ",
                       data[b.offset + static_cast<std::size_t>(c) * b.rows + r]);
      }
      line += '\n';
      out << line;
    }
  }
}

MlpParams read_params(std::istream& in) {
  std::string tag, version;
  if (!(in >> tag >> version) || tag != "osslab-params" || version != "v1") {
    throw FormatError("not an osslab-params v1 checkpoint");
  }
  MlpShape s;
  std::size_t num_hidden = 0;
  std::string word, activation;
  if (!(in >> word >> s.input_dim >> num_hidden) || word != "shape" || num_hidden > 1024) {
    throw FormatError("bad params shape line");
  }
  s.hidden.resize(num_hidden);
  for (auto& h : s.hidden) in >> h;
  in >> s.feature_dim >> s.num_classes >> activation;
  if (!in) throw FormatError("bad params shape line");
  try {
    s.activation = activation_from_string(activation);
    s.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad params shape: ") + e.what());
  }
  MlpParams params(s);
  auto data = params.flat();
  for (const auto& b : params.blocks()) {
    std::string name;
    int rows = 0, cols = 0;
    if (!(in >> word >> name >> rows >> cols) || word != "block" || name != b.name ||
        rows != b.rows || cols != b.cols) {
      throw FormatError(fmt::format("expected block {} {}x{}", b.name, b.rows, b.cols));
    }
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        if (!(in >> data[b.offset + static_cast<std::size_t>(c) * rows + r])) {
          throw FormatError(fmt::format("truncated block {}", b.name));
        }
      }
    }
  }
  return params;
}

}  // namespace osslab
