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

#include "osslab/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "osslab/decide.hpp"
#include "osslab/errors.hpp"

namespace osslab {

void LossWeights::validate() const {
  for (double w : {w_semi, w_self, w_sub, w_reg}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss weights must be finite and >= 0");
  }
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
}

LossWeights effective_weights(const LossWeights& weights, const LossSwitches& switches) {
  LossWeights w = weights;
  if (switches.warmup) {
    w.w_semi = 0.0;
    w.w_sub = 0.0;
  }
  if (switches.drop_self) w.w_self = 0.0;
  if (switches.drop_sub) w.w_sub = 0.0;
  return w;
}

namespace {

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

}  // namespace

LossGrad loss_sup(const Eigen::MatrixXd& logits, std::span<const int> labels) {
  const auto n = logits.cols();
  if (n != static_cast<Eigen::Index>(labels.size()) || n == 0) {
    throw std::invalid_argument("loss_sup: batch size mismatch");
  }
  LossGrad out;
  out.grad.resize(logits.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.rows()) throw std::invalid_argument("loss_sup: bad label");
    const Eigen::VectorXd lp = log_softmax(logits.col(i));
    out.value -= lp[y];
    out.grad.col(i) = lp.array().exp();
    out.grad(y, i) -= 1.0;
  }
  out.value /= static_cast<double>(n);
  out.grad /= static_cast<double>(n);
  return out;
}

SemiLoss loss_semi(const Eigen::MatrixXd& weak_probs,
                   const Eigen::MatrixXd& strong_logits,
                   std::span<const double> id_weight, double tau) {
  const auto n = weak_probs.cols();
  if (strong_logits.cols() != n || static_cast<Eigen::Index>(id_weight.size()) != n ||
      strong_logits.rows() != weak_probs.rows() || n == 0) {
    throw std::invalid_argument("loss_semi: shape mismatch");
  }
  SemiLoss out;
  out.weight_hash = hash_weights(id_weight);
  out.grad_strong_logits = Eigen::MatrixXd::Zero(strong_logits.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index pseudo = 0;
    const double confidence = weak_probs.col(i).maxCoeff(&pseudo);
    const double w = id_weight[static_cast<std::size_t>(i)];
    if (!(confidence > tau) || w == 0.0) continue;
    ++out.pseudo_label_count;
    const Eigen::VectorXd lp = log_softmax(strong_logits.col(i));
    out.value -= w * lp[pseudo];
    out.grad_strong_logits.col(i) = w * lp.array().exp();
    out.grad_strong_logits(pseudo, i) -= w;
  }
  out.value /= static_cast<double>(n);
  out.grad_strong_logits /= static_cast<double>(n);
  return out;
}

SelfLoss loss_self(const Eigen::MatrixXd& projected_strong,
                   const Eigen::MatrixXd& weak_features) {
  const auto n = weak_features.cols();
  if (projected_strong.cols() != n || projected_strong.rows() != weak_features.rows() ||
      n == 0) {
    throw std::invalid_argument("loss_self: shape mismatch");
  }
  SelfLoss out;
  out.grad_projection = Eigen::MatrixXd::Zero(projected_strong.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto u = projected_strong.col(i);
    const auto z = weak_features.col(i);
    const double un = u.norm();
    const double zn = z.norm();
    if (!(un > 0.0) || !(zn > 0.0)) {
      ++out.degenerate;
      continue;
    }
    const double cosine = u.dot(z) / (un * zn);
    out.value -= cosine;
    // d cos / du = z / (|u||z|) - cos u / |u|^2
    out.grad_projection.col(i) = -(z / (un * zn) - (cosine / (un * un)) * u);
  }
  out.value /= static_cast<double>(n);
  out.grad_projection /= static_cast<double>(n);
  return out;
}

SubLoss loss_sub(const Eigen::MatrixXd& weak_features, const IdSubspaceBasis& basis,
                 std::span<const double> id_weight) {
  const auto n = weak_features.cols();
  if (static_cast<Eigen::Index>(id_weight.size()) != n || n == 0) {
    throw std::invalid_argument("loss_sub: shape mismatch");
  }
  SubLoss out;
  out.weight_hash = hash_weights(id_weight);
  out.grad_features = Eigen::MatrixXd::Zero(weak_features.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sign = 1.0 - 2.0 * id_weight[static_cast<std::size_t>(i)];
    const Eigen::VectorXd z = weak_features.col(i);
    out.value += sign * subspace_score(z, basis).value_or(0.0);
    out.grad_features.col(i) = sign * subspace_score_gradient(z, basis);
  }
  out.value /= static_cast<double>(n);
  out.grad_features /= static_cast<double>(n);
  return out;
}

double loss_reg(const MlpParams& params) {
  double acc = 0.0;
  for (double v : params.flat()) acc += v * v;
  return 0.5 * acc;
}

void add_loss_reg_grad(const MlpParams& params, double scale, MlpParams& grad) {
  const auto theta = params.flat();
  auto g = grad.flat();
  if (g.size() != theta.size()) throw std::invalid_argument("add_loss_reg_grad: size mismatch");
  for (std::size_t i = 0; i < theta.size(); ++i) g[i] += scale * theta[i];
}

LossBreakdown total_loss(const LossBreakdown& parts, const LossWeights& weights,
                         const LossSwitches& switches) {
  const LossWeights w = effective_weights(weights, switches);
  LossBreakdown out;
  out.sup = parts.sup;
  out.reg = parts.reg;
  if (w.w_semi != 0.0) {
    out.semi = parts.semi;
    out.pseudo_label_count = parts.pseudo_label_count;
  }
  if (w.w_self != 0.0) out.self_sup = parts.self_sup;
  if (w.w_sub != 0.0) out.sub = parts.sub;
  out.total = out.sup + w.w_semi * out.semi + w.w_self * out.self_sup +
              w.w_sub * out.sub + w.w_reg * out.reg;
  return out;
}

}  // namespace osslab
