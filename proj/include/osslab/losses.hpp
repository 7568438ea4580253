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

#ifndef OSSLAB_LOSSES_HPP_
#define OSSLAB_LOSSES_HPP_

#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "osslab/nn.hpp"
#include "osslab/subspace.hpp"

namespace osslab {

struct LossWeights {
  double w_semi = 1.0;
  double w_self = 1.0;
  double w_sub = 1.0;
  double w_reg = 5e-4;
  double tau = 0.95;  // pseudo-label confidence threshold

  void validate() const;
};

// Switches that remove loss terms from the objective. Warm-up removes the
// pseudo-label and subspace terms.
struct LossSwitches {
  bool warmup = false;
  bool drop_self = false;
  bool drop_sub = false;
};

// Weights after applying the switches; a removed term has weight exactly 0.
LossWeights effective_weights(const LossWeights& weights, const LossSwitches& switches);

struct LossBreakdown {
  double sup = 0.0;
  double semi = 0.0;
  double self_sup = 0.0;
  double sub = 0.0;
  double reg = 0.0;
  double total = 0.0;
  int pseudo_label_count = 0;
};

// Value and gradient w.r.t. one batch of network outputs.
struct LossGrad {
  double value = 0.0;
  Eigen::MatrixXd grad;
};

// Mean cross-entropy of the labeled predictions; gradient w.r.t. logits.
LossGrad loss_sup(const Eigen::MatrixXd& logits, std::span<const int> labels);

struct SemiLoss {
  double value = 0.0;
  int pseudo_label_count = 0;
  Eigen::MatrixXd grad_strong_logits;
  std::uint64_t weight_hash = 0;
};

// Pseudo-label cross-entropy, averaged over all n unlabeled samples. Term i
// counts when max_y weak_probs(y, i) > tau and is scaled by id_weight[i].
// Weak-view probabilities are constants.
SemiLoss loss_semi(const Eigen::MatrixXd& weak_probs,
                   const Eigen::MatrixXd& strong_logits,
                   std::span<const double> id_weight, double tau);

struct SelfLoss {
  double value = 0.0;
  Eigen::MatrixXd grad_projection;  // w.r.t. h(z~)
  int degenerate = 0;               // zero-norm pairs, contributing 0
};

// Negative mean cosine between h(z~_i) and the (constant) weak features z_i.
SelfLoss loss_self(const Eigen::MatrixXd& projected_strong,
                   const Eigen::MatrixXd& weak_features);

struct SubLoss {
  double value = 0.0;
  Eigen::MatrixXd grad_features;
  std::uint64_t weight_hash = 0;
};

// (1/n) sum_i (1 - 2 id_weight[i]) s(z_i), i.e. (m_ood - m_id) s(z_i) for a
// binary mask. The basis is a constant.
SubLoss loss_sub(const Eigen::MatrixXd& weak_features, const IdSubspaceBasis& basis,
                 std::span<const double> id_weight);

// 0.5 ||theta||^2 over every trainable parameter.
double loss_reg(const MlpParams& params);
// grad += scale * theta
void add_loss_reg_grad(const MlpParams& params, double scale, MlpParams& grad);

// Weighted sum of already computed terms. Terms removed by the switches are
// reported as 0 and contribute nothing.
LossBreakdown total_loss(const LossBreakdown& parts, const LossWeights& weights,
                         const LossSwitches& switches);

}  // namespace osslab

#endif  // OSSLAB_LOSSES_HPP_
