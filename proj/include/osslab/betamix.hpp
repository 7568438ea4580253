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

#ifndef OSSLAB_BETAMIX_HPP_
#define OSSLAB_BETAMIX_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace osslab {

struct BetaParams {
  double alpha = 1.0;
  double beta = 1.0;

  double mean() const { return alpha / (alpha + beta); }
  double variance() const;
  bool operator==(const BetaParams&) const = default;
};

// Two-component Beta mixture over scores in (0, 1): ID and OOD conditionals,
// the ID prior `pi`, the posterior regularizer `epsilon` (mask sampling only)
// and the EMA momentum of the batch estimator.
struct BetaMixtureModel {
  BetaParams id{10.0, 2.0};
  BetaParams ood{2.0, 10.0};
  double pi = 0.5;
  double epsilon = 0.1;
  double lambda_ema = 0.999;

  // Throws ConfigError on invalid parameters.
  void validate() const;
  bool operator==(const BetaMixtureModel&) const = default;
};

struct MomentPair {
  double mean = 0.5;
  double variance = 1.0 / 12.0;
};

// Scores are clamped into [kScoreClamp, 1 - kScoreClamp] before any density
// evaluation.
inline constexpr double kScoreClamp = 1e-6;
double clamp_score(double s);

inline constexpr double kBetaParamFloor = 1e-2;
inline constexpr double kBetaParamCeiling = 1e6;
// Below this total weight a component counts as empty for the batch.
inline constexpr double kMinComponentMass = 1e-6;

// Throws std::domain_error unless 0 < s < 1.
double beta_pdf(const BetaParams& p, double s);
double log_beta_pdf(const BetaParams& p, double s);

// Weighted mean and (population) variance. Throws std::domain_error when the
// total weight is zero and std::invalid_argument on length mismatch.
MomentPair weighted_moments(std::span<const double> scores,
                            std::span<const double> weights);

struct MomFit {
  BetaParams params;
  bool clamped = false;
};

// alpha = m k, beta = (1 - m) k with k = m (1 - m) / v - 1. When k <= 0 or a
// parameter leaves [kBetaParamFloor, kBetaParamCeiling], both are rescaled
// together so the mean m is preserved and the result is reported as clamped.
MomFit method_of_moments(const MomentPair& m);

// p(ID | s) by Bayes' rule; the regularized form adds epsilon to the
// denominator. Falls back to the prior when both densities underflow.
double posterior_id(const BetaMixtureModel& model, double s, bool regularized);

// One E-step and one MM-step on a batch, followed by the EMA update of the
// four Beta parameters. Labeled scores join the ID moments with weight 1.
// A component whose unlabeled mass is below kMinComponentMass keeps its
// parameters for this step.
BetaMixtureModel imm_batch_step(const BetaMixtureModel& model,
                                std::span<const double> unlabeled_scores,
                                std::span<const double> labeled_scores);

struct ReferenceFit {
  BetaMixtureModel model;
  std::size_t iterations = 0;
  bool converged = false;
  double final_change = 0.0;
};

// Full-data iterated method of moments: E-step and MM-step on the whole score
// list until the largest parameter change is below `tol`. On non-convergence
// the iterate with the highest mixture log-likelihood is returned.
// Requires at least 10 scores.
ReferenceFit fit_reference(std::span<const double> scores,
                           std::span<const double> labeled_scores, double pi,
                           std::size_t max_iters = 1000, double tol = 1e-8,
                           BetaMixtureModel init = {});

// Mixture log-likelihood of unlabeled scores (clamped).
double mixture_log_likelihood(const BetaMixtureModel& model,
                              std::span<const double> scores);

}  // namespace osslab

#endif  // OSSLAB_BETAMIX_HPP_
