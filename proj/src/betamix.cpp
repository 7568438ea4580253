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

#include "osslab/betamix.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

#include "osslab/errors.hpp"

namespace osslab {

double BetaParams::variance() const {
  const double s = alpha + beta;
  return alpha * beta / (s * s * (s + 1.0));
}

void BetaMixtureModel::validate() const {
  auto ok = [](const BetaParams& p) {
    return p.alpha > 0.0 && p.beta > 0.0 && std::isfinite(p.alpha) && std::isfinite(p.beta);
  };
  if (!ok(id) || !ok(ood)) throw ConfigError("Beta parameters must be positive and finite");
  if (!(pi > 0.0 && pi < 1.0)) throw ConfigError("pi must lie strictly inside (0, 1)");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be >= 0");
  if (!(lambda_ema >= 0.0 && lambda_ema <= 1.0)) {
    throw ConfigError("Beta EMA momentum must lie in [0, 1]");
  }
}

double clamp_score(double s) { return std::clamp(s, kScoreClamp, 1.0 - kScoreClamp); }

double log_beta_pdf(const BetaParams& p, double s) {
  if (!(s > 0.0 && s < 1.0)) throw std::domain_error("beta_pdf: s must lie in (0, 1)");
  const double log_norm =
      std::lgamma(p.alpha + p.beta) - std::lgamma(p.alpha) - std::lgamma(p.beta);
  return log_norm + (p.alpha - 1.0) * std::log(s) + (p.beta - 1.0) * std::log1p(-s);
}

double beta_pdf(const BetaParams& p, double s) { return std::exp(log_beta_pdf(p, s)); }

MomentPair weighted_moments(std::span<const double> scores,
                            std::span<const double> weights) {
  if (scores.size() != weights.size()) {
    throw std::invalid_argument("weighted_moments: length mismatch");
  }
  double total = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    total += weights[i];
    acc += weights[i] * scores[i];
  }
  if (!(total > 0.0)) throw std::domain_error("weighted_moments: component empty");
  MomentPair m;
  m.mean = acc / total;
  double sq = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double d = scores[i] - m.mean;
    sq += weights[i] * d * d;
  }
  m.variance = sq / total;
  return m;
}

MomFit method_of_moments(const MomentPair& m) {
  const double mean = std::clamp(m.mean, kScoreClamp, 1.0 - kScoreClamp);
  MomFit fit;
  const double k = m.variance > 0.0 ? mean * (1.0 - mean) / m.variance - 1.0
                                    : std::numeric_limits<double>::infinity();
  double a = mean * k;
  double b = (1.0 - mean) * k;
  if (!(k > 0.0) || std::min(a, b) < kBetaParamFloor) {
    // Smallest admissible pair with the same mean.
    const double scale = kBetaParamFloor / std::min(mean, 1.0 - mean);
    a = mean * scale;
    b = (1.0 - mean) * scale;
    fit.clamped = true;
  } else if (std::max(a, b) > kBetaParamCeiling) {
    const double scale = kBetaParamCeiling / std::max(mean, 1.0 - mean);
    a = mean * scale;
    b = (1.0 - mean) * scale;
    fit.clamped = true;
  }
  fit.params = {a, b};
  return fit;
}

double posterior_id(const BetaMixtureModel& model, double s, bool regularized) {
  const double log_id = std::log(model.pi) + log_beta_pdf(model.id, s);
  const double log_ood = std::log1p(-model.pi) + log_beta_pdf(model.ood, s);
  if (!regularized || model.epsilon == 0.0) {
    if (std::isinf(log_id) && std::isinf(log_ood)) {
      std::clog << "osslab: both Beta densities vanish at s=" << s
                << "; using the prior\n";
      return model.pi;
    }
    // pi p_id / (pi p_id + (1 - pi) p_ood), evaluated as a logistic.
    return 1.0 / (1.0 + std::exp(log_ood - log_id));
  }
  const double a = std::exp(log_id);
  const double b = std::exp(log_ood);
  const double denom = a + b + model.epsilon;
  return denom > 0.0 ? a / denom : model.pi;
}

namespace {

struct MmEstimate {
  MomFit id;
  MomFit ood;
  bool id_updated = false;
  bool ood_updated = false;
};

// One E-step plus MM-step. The returned fits are only meaningful where the
// corresponding *_updated flag is set.
MmEstimate mm_step(const BetaMixtureModel& model, std::span<const double> unlabeled,
                   std::span<const double> labeled) {
  std::vector<double> s(unlabeled.size());
  std::vector<double> w_id(unlabeled.size()), w_ood(unlabeled.size());
  double id_mass = 0.0, ood_mass = 0.0;
  for (std::size_t i = 0; i < unlabeled.size(); ++i) {
    s[i] = clamp_score(unlabeled[i]);
    w_id[i] = posterior_id(model, s[i], /*regularized=*/false);
    w_ood[i] = 1.0 - w_id[i];
    id_mass += w_id[i];
    ood_mass += w_ood[i];
  }

  MmEstimate est;
  if (id_mass >= kMinComponentMass) {
    std::vector<double> pooled_s(s);
    std::vector<double> pooled_w(w_id);
    for (double sl : labeled) {
      pooled_s.push_back(clamp_score(sl));
      pooled_w.push_back(1.0);
    }
    est.id = method_of_moments(weighted_moments(pooled_s, pooled_w));
    est.id_updated = true;
  }
  if (ood_mass >= kMinComponentMass) {
    est.ood = method_of_moments(weighted_moments(s, w_ood));
    est.ood_updated = true;
  }
  return est;
}

double ema(double lambda, double old_value, double new_value) {
  return lambda * old_value + (1.0 - lambda) * new_value;
}

double max_change(const BetaMixtureModel& a, const BetaMixtureModel& b) {
  return std::max({std::abs(a.id.alpha - b.id.alpha), std::abs(a.id.beta - b.id.beta),
                   std::abs(a.ood.alpha - b.ood.alpha),
                   std::abs(a.ood.beta - b.ood.beta)});
}

}  // namespace

BetaMixtureModel imm_batch_step(const BetaMixtureModel& model,
                                std::span<const double> unlabeled_scores,
                                std::span<const double> labeled_scores) {
  const MmEstimate est = mm_step(model, unlabeled_scores, labeled_scores);
  BetaMixtureModel next = model;
  const double lambda = model.lambda_ema;
  if (est.id_updated) {
    next.id.alpha = ema(lambda, model.id.alpha, est.id.params.alpha);
    next.id.beta = ema(lambda, model.id.beta, est.id.params.beta);
  }
  if (est.ood_updated) {
    next.ood.alpha = ema(lambda, model.ood.alpha, est.ood.params.alpha);
    next.ood.beta = ema(lambda, model.ood.beta, est.ood.params.beta);
  }
  return next;
}

double mixture_log_likelihood(const BetaMixtureModel& model,
                              std::span<const double> scores) {
  double ll = 0.0;
  for (double raw : scores) {
    const double s = clamp_score(raw);
    const double a = std::log(model.pi) + log_beta_pdf(model.id, s);
    const double b = std::log1p(-model.pi) + log_beta_pdf(model.ood, s);
    const double m = std::max(a, b);
    ll += m + std::log(std::exp(a - m) + std::exp(b - m));
  }
  return ll;
}

ReferenceFit fit_reference(std::span<const double> scores,
                           std::span<const double> labeled_scores, double pi,
                           std::size_t max_iters, double tol, BetaMixtureModel init) {
  if (scores.size() < 10) throw std::invalid_argument("fit_reference: need >= 10 scores");
  ReferenceFit fit;
  BetaMixtureModel current = init;
  current.pi = pi;
  current.validate();

  BetaMixtureModel best = current;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < max_iters; ++it) {
    const MmEstimate est = mm_step(current, scores, labeled_scores);
    BetaMixtureModel next = current;
    if (est.id_updated) next.id = est.id.params;
    if (est.ood_updated) next.ood = est.ood.params;
    fit.final_change = max_change(current, next);
    current = next;
    fit.iterations = it + 1;
    const double ll = mixture_log_likelihood(current, scores);
    if (ll > best_ll) {
      best_ll = ll;
      best = current;
    }
    if (fit.final_change < tol) {
      fit.converged = true;
      break;
    }
  }
  fit.model = fit.converged ? current : best;
  return fit;
}

}  // namespace osslab
