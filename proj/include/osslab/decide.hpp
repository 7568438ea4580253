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

#ifndef OSSLAB_DECIDE_HPP_
#define OSSLAB_DECIDE_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "osslab/rng.hpp"

namespace osslab {

// Binary ID/OOD assignment for one unlabeled batch; m_ood[i] == !m_id[i].
struct MaskBatch {
  std::vector<std::uint8_t> m_id;
  std::vector<std::uint8_t> m_ood;
  std::vector<double> p_id;  // probabilities the mask was drawn from

  std::size_t size() const { return m_id.size(); }
  double id_rate() const;
};

// m_id[i] = 1{p[i] >= X_i}, X_i ~ U(0, 1] independently. Throws
// std::domain_error if some p lies outside [0, 1].
MaskBatch sample_mask(std::span<const double> p_id, Rng& rng);

inline constexpr int kDefaultOtsuBins = 128;

// Classic Otsu on a histogram of `scores` over [0, 1] with `num_bins` equal
// bins. Returns the bin edge k / num_bins maximizing the between-class
// variance (lowest edge on ties). Identical scores return that score; when no
// edge separates anything the mean score is returned.
double otsu_threshold(std::span<const double> scores, int num_bins = kDefaultOtsuBins);

enum class DecisionKind { SampledMask, OtsuThreshold, DirectWeight };

std::string to_string(DecisionKind kind);
DecisionKind decision_kind_from_string(const std::string& name);

struct DecisionRule {
  DecisionKind kind = DecisionKind::SampledMask;
  // Otsu state: the EMA threshold and its momentum.
  double threshold = 0.5;
  double momentum = 0.999;
  int num_bins = kDefaultOtsuBins;
};

// What the losses consume. `id_weight[i]` is the ID mask (0/1) for the mask
// rules or p_id for DirectWeight; the subspace loss uses (1 - 2 w) as its
// sign/weight and the pseudo-label loss scales term i by w.
struct Decision {
  std::vector<double> id_weight;
  std::optional<MaskBatch> mask;
  std::optional<double> threshold;  // Otsu rule only

  std::size_t size() const { return id_weight.size(); }
  // Hash of id_weight, logged to prove both losses saw the same decision.
  std::uint64_t hash() const;
};

// Hash of a weight vector (bit patterns, order-sensitive).
std::uint64_t hash_weights(std::span<const double> weights);

// SampledMask draws from `posteriors`; OtsuThreshold moves the rule's EMA
// threshold toward otsu_threshold(scores) and thresholds the scores;
// DirectWeight passes the posteriors through as weights.
Decision decide(DecisionRule& rule, std::span<const double> scores,
                std::span<const double> posteriors, Rng& rng);

}  // namespace osslab

#endif  // OSSLAB_DECIDE_HPP_
