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

#include "osslab/decide.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "osslab/errors.hpp"

namespace osslab {

double MaskBatch::id_rate() const {
  if (m_id.empty()) return 0.0;
  return static_cast<double>(std::accumulate(m_id.begin(), m_id.end(), 0)) /
         static_cast<double>(m_id.size());
}

MaskBatch sample_mask(std::span<const double> p_id, Rng& rng) {
  MaskBatch mask;
  mask.p_id.assign(p_id.begin(), p_id.end());
  mask.m_id.resize(p_id.size());
  mask.m_ood.resize(p_id.size());
  for (std::size_t i = 0; i < p_id.size(); ++i) {
    if (!(p_id[i] >= 0.0 && p_id[i] <= 1.0)) {
      throw std::domain_error("sample_mask: probability outside [0, 1]");
    }
    const double x = uniform_open_closed(rng);
    mask.m_id[i] = p_id[i] >= x ? 1 : 0;
    mask.m_ood[i] = 1 - mask.m_id[i];
  }
  return mask;
}

double otsu_threshold(std::span<const double> scores, int num_bins) {
  if (scores.empty()) throw std::invalid_argument("otsu_threshold: no scores");
  if (num_bins < 2) throw std::invalid_argument("otsu_threshold: need >= 2 bins");
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  if (*lo == *hi) return *lo;

  std::vector<double> count(num_bins, 0.0), sum(num_bins, 0.0);
  for (double s : scores) {
    const double c = std::clamp(s, 0.0, 1.0);
    const int bin = std::min(static_cast<int>(c * num_bins), num_bins - 1);
    count[bin] += 1.0;
    sum[bin] += c;
  }
  const double n = static_cast<double>(scores.size());
  const double total_sum = std::accumulate(sum.begin(), sum.end(), 0.0);

  // Edge k splits bins [0, k) from [k, num_bins).
  double best_var = 0.0;
  int best_edge = -1;
  double n0 = 0.0, s0 = 0.0;
  for (int k = 1; k < num_bins; ++k) {
    n0 += count[k - 1];
    s0 += sum[k - 1];
    const double n1 = n - n0;
    if (n0 == 0.0 || n1 == 0.0) continue;
    const double mu0 = s0 / n0;
    const double mu1 = (total_sum - s0) / n1;
    const double var = (n0 / n) * (n1 / n) * (mu0 - mu1) * (mu0 - mu1);
    if (var > best_var) {
      best_var = var;
      best_edge = k;
    }
  }
  if (best_edge < 0) return total_sum / n;
  return static_cast<double>(best_edge) / num_bins;
}

std::string to_string(DecisionKind kind) {
  switch (kind) {
    case DecisionKind::SampledMask: return "sampled";
    case DecisionKind::OtsuThreshold: return "otsu";
    case DecisionKind::DirectWeight: return "weighted";
  }
  return "unknown";
}

DecisionKind decision_kind_from_string(const std::string& name) {
  if (name == "sampled") return DecisionKind::SampledMask;
  if (name == "otsu") return DecisionKind::OtsuThreshold;
  if (name == "weighted") return DecisionKind::DirectWeight;
  throw ConfigError("unknown decision rule '" + name + "'");
}

std::uint64_t hash_weights(std::span<const double> weights) {
  std::uint64_t h = 0x6a09e667f3bcc908ULL ^ weights.size();
  for (double w : weights) h = mix64(h ^ std::bit_cast<std::uint64_t>(w));
  return h;
}

std::uint64_t Decision::hash() const { return hash_weights(id_weight); }

namespace {

Decision from_mask(MaskBatch mask) {
  Decision d;
  d.id_weight.assign(mask.m_id.begin(), mask.m_id.end());
  d.mask = std::move(mask);
  return d;
}

}  // namespace

Decision decide(DecisionRule& rule, std::span<const double> scores,
                std::span<const double> posteriors, Rng& rng) {
  switch (rule.kind) {
    case DecisionKind::SampledMask:
      return from_mask(sample_mask(posteriors, rng));
    case DecisionKind::OtsuThreshold: {
      if (!scores.empty()) {
        const double t = otsu_threshold(scores, rule.num_bins);
        rule.threshold = rule.momentum * rule.threshold + (1.0 - rule.momentum) * t;
      }
      MaskBatch mask;
      mask.p_id.assign(posteriors.begin(), posteriors.end());
      for (double s : scores) {
        const std::uint8_t id = s >= rule.threshold ? 1 : 0;
        mask.m_id.push_back(id);
        mask.m_ood.push_back(1 - id);
      }
      Decision d = from_mask(std::move(mask));
      d.threshold = rule.threshold;
      return d;
    }
    case DecisionKind::DirectWeight: {
      Decision d;
      d.id_weight.assign(posteriors.begin(), posteriors.end());
      return d;
    }
  }
  return {};
}

}  // namespace osslab
