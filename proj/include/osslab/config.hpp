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

#ifndef OSSLAB_CONFIG_HPP_
#define OSSLAB_CONFIG_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "osslab/betamix.hpp"
#include "osslab/data.hpp"
#include "osslab/decide.hpp"
#include "osslab/losses.hpp"
#include "osslab/nn.hpp"
#include "osslab/optim.hpp"
#include "osslab/subspace.hpp"

namespace osslab {

// Every knob of a training run. Serialized as flat "key = value" lines; see
// config_keys() for the key list. Unknown keys are rejected.
struct TrainingConfig {
  DatasetSpec data;
  // Negative jitter/drop values mean "derive from cluster_spread".
  double sigma_weak = -1.0;
  double sigma_strong = -1.0;
  double p_drop = 0.2;

  std::vector<int> hidden = {64, 64};
  int feature_dim = 16;
  Activation activation = Activation::Tanh;

  LossWeights weights;
  bool drop_self = false;
  bool drop_sub = false;

  Schedule schedule;
  double sgd_momentum = 0.9;
  int batch_size = 32;
  int mu = 4;

  // Initial Beta parameters, pi, epsilon, lambda. The EMA momentum is shorter
  // than the library default to match the short default schedule.
  BetaMixtureModel beta{{10.0, 2.0}, {2.0, 10.0}, 0.5, 0.1, 0.99};
  double lambda_means = 0.999;
  double ema_momentum = 0.999;

  ScoreKind score_kind = ScoreKind::Subspace;
  DecisionRule decision;

  std::int64_t eval_every = 1000;
  std::uint64_t seed = 0;

  // Throws ConfigError describing the first violated invariant.
  void validate() const;

  MlpShape network_shape() const;
  AugmentConfig augment() const;
  // Dataset spec with its seed derived from the master seed.
  DatasetSpec dataset_spec() const;

  // Sets one key from its text form; throws ConfigError for unknown keys or
  // unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
};

const std::vector<std::string>& config_keys();

// Canonical "key = value" lines in config_keys() order.
void write_config(std::ostream& out, const TrainingConfig& config);
// Reads "key = value" lines over the defaults; '#' starts a comment.
TrainingConfig read_config(std::istream& in);
TrainingConfig load_config(const std::string& path);

// Hash of every key except the seed, as 16 hex digits.
std::string config_hash(const TrainingConfig& config);

}  // namespace osslab

#endif  // OSSLAB_CONFIG_HPP_
