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

#ifndef OSSLAB_TESTS_TEST_UTIL_HPP_
#define OSSLAB_TESTS_TEST_UTIL_HPP_

#include <random>

#include <Eigen/Dense>

#include "osslab/config.hpp"
#include "osslab/nn.hpp"
#include "osslab/rng.hpp"

namespace osslab::testing {

inline Eigen::MatrixXd gaussian(int rows, int cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = n(rng);
  }
  return m;
}

inline MlpShape tiny_shape() {
  MlpShape s;
  s.input_dim = 5;
  s.hidden = {7, 6};
  s.feature_dim = 4;
  s.num_classes = 3;
  return s;
}

// Glorot init plus small random biases, so no gradient is structurally zero.
inline MlpParams random_params(const MlpShape& shape, Rng& rng) {
  MlpParams p = MlpParams::glorot(shape, rng);
  std::normal_distribution<double> n(0.0, 0.3);
  for (int l = 0; l < p.num_backbone_layers(); ++l) {
    auto b = p.backbone_bias(l);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = n(rng);
  }
  auto hb = p.head_bias();
  for (Eigen::Index i = 0; i < hb.size(); ++i) hb[i] = n(rng);
  return p;
}

// Orthonormal D x r matrix.
inline Eigen::MatrixXd random_orthonormal(int d, int r, Rng& rng) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(d, r, rng));
  return qr.householderQ() * Eigen::MatrixXd::Identity(d, r);
}

// A run small enough for unit tests: a few hundred steps on a tiny dataset.
inline TrainingConfig small_config() {
  TrainingConfig c;
  c.data.input_dim = 8;
  c.data.num_id_classes = 3;
  c.data.num_ood_clusters = 3;
  c.data.samples_per_class = 60;
  c.data.labeled_per_class = 10;
  c.data.test_per_class = 30;
  c.hidden = {16};
  c.feature_dim = 6;
  c.batch_size = 8;
  c.mu = 2;
  c.schedule.total_steps = 60;
  c.schedule.warmup_steps = 20;
  c.eval_every = 20;
  c.seed = 7;
  return c;
}

}  // namespace osslab::testing

#endif  // OSSLAB_TESTS_TEST_UTIL_HPP_
