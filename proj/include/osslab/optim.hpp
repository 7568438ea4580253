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

#ifndef OSSLAB_OPTIM_HPP_
#define OSSLAB_OPTIM_HPP_

#include <cstdint>

#include "osslab/nn.hpp"

namespace osslab {

// Constant learning rate for k < warmup_steps, then
// eta0 * cos(gamma * pi * (k - K_p) / (2 (K - K_p))).
struct Schedule {
  double eta0 = 0.03;
  std::int64_t total_steps = 20000;   // K
  std::int64_t warmup_steps = 2000;   // K_p
  double gamma = 7.0 / 8.0;

  void validate() const;
};

// Throws std::out_of_range unless 0 <= k <= K.
double lr(const Schedule& schedule, std::int64_t k);

struct OptimizerState {
  MlpParams velocity;
  double momentum = 0.9;
  MlpParams ema_params;
  double ema_momentum = 0.999;

  OptimizerState() = default;
  // Zero velocity; the shadow starts as a copy of `params`.
  OptimizerState(const MlpParams& params, double momentum, double ema_momentum);
};

// Nesterov momentum in the velocity form
//   v <- m v + g
//   theta <- theta - lr (m v + g)
// Throws NumericalError on non-finite gradients.
void sgd_step(MlpParams& params, const MlpParams& grads, OptimizerState& state, double lr);

// shadow <- ema_momentum * shadow + (1 - ema_momentum) * params
void ema_update(OptimizerState& state, const MlpParams& params);

}  // namespace osslab

#endif  // OSSLAB_OPTIM_HPP_
