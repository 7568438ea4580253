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

#include "osslab/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "osslab/errors.hpp"

namespace osslab {

void Schedule::validate() const {
  if (!(eta0 > 0.0) || !std::isfinite(eta0)) throw ConfigError("eta0 must be positive");
  if (total_steps < 1) throw ConfigError("total_steps must be >= 1");
  if (warmup_steps < 0 || warmup_steps > total_steps) {
    throw ConfigError("warmup_steps must lie in [0, total_steps]");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
}

double lr(const Schedule& s, std::int64_t k) {
  if (k < 0 || k > s.total_steps) {
    throw std::out_of_range(fmt::format("lr: step {} outside [0, {}]", k, s.total_steps));
  }
  if (k < s.warmup_steps) return s.eta0;
  const double span = static_cast<double>(s.total_steps - s.warmup_steps);
  if (span <= 0.0) return s.eta0;
  const double progress = static_cast<double>(k - s.warmup_steps) / span;
  return s.eta0 * std::cos(s.gamma * std::numbers::pi * progress / 2.0);
}

OptimizerState::OptimizerState(const MlpParams& params, double momentum, double ema_momentum)
    : velocity(params.shape()),
      momentum(momentum),
      ema_params(params),
      ema_momentum(ema_momentum) {
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(ema_momentum >= 0.0 && ema_momentum <= 1.0)) {
    throw ConfigError("ema_momentum must lie in [0, 1]");
  }
}

void sgd_step(MlpParams& params, const MlpParams& grads, OptimizerState& state, double lr) {
  auto theta = params.flat();
  const auto g = grads.flat();
  auto v = state.velocity.flat();
  if (g.size() != theta.size() || v.size() != theta.size()) {
    throw std::invalid_argument("sgd_step: shape mismatch");
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) {
      throw NumericalError(fmt::format("non-finite gradient at parameter {}", i));
    }
  }
  const double m = state.momentum;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    v[i] = m * v[i] + g[i];
    theta[i] -= lr * (m * v[i] + g[i]);
  }
}

void ema_update(OptimizerState& state, const MlpParams& params) {
  auto shadow = state.ema_params.flat();
  const auto theta = params.flat();
  if (shadow.size() != theta.size()) throw std::invalid_argument("ema_update: shape mismatch");
  const double a = state.ema_momentum;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    shadow[i] = a * shadow[i] + (1.0 - a) * theta[i];
  }
}

}  // namespace osslab
