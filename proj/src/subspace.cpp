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

#include "osslab/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "osslab/errors.hpp"

namespace osslab {

ClassMeanTable::ClassMeanTable(int feature_dim, int num_classes, double momentum)
    : means(Eigen::MatrixXd::Zero(feature_dim, num_classes)),
      initialized(static_cast<std::size_t>(num_classes), false),
      momentum(momentum) {
  if (!(momentum >= 0.0 && momentum <= 1.0)) {
    throw ConfigError("class-mean momentum must lie in [0, 1]");
  }
}

int ClassMeanTable::num_initialized() const {
  return static_cast<int>(std::count(initialized.begin(), initialized.end(), true));
}

void update_class_means(ClassMeanTable& table, const Eigen::MatrixXd& features,
                        std::span<const int> labels) {
  if (features.cols() != static_cast<Eigen::Index>(labels.size()) ||
      features.rows() != table.feature_dim()) {
    throw std::invalid_argument("update_class_means: shape mismatch");
  }
  const int C = table.num_classes();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(table.feature_dim(), C);
  std::vector<int> counts(C, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= C) throw std::invalid_argument("update_class_means: bad label");
    sums.col(y) += features.col(static_cast<Eigen::Index>(i));
    ++counts[y];
  }
  const double lambda = table.momentum;
  for (int c = 0; c < C; ++c) {
    if (counts[c] == 0) continue;
    const Eigen::VectorXd batch_mean = sums.col(c) / counts[c];
    if (table.initialized[c]) {
      table.means.col(c) = lambda * table.means.col(c) + (1.0 - lambda) * batch_mean;
    } else {
      table.means.col(c) = batch_mean;
      table.initialized[c] = true;
    }
  }
}

IdSubspaceBasis compute_basis(const ClassMeanTable& table) {
  const int k = table.num_initialized();
  if (k == 0) throw std::logic_error("subspace undefined: no class mean initialized");
  const int d = table.feature_dim();
  Eigen::MatrixXd a(d, k);
  for (int c = 0, j = 0; c < table.num_classes(); ++c) {
    if (table.initialized[c]) a.col(j++) = table.means.col(c);
  }

  // Householder QR with column pivoting on the largest remaining column norm.
  const int steps = std::min(d, k);
  std::vector<Eigen::VectorXd> reflectors;
  reflectors.reserve(steps);
  double first_pivot = 0.0;
  int rank = 0;
  for (int j = 0; j < steps; ++j) {
    int best = j;
    double best_norm = -1.0;
    for (int c = j; c < k; ++c) {
      const double n = a.col(c).tail(d - j).norm();
      if (n > best_norm) {
        best_norm = n;
        best = c;
      }
    }
    a.col(j).swap(a.col(best));
    if (j == 0) first_pivot = best_norm;
    if (!(best_norm > kRankTolerance * first_pivot) || best_norm == 0.0) break;

    Eigen::VectorXd v = a.col(j).tail(d - j);
    const double alpha = v[0] >= 0.0 ? -best_norm : best_norm;
    v[0] -= alpha;
    const double vnorm = v.norm();
    if (vnorm > 0.0) {
      v /= vnorm;
      auto trailing = a.block(j, j, d - j, k - j);
      trailing -= 2.0 * v * (v.transpose() * trailing);
    }
    reflectors.push_back(std::move(v));
    ++rank;
  }

  // Q = H_0 H_1 ... H_{r-1} applied to the first r unit vectors.
  IdSubspaceBasis basis;
  basis.q = Eigen::MatrixXd::Identity(d, rank);
  for (int j = rank - 1; j >= 0; --j) {
    const auto& v = reflectors[j];
    auto rows = basis.q.bottomRows(d - j);
    rows -= 2.0 * v * (v.transpose() * rows);
  }
  return basis;
}

std::optional<double> subspace_score(const Eigen::VectorXd& z,
                                     const IdSubspaceBasis& basis) {
  if (basis.empty()) throw std::logic_error("subspace_score: empty basis");
  const double z_norm = z.norm();
  if (!(z_norm > 0.0)) return std::nullopt;
  const double proj_norm = (basis.q.transpose() * z).norm();
  return std::clamp(proj_norm / z_norm, 0.0, 1.0);
}

Eigen::VectorXd subspace_score_gradient(const Eigen::VectorXd& z,
                                        const IdSubspaceBasis& basis) {
  const double z_norm = z.norm();
  const Eigen::VectorXd coeffs = basis.q.transpose() * z;
  const double proj_norm = coeffs.norm();
  if (!(z_norm > 0.0) || !(proj_norm > 0.0)) return Eigen::VectorXd::Zero(z.size());
  // s = ||Q^T z|| / ||z||
  return basis.q * coeffs / (proj_norm * z_norm) -
         (proj_norm / (z_norm * z_norm * z_norm)) * z;
}

std::vector<double> subspace_scores(const Eigen::MatrixXd& features,
                                    const IdSubspaceBasis& basis) {
  std::vector<double> out(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index i = 0; i < features.cols(); ++i) {
    out[static_cast<std::size_t>(i)] =
        subspace_score(features.col(i), basis).value_or(0.0);
  }
  return out;
}

std::string to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::Subspace: return "subspace";
    case ScoreKind::MinEuclidToMean: return "min_euclid_to_mean";
    case ScoreKind::ResidualToSubspace: return "residual_to_subspace";
    case ScoreKind::MaxCosineToMean: return "max_cosine_to_mean";
    case ScoreKind::MSP: return "msp";
    case ScoreKind::Energy: return "energy";
    case ScoreKind::MaxLogit: return "max_logit";
  }
  return "unknown";
}

ScoreKind score_kind_from_string(const std::string& name) {
  for (auto k : kAllScoreKinds) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown score kind '" + name + "'");
}

bool needs_logits(ScoreKind kind) {
  return kind == ScoreKind::MSP || kind == ScoreKind::Energy || kind == ScoreKind::MaxLogit;
}

double energy(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  return -(m + std::log((logits.array() - m).exp().sum()));
}

double alt_score(ScoreKind kind, const Eigen::VectorXd& z,
                 const Eigen::VectorXd* logits, const ClassMeanTable& table,
                 const IdSubspaceBasis& basis) {
  if (needs_logits(kind) && logits == nullptr) {
    throw std::invalid_argument("score kind " + to_string(kind) + " needs logits");
  }
  switch (kind) {
    case ScoreKind::Subspace:
      return subspace_score(z, basis).value_or(0.0);
    case ScoreKind::MinEuclidToMean: {
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < table.num_classes(); ++c) {
        if (table.initialized[c]) best = std::min(best, (z - table.means.col(c)).norm());
      }
      return -best;
    }
    case ScoreKind::ResidualToSubspace:
      return -(z - basis.q * (basis.q.transpose() * z)).norm();
    case ScoreKind::MaxCosineToMean: {
      double best = -1.0;
      const double zn = z.norm();
      for (int c = 0; c < table.num_classes(); ++c) {
        if (!table.initialized[c]) continue;
        const double cn = table.means.col(c).norm();
        if (zn > 0.0 && cn > 0.0) best = std::max(best, z.dot(table.means.col(c)) / (zn * cn));
      }
      return best;
    }
    case ScoreKind::MSP: {
      const double m = logits->maxCoeff();
      return 1.0 / (logits->array() - m).exp().sum();
    }
    case ScoreKind::Energy:
      return -energy(*logits);
    case ScoreKind::MaxLogit:
      return logits->maxCoeff();
  }
  return 0.0;
}

}  // namespace osslab
