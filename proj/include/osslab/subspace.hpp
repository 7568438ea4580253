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

#ifndef OSSLAB_SUBSPACE_HPP_
#define OSSLAB_SUBSPACE_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace osslab {

// EMA feature means of the labeled classes; column c of `means` is c_c.
struct ClassMeanTable {
  Eigen::MatrixXd means;          // feature_dim x num_classes
  std::vector<bool> initialized;  // per class
  double momentum = 0.999;

  ClassMeanTable() = default;
  ClassMeanTable(int feature_dim, int num_classes, double momentum);

  int feature_dim() const { return static_cast<int>(means.rows()); }
  int num_classes() const { return static_cast<int>(means.cols()); }
  int num_initialized() const;
};

// Per-class EMA update from labeled features (columns of `features`).
// A class seen for the first time is set to its batch mean; classes absent
// from the batch are left alone.
void update_class_means(ClassMeanTable& table, const Eigen::MatrixXd& features,
                        std::span<const int> labels);

// Orthonormal basis Q (feature_dim x rank) of the span of the class means.
struct IdSubspaceBasis {
  Eigen::MatrixXd q;

  int rank() const { return static_cast<int>(q.cols()); }
  int dim() const { return static_cast<int>(q.rows()); }
  bool empty() const { return q.cols() == 0; }
};

inline constexpr double kRankTolerance = 1e-10;

// Householder QR with column pivoting of the initialized means. Trailing
// columns whose pivot |R_jj| falls below kRankTolerance * |R_11| are dropped.
// Throws std::logic_error when no class mean is initialized.
IdSubspaceBasis compute_basis(const ClassMeanTable& table);

// Cosine of the angle between z and the subspace: ||Q^T z|| / ||z||, which is
// proj.z / (||proj|| ||z||) with proj = Q Q^T z. Returns 0 when z is orthogonal
// to the subspace and nullopt for a zero feature vector.
std::optional<double> subspace_score(const Eigen::VectorXd& z,
                                     const IdSubspaceBasis& basis);

// Gradient of subspace_score w.r.t. z with Q held constant. Zero where the
// score is not differentiable (z = 0 or Q^T z = 0).
Eigen::VectorXd subspace_score_gradient(const Eigen::VectorXd& z,
                                        const IdSubspaceBasis& basis);

// Scores for every column of `features`; degenerate features score 0.
std::vector<double> subspace_scores(const Eigen::MatrixXd& features,
                                    const IdSubspaceBasis& basis);

enum class ScoreKind {
  Subspace,
  MinEuclidToMean,
  ResidualToSubspace,
  MaxCosineToMean,
  MSP,
  Energy,
  MaxLogit,
};

inline constexpr ScoreKind kAllScoreKinds[] = {
    ScoreKind::Subspace, ScoreKind::MinEuclidToMean, ScoreKind::ResidualToSubspace,
    ScoreKind::MaxCosineToMean, ScoreKind::MSP, ScoreKind::Energy,
    ScoreKind::MaxLogit};

std::string to_string(ScoreKind kind);
ScoreKind score_kind_from_string(const std::string& name);
bool needs_logits(ScoreKind kind);

// Free energy E(x) = -log sum_y exp(logit_y).
double energy(const Eigen::VectorXd& logits);

// ID score of one sample; higher always means "more ID". The energy score is
// the negated free energy. Throws std::invalid_argument when a logit-based
// kind is requested without logits.
double alt_score(ScoreKind kind, const Eigen::VectorXd& z,
                 const Eigen::VectorXd* logits, const ClassMeanTable& table,
                 const IdSubspaceBasis& basis);

}  // namespace osslab

#endif  // OSSLAB_SUBSPACE_HPP_
