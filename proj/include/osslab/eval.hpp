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

#ifndef OSSLAB_EVAL_HPP_
#define OSSLAB_EVAL_HPP_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "osslab/betamix.hpp"
#include "osslab/data.hpp"
#include "osslab/nn.hpp"
#include "osslab/subspace.hpp"

namespace osslab {

// Fraction of columns whose argmax (lowest index on ties) equals the label.
double accuracy(const Eigen::MatrixXd& probs, std::span<const int> labels);

// P(ID score > OOD score) + 0.5 P(tie), from mid-rank statistics.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

struct EvalReport {
  double closed_set_accuracy = 0.0;
  double auroc = 0.0;  // for `score_kind`
  ScoreKind score_kind = ScoreKind::Subspace;
  std::size_t num_id = 0;
  std::size_t num_ood = 0;
  std::int64_t step = 0;
  std::map<ScoreKind, double> auroc_by_kind;
};

// Scores of every test sample under one parameter snapshot.
struct TestScores {
  Eigen::MatrixXd id_probs;
  std::vector<int> id_labels;
  std::map<ScoreKind, std::vector<double>> id;
  std::map<ScoreKind, std::vector<double>> ood;
};

TestScores score_test_sets(const MlpParams& params, const OpenSetDataset& dataset,
                           const ClassMeanTable& table, const IdSubspaceBasis& basis);

// Accuracy on test_id and AUROC (test_id vs test_ood) for every score kind.
EvalReport evaluate(const MlpParams& params, const OpenSetDataset& dataset,
                    const ClassMeanTable& table, const IdSubspaceBasis& basis,
                    ScoreKind primary, std::int64_t step);

inline constexpr int kSnapshotBins = 64;

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::int64_t> counts;

  std::int64_t total() const;
};

// Equal-width histogram over [lo, hi]; values outside are clamped into the
// end bins.
Histogram histogram(std::span<const double> values, int bins, double lo, double hi);

struct ScoreSnapshot {
  ScoreKind kind = ScoreKind::Subspace;
  std::int64_t step = 0;
  std::vector<double> scores;
  std::vector<std::uint8_t> is_id;
  Histogram id_hist;
  Histogram ood_hist;
  BetaMixtureModel model;
};

// Raw (score, is_id) rows for a sample list plus 64-bin ID/OOD histograms.
// Subspace scores are binned over [0, 1], other kinds over their observed
// range.
ScoreSnapshot score_snapshot(const MlpParams& params, const std::vector<Sample>& samples,
                             const ClassMeanTable& table, const IdSubspaceBasis& basis,
                             const BetaMixtureModel& model, ScoreKind kind,
                             std::int64_t step);

// Score dump:
//   # osslab-scores v1
//   # kind=<kind> step=<step> alpha_id=.. beta_id=.. alpha_ood=.. beta_ood=.. pi=..
//   score is_id
//   <score> <0|1>
// then one "# hist <id|ood> lo hi c_0 ... c_63" line per histogram.
void write_score_snapshot(std::ostream& out, const ScoreSnapshot& snapshot);
ScoreSnapshot read_score_snapshot(std::istream& in);

}  // namespace osslab

#endif  // OSSLAB_EVAL_HPP_
