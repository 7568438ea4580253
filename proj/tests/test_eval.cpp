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

#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "osslab/errors.hpp"
#include "osslab/eval.hpp"
#include "test_util.hpp"

namespace osslab {
namespace {

double pairwise_auroc(const std::vector<double>& id, const std::vector<double>& ood) {
  double wins = 0.0;
  for (double a : id) {
    for (double b : ood) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  }
  return wins / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

TEST(Accuracy, Examples) {
  Eigen::MatrixXd p(3, 3);
  p << 0.8, 0.1, 0.2,
       0.1, 0.8, 0.2,
       0.1, 0.1, 0.6;
  EXPECT_EQ(accuracy(p, std::vector<int>{0, 1, 2}), 1.0);
  EXPECT_EQ(accuracy(p, std::vector<int>{1, 2, 0}), 0.0);
  // Ties go to the lowest index.
  const Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(4, 4, 0.25);
  EXPECT_EQ(accuracy(flat, std::vector<int>{0, 1, 2, 3}), 0.25);
}

TEST(Accuracy, UniformPredictionsAverageOneOverC) {
  Rng rng(1);
  const int c = 5, per = 20;
  const Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(c, c * per, 1.0 / c);
  std::vector<int> labels;
  for (int k = 0; k < c; ++k) labels.insert(labels.end(), per, k);
  double mean = 0.0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    std::vector<int> perm(c);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> permuted;
    for (int y : labels) permuted.push_back(perm[y]);
    mean += accuracy(flat, permuted) / trials;
  }
  EXPECT_NEAR(mean, 1.0 / c, 1e-12);  // balanced labels: exactly one class matches index 0
}

TEST(Auroc, Examples) {
  EXPECT_EQ(auroc(std::vector<double>{0.9, 0.8}, std::vector<double>{0.1, 0.2}), 1.0);
  EXPECT_EQ(auroc(std::vector<double>{0.5}, std::vector<double>{0.5}), 0.5);
  EXPECT_EQ(auroc(std::vector<double>{0.1}, std::vector<double>{0.5}), 0.0);
}

TEST(Auroc, EqualsPairwiseOracleWithTies) {
  Rng rng(2);
  for (int t = 0; t < 300; ++t) {
    std::uniform_int_distribution<int> size(1, 60), level(0, 9);
    std::vector<double> id(size(rng)), ood(size(rng));
    for (auto& x : id) x = level(rng) * 0.1;
    for (auto& x : ood) x = level(rng) * 0.1 - 0.05 * (t % 2);
    EXPECT_EQ(auroc(id, ood), pairwise_auroc(id, ood));
  }
}

TEST(Auroc, NullDistributionIsAHalf) {
  Rng rng(3);
  std::normal_distribution<double> n;
  std::vector<double> a(10000), b(10000);
  for (auto& x : a) x = n(rng);
  for (auto& x : b) x = n(rng);
  EXPECT_NEAR(auroc(a, b), 0.5, 0.02);
}

TEST(Auroc, InvariantUnderIncreasingTransforms) {
  Rng rng(4);
  std::normal_distribution<double> n;
  std::vector<double> a(300), b(200);
  for (auto& x : a) x = n(rng) + 0.5;
  for (auto& x : b) x = n(rng);
  std::vector<double> ea, eb;
  for (double x : a) ea.push_back(std::exp(3 * x) + 1);
  for (double x : b) eb.push_back(std::exp(3 * x) + 1);
  EXPECT_EQ(auroc(a, b), auroc(ea, eb));
}

TEST(Auroc, EmptyInputIsRejected) {
  EXPECT_THROW(auroc(std::vector<double>{}, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(HistogramTest, CountsEverySample) {
  const std::vector<double> v{-1.0, 0.0, 0.1, 0.5, 0.99, 1.0, 2.0};
  const auto h = histogram(v, 10, 0.0, 1.0);
  EXPECT_EQ(h.total(), 7);
  EXPECT_EQ(h.counts.front(), 2);  // -1 clamped, 0
  EXPECT_EQ(h.counts.back(), 3);   // 0.99, 1.0, 2.0 clamped
}

OpenSetDataset tiny_dataset() {
  DatasetSpec spec;
  spec.input_dim = 5;
  spec.num_id_classes = 3;
  spec.num_ood_clusters = 2;
  spec.samples_per_class = 30;
  spec.labeled_per_class = 5;
  spec.test_per_class = 10;
  spec.cluster_separation = 3.0;
  spec.seed = 4;
  return generate(spec);
}

struct Model {
  MlpParams params;
  ClassMeanTable table;
  IdSubspaceBasis basis;
};

Model tiny_model(const OpenSetDataset& ds) {
  Rng rng(5);
  Model m{testing::random_params(testing::tiny_shape(), rng), ClassMeanTable(4, 3, 0.9), {}};
  const auto view = training_view(ds);
  update_class_means(m.table, forward(m.params, view.labeled_x).features, view.labels);
  m.basis = compute_basis(m.table);
  return m;
}

TEST(Evaluate, ReportsEveryScoreKind) {
  const auto ds = tiny_dataset();
  const auto m = tiny_model(ds);
  const auto r = evaluate(m.params, ds, m.table, m.basis, ScoreKind::Energy, 17);
  EXPECT_EQ(r.step, 17);
  EXPECT_EQ(r.num_id, ds.test_id.size());
  EXPECT_EQ(r.num_ood, ds.test_ood.size());
  EXPECT_EQ(r.auroc_by_kind.size(), std::size(kAllScoreKinds));
  EXPECT_EQ(r.auroc, r.auroc_by_kind.at(ScoreKind::Energy));
  for (const auto& [kind, v] : r.auroc_by_kind) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  // Cross-check the subspace AUROC from raw scores.
  const auto scores = score_test_sets(m.params, ds, m.table, m.basis);
  EXPECT_EQ(r.auroc_by_kind.at(ScoreKind::Subspace),
            pairwise_auroc(scores.id.at(ScoreKind::Subspace), scores.ood.at(ScoreKind::Subspace)));
  EXPECT_EQ(r.closed_set_accuracy, accuracy(scores.id_probs, scores.id_labels));
}

TEST(Snapshot, InSpanFeaturesLandInTheTopBin) {
  // Identity network in D = input_dim: a basis spanning all of R^D puts every
  // score at 1.
  MlpShape shape;
  shape.input_dim = 3;
  shape.hidden = {};
  shape.feature_dim = 3;
  shape.num_classes = 3;
  MlpParams p(shape);
  p.backbone_weight(0) = Eigen::MatrixXd::Identity(3, 3);
  ClassMeanTable table(3, 3, 0.9);
  table.means = Eigen::MatrixXd::Identity(3, 3);
  table.initialized.assign(3, true);
  std::vector<Sample> samples;
  Rng rng(6);
  for (int i = 0; i < 20; ++i) samples.push_back({testing::gaussian(3, 1, rng), 0, true});
  const auto snap = score_snapshot(p, samples, table, compute_basis(table), {}, ScoreKind::Subspace, 3);
  EXPECT_EQ(snap.id_hist.total(), 20);
  EXPECT_EQ(snap.id_hist.counts.back(), 20);
  EXPECT_EQ(snap.ood_hist.total(), 0);
  EXPECT_EQ(snap.id_hist.counts.size(), static_cast<std::size_t>(kSnapshotBins));
}

TEST(Snapshot, RoundTripsAndIsReproducible) {
  const auto ds = tiny_dataset();
  const auto m = tiny_model(ds);
  BetaMixtureModel beta;
  beta.id = {12.5, 1.25};
  const auto a = score_snapshot(m.params, ds.unlabeled, m.table, m.basis, beta, ScoreKind::Subspace, 9);
  const auto b = score_snapshot(m.params, ds.unlabeled, m.table, m.basis, beta, ScoreKind::Subspace, 9);
  EXPECT_EQ(a.scores, b.scores);
  EXPECT_EQ(a.id_hist.total() + a.ood_hist.total(), static_cast<std::int64_t>(ds.unlabeled.size()));
  std::stringstream io;
  write_score_snapshot(io, a);
  const auto back = read_score_snapshot(io);
  EXPECT_EQ(back.scores, a.scores);
  EXPECT_EQ(back.is_id, a.is_id);
  EXPECT_EQ(back.step, 9);
  EXPECT_EQ(back.kind, ScoreKind::Subspace);
  EXPECT_EQ(back.model.id, beta.id);
  EXPECT_EQ(back.id_hist.counts, a.id_hist.counts);
  EXPECT_EQ(back.ood_hist.counts, a.ood_hist.counts);
}

TEST(Snapshot, ReadRejectsGarbage) {
  std::stringstream io("# something else\n");
  EXPECT_THROW(read_score_snapshot(io), FormatError);
}

}  // namespace
}  // namespace osslab
