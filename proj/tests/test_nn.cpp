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
#include <sstream>

#include "osslab/errors.hpp"
#include "osslab/nn.hpp"
#include "test_util.hpp"

namespace osslab {
namespace {

using testing::gaussian;
using testing::random_params;
using testing::tiny_shape;

TEST(Forward, ZeroWeightsGiveUniformProbabilities) {
  const MlpShape shape = tiny_shape();
  const MlpParams p(shape);
  Rng rng(1);
  const auto t = forward(p, gaussian(5, 4, rng));
  EXPECT_TRUE(t.logits.isZero(0.0));
  EXPECT_TRUE(t.probs.isApprox(Eigen::MatrixXd::Constant(3, 4, 1.0 / 3.0), 1e-15));
}

TEST(Forward, SingleIdentityLayerPassesInputThrough) {
  MlpShape shape;
  shape.input_dim = 4;
  shape.hidden = {};
  shape.feature_dim = 4;
  shape.num_classes = 2;
  MlpParams p(shape);
  p.backbone_weight(0) = Eigen::MatrixXd::Identity(4, 4);
  Rng rng(2);
  const Eigen::MatrixXd x = gaussian(4, 3, rng);
  EXPECT_EQ(forward(p, x).features, x);
}

TEST(Forward, ProbabilitiesSumToOne) {
  Rng rng(3);
  const MlpParams p = random_params(tiny_shape(), rng);
  const auto t = forward(p, gaussian(5, 100, rng, 3.0));
  for (Eigen::Index i = 0; i < 100; ++i) EXPECT_NEAR(t.probs.col(i).sum(), 1.0, 1e-9);
}

TEST(Forward, VectorAndBatchAgree) {
  Rng rng(4);
  const MlpParams p = random_params(tiny_shape(), rng);
  const Eigen::MatrixXd x = gaussian(5, 3, rng);
  const auto batch = forward(p, x);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const auto one = forward(p, Eigen::VectorXd(x.col(i)));
    EXPECT_TRUE(one.logits.col(0).isApprox(batch.logits.col(i), 1e-14));
  }
}

TEST(Forward, NonFiniteInputIsANumericalError) {
  Rng rng(5);
  const MlpParams p = random_params(tiny_shape(), rng);
  Eigen::MatrixXd x = gaussian(5, 2, rng);
  x(0, 1) = std::nan("");
  EXPECT_THROW(forward(p, x), NumericalError);
}

TEST(Softmax, StableForLargeLogits) {
  Eigen::MatrixXd logits(2, 1);
  logits << 1000.0, 0.0;
  const auto p = softmax(logits);
  EXPECT_DOUBLE_EQ(p(0, 0), 1.0);
  EXPECT_TRUE(std::isfinite(p(1, 0)));
}

TEST(Backward, ZeroUpstreamGivesZeroGradient) {
  Rng rng(6);
  const MlpParams p = random_params(tiny_shape(), rng);
  const auto t = forward(p, gaussian(5, 3, rng));
  const Eigen::MatrixXd zf = Eigen::MatrixXd::Zero(4, 3), zl = Eigen::MatrixXd::Zero(3, 3);
  MlpParams g(p.shape());
  backward(p, t, {&zf, &zl, &zf}, g);
  for (double v : g.flat()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, HalfSquaredLogitsBiasGradientIsLogitSum) {
  Rng rng(7);
  const MlpParams p = random_params(tiny_shape(), rng);
  const auto t = forward(p, gaussian(5, 1, rng));
  MlpParams g(p.shape());
  backward(p, t, {.logits = &t.logits}, g);
  EXPECT_TRUE(Eigen::VectorXd(g.head_bias()).isApprox(t.logits.col(0), 1e-14));
}

TEST(Backward, ShapeMismatchIsRejected) {
  Rng rng(8);
  const MlpParams p = random_params(tiny_shape(), rng);
  const auto t = forward(p, gaussian(5, 3, rng));
  const Eigen::MatrixXd wrong = Eigen::MatrixXd::Zero(3, 2);
  MlpParams g(p.shape());
  EXPECT_THROW(backward(p, t, {.logits = &wrong}, g), std::invalid_argument);
}

// Loss mixing all three outputs with fixed random upstream weights.
double mixed_loss(const MlpParams& params, MlpParams* grad, const Eigen::MatrixXd& x,
                  const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& c) {
  const auto t = forward(params, x);
  const Eigen::MatrixXd h = project(params, t.features);
  const double value = 0.5 * (a.cwiseProduct(t.features).squaredNorm()) +
                       (b.cwiseProduct(t.logits)).sum() + 0.25 * (c.cwiseProduct(h)).squaredNorm();
  if (grad != nullptr) {
    const Eigen::MatrixXd df = a.cwiseProduct(a).cwiseProduct(t.features);
    const Eigen::MatrixXd dl = b;
    const Eigen::MatrixXd dh = 0.5 * c.cwiseProduct(c).cwiseProduct(h);
    backward(params, t, {&df, &dl, &dh}, *grad);
  }
  return value;
}

TEST(Backward, MatchesFiniteDifferences) {
  for (auto act : {Activation::Tanh, Activation::Identity}) {
    Rng rng(9);
    MlpShape shape = tiny_shape();
    shape.activation = act;
    const MlpParams p = random_params(shape, rng);
    const Eigen::MatrixXd x = gaussian(5, 4, rng), a = gaussian(4, 4, rng), b = gaussian(3, 4, rng),
                          c = gaussian(4, 4, rng);
    const auto report = grad_check(
        p, [&](const MlpParams& q, MlpParams* g) { return mixed_loss(q, g, x, a, b, c); }, 1e-4, rng);
    EXPECT_TRUE(report.passed) << report.max_rel_error << " at " << report.worst_index;
    EXPECT_EQ(report.checked, p.size() < 200 ? p.size() : 200u);
  }
}

TEST(GradCheck, QuadraticIsExact) {
  Rng rng(10);
  MlpShape shape;  // default size, > 200 parameters
  const MlpParams p = random_params(shape, rng);
  const auto report = grad_check(
      p,
      [](const MlpParams& q, MlpParams* g) {
        double v = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) {
          v += 0.5 * q.flat()[i] * q.flat()[i];
          if (g) g->flat()[i] += q.flat()[i];
        }
        return v;
      },
      1e-6, rng);
  EXPECT_TRUE(report.passed) << report.max_rel_error;
  EXPECT_GE(report.checked, 200u);
}

TEST(GradCheck, DetectsAWrongGradient) {
  Rng rng(11);
  const MlpParams p = random_params(tiny_shape(), rng);
  const auto report = grad_check(
      p,
      [](const MlpParams& q, MlpParams* g) {
        double v = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) {
          v += q.flat()[i] * q.flat()[i];
          if (g) g->flat()[i] += q.flat()[i];  // off by a factor of two
        }
        return v;
      },
      1e-4, rng);
  EXPECT_FALSE(report.passed);
}

TEST(StopGradient, ConstantOutputMatchesFrozenCopy) {
  // A loss on logits of x1 plus a cosine-free dot of h(z2) with a frozen z1:
  // marking z1 constant must equal literally substituting a frozen copy.
  Rng rng(12);
  const MlpParams p = random_params(tiny_shape(), rng);
  const Eigen::MatrixXd x1 = gaussian(5, 3, rng), x2 = gaussian(5, 3, rng);
  const auto t1 = forward(p, x1);
  const auto t2 = forward(p, x2);
  const Eigen::MatrixXd frozen = t1.features;
  MlpParams g(p.shape());
  const Eigen::MatrixXd up = frozen;  // d/dh of sum(h(z2) .* frozen)
  backward(p, t2, {.projection = &up}, g);
  backward(p, t1, {}, g);  // z1 marked constant: nothing flows

  const auto report = grad_check(
      p,
      [&](const MlpParams& q, MlpParams* gg) {
        const auto tt = forward(q, x2);
        const Eigen::MatrixXd h = project(q, tt.features);
        if (gg) backward(q, tt, {.projection = &up}, *gg);
        return h.cwiseProduct(frozen).sum();
      },
      1e-6, rng);
  EXPECT_TRUE(report.passed);
  MlpParams reference(p.shape());
  const auto tt = forward(p, x2);
  backward(p, tt, {.projection = &up}, reference);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g.flat()[i], reference.flat()[i]);
}

TEST(Params, GlorotBoundsAndZeroBiases) {
  Rng rng(13);
  const MlpShape shape;
  const MlpParams p = MlpParams::glorot(shape, rng);
  const double a0 = std::sqrt(6.0 / (shape.input_dim + shape.hidden[0]));
  EXPECT_LE(p.backbone_weight(0).cwiseAbs().maxCoeff(), a0);
  EXPECT_TRUE(Eigen::VectorXd(p.backbone_bias(0)).isZero(0.0));
  EXPECT_EQ(p.projection_weight().rows(), shape.feature_dim);
  EXPECT_EQ(p.projection_weight().cols(), shape.feature_dim);
}

TEST(Params, ShapeNeedsEnoughFeatures) {
  MlpShape shape = tiny_shape();
  shape.feature_dim = 2;
  EXPECT_THROW(shape.validate(), ConfigError);
}

TEST(Params, TextRoundTripIsExact) {
  Rng rng(14);
  const MlpParams p = random_params(tiny_shape(), rng);
  std::stringstream io;
  write_params(io, p);
  const MlpParams back = read_params(io);
  EXPECT_TRUE(back.shape() == p.shape());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(back.flat()[i], p.flat()[i]);
}

TEST(Params, ReadRejectsTruncatedInput) {
  std::stringstream io("osslab-params v1\nshape 5 1 7 4 3 tanh\n0.1 0.2\n");
  EXPECT_THROW(read_params(io), FormatError);
}

}  // namespace
}  // namespace osslab
