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
#include <random>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "osslab/betamix.hpp"
#include "osslab/errors.hpp"
#include "osslab/rng.hpp"

namespace osslab {
namespace {

std::vector<double> beta_draws(double a, double b, int n, Rng& rng) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  std::vector<double> out(n);
  for (auto& s : out) {
    const double x = ga(rng), y = gb(rng);
    s = x / (x + y);
  }
  return out;
}

TEST(BetaPdf, ClosedFormValues) {
  EXPECT_NEAR(beta_pdf({1, 1}, 0.3), 1.0, 1e-14);
  EXPECT_NEAR(beta_pdf({2, 2}, 0.5), 1.5, 1e-14);
  EXPECT_THROW(beta_pdf({2, 2}, 0.0), std::domain_error);
  EXPECT_THROW(beta_pdf({2, 2}, 1.0), std::domain_error);
}

TEST(BetaPdf, MatchesBoostOnAGrid) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(0.1, 50.0);
  for (int t = 0; t < 50; ++t) {
    const BetaParams p{u(rng), u(rng)};
    const boost::math::beta_distribution<double> ref(p.alpha, p.beta);
    for (double s : {0.01, 0.2, 0.5, 0.77, 0.99}) {
      const double want = boost::math::pdf(ref, s);
      EXPECT_NEAR(beta_pdf(p, s), want, 1e-10 * std::max(1.0, want));
    }
  }
}

TEST(BetaPdf, IntegratesToOne) {
  Rng rng(2);
  std::uniform_real_distribution<double> u(0.1, 50.0);
  boost::math::quadrature::tanh_sinh<double> integrator;
  for (int t = 0; t < 30; ++t) {
    const BetaParams p{u(rng), u(rng)};
    const double area = integrator.integrate([&](double s) { return beta_pdf(p, s); }, 0.0, 1.0);
    EXPECT_NEAR(area, 1.0, 1e-6) << p.alpha << " " << p.beta;
  }
}

TEST(WeightedMoments, Examples) {
  const std::vector<double> s{0.2, 0.8};
  const auto m = weighted_moments(s, std::vector<double>{1, 1});
  EXPECT_NEAR(m.mean, 0.5, 1e-15);
  EXPECT_NEAR(m.variance, 0.09, 1e-15);
  const auto one = weighted_moments(std::vector<double>{0.2, 0.8, 0.4},
                                    std::vector<double>{1, 0, 1});
  EXPECT_NEAR(one.mean, 0.3, 1e-15);
  EXPECT_NEAR(one.variance, 0.01, 1e-15);
  EXPECT_THROW(weighted_moments(s, std::vector<double>{0, 0}), std::domain_error);
  EXPECT_THROW(weighted_moments(s, std::vector<double>{1}), std::invalid_argument);
}

TEST(WeightedMoments, EqualWeightsGivePopulationMoments) {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.9, 0.6};
  double mean = 0, var = 0;
  for (double x : s) mean += x / 5;
  for (double x : s) var += (x - mean) * (x - mean) / 5;
  const auto m = weighted_moments(s, std::vector<double>(5, 3.0));
  EXPECT_NEAR(m.mean, mean, 1e-15);
  EXPECT_NEAR(m.variance, var, 1e-15);
}

TEST(MethodOfMoments, Examples) {
  const auto uniform = method_of_moments({0.5, 1.0 / 12.0});
  EXPECT_NEAR(uniform.params.alpha, 1.0, 1e-12);
  EXPECT_NEAR(uniform.params.beta, 1.0, 1e-12);
  EXPECT_FALSE(uniform.clamped);
  const auto fit = method_of_moments({0.8, 0.01});
  EXPECT_NEAR(fit.params.alpha, 12.0, 1e-12);
  EXPECT_NEAR(fit.params.beta, 3.0, 1e-12);
  const auto over = method_of_moments({0.5, 0.3});
  EXPECT_TRUE(over.clamped);
  EXPECT_NEAR(over.params.mean(), 0.5, 1e-15);
  EXPECT_GE(over.params.alpha, kBetaParamFloor);
}

TEST(MethodOfMoments, OverdispersedClampKeepsTheMean) {
  const auto fit = method_of_moments({0.8, 0.5});
  EXPECT_TRUE(fit.clamped);
  EXPECT_NEAR(fit.params.mean(), 0.8, 1e-15);
  EXPECT_GE(std::min(fit.params.alpha, fit.params.beta), kBetaParamFloor);
}

TEST(MethodOfMoments, RoundTrip) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.05, 200.0);
  for (int t = 0; t < 1000; ++t) {
    const BetaParams p{u(rng), u(rng)};
    const auto fit = method_of_moments({p.mean(), p.variance()});
    EXPECT_NEAR(fit.params.alpha, p.alpha, 1e-9 * std::max(1.0, p.alpha));
    EXPECT_NEAR(fit.params.beta, p.beta, 1e-9 * std::max(1.0, p.beta));
  }
}

TEST(Posterior, Examples) {
  BetaMixtureModel m;
  m.id = {2, 2};
  m.ood = {2, 2};
  m.epsilon = 0.0;
  EXPECT_NEAR(posterior_id(m, 0.3, false), 0.5, 1e-15);
  // p_id(0.5) = 1.5 for Beta(2,2) and 1.0 for Beta(1,1): ratio 1.5 / 2.5.
  m.ood = {1, 1};
  EXPECT_NEAR(posterior_id(m, 0.5, false), 0.6, 1e-15);
  // Beta(2,1) has density 2s: at the top of the clamped range p_id = 2, p_ood = 1.
  m.id = {2, 1};
  EXPECT_NEAR(posterior_id(m, clamp_score(1.0), false), 2.0 / 3.0, 1e-6);
  m.epsilon = 1e12;
  EXPECT_LT(posterior_id(m, 0.5, true), 1e-11);
}

TEST(Posterior, RegularizedFormAddsEpsilon) {
  BetaMixtureModel m;
  m.epsilon = 0.1;
  for (double s : {0.1, 0.5, 0.9}) {
    const double a = m.pi * beta_pdf(m.id, s), b = (1 - m.pi) * beta_pdf(m.ood, s);
    EXPECT_NEAR(posterior_id(m, s, true), a / (a + b + 0.1), 1e-14);
    EXPECT_NEAR(posterior_id(m, s, false), a / (a + b), 1e-14);
  }
}

TEST(Posterior, BoundedAndMonotoneWhenIdDominates) {
  BetaMixtureModel m;
  m.id = {7, 2};
  m.ood = {2, 5};
  double prev = -1.0;
  for (int i = 1; i < 1000; ++i) {
    const double p = posterior_id(m, i / 1000.0, false);
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
    EXPECT_GE(p, prev);
    prev = p;
  }
}

TEST(Posterior, UnderflowFallsBackToPrior) {
  BetaMixtureModel m;
  m.id = {1e6, 1.0};
  m.ood = {1e6, 1.0};
  m.pi = 0.3;
  EXPECT_NEAR(posterior_id(m, 0.01, false), 0.3, 1e-9);
}

TEST(Imm, LambdaOneLeavesModelUnchanged) {
  BetaMixtureModel m;
  m.lambda_ema = 1.0;
  const auto next = imm_batch_step(m, std::vector<double>{0.1, 0.5, 0.9, 0.95},
                                   std::vector<double>{0.8, 0.9});
  EXPECT_EQ(next, m);
}

TEST(Imm, LambdaZeroSeparatedMatchesPerComponentMoments) {
  BetaMixtureModel m;
  m.id = {50, 1};
  m.ood = {1, 50};
  m.lambda_ema = 0.0;
  const std::vector<double> u{0.95, 0.97, 0.99, 0.02, 0.04, 0.05, 0.01};
  const std::vector<double> l{0.96, 0.98};
  // Posteriors are 0 or 1 to well below the moment tolerance here.
  for (double s : u) {
    const double p = posterior_id(m, s, false);
    ASSERT_TRUE(p < 1e-12 || p > 1.0 - 1e-12) << s << " " << p;
  }
  const auto next = imm_batch_step(m, u, l);
  const std::vector<double> id{0.95, 0.97, 0.99, 0.96, 0.98};
  const std::vector<double> ood{0.02, 0.04, 0.05, 0.01};
  auto mom = [](const std::vector<double>& v) {
    double mean = 0, var = 0;
    for (double x : v) mean += x / v.size();
    for (double x : v) var += (x - mean) * (x - mean) / v.size();
    const double k = mean * (1 - mean) / var - 1;
    return BetaParams{mean * k, (1 - mean) * k};
  };
  EXPECT_NEAR(next.id.alpha, mom(id).alpha, 1e-9 * mom(id).alpha);
  EXPECT_NEAR(next.id.beta, mom(id).beta, 1e-9 * mom(id).beta);
  EXPECT_NEAR(next.ood.alpha, mom(ood).alpha, 1e-9 * mom(ood).alpha);
  EXPECT_NEAR(next.ood.beta, mom(ood).beta, 1e-9 * mom(ood).beta);
}

TEST(Imm, ReplayedBatchConvergesToTheLambdaZeroFixedPoint) {
  Rng rng(4);
  auto u = beta_draws(8, 2, 100, rng);
  const auto o = beta_draws(2, 6, 100, rng);
  u.insert(u.end(), o.begin(), o.end());
  const auto l = beta_draws(8, 2, 30, rng);

  BetaMixtureModel fixed;
  fixed.lambda_ema = 0.0;
  for (int i = 0; i < 5000; ++i) fixed = imm_batch_step(fixed, u, l);
  BetaMixtureModel slow;
  slow.lambda_ema = 0.9;
  for (int i = 0; i < 20000; ++i) slow = imm_batch_step(slow, u, l);
  EXPECT_NEAR(slow.id.alpha, fixed.id.alpha, 1e-6);
  EXPECT_NEAR(slow.id.beta, fixed.id.beta, 1e-6);
  EXPECT_NEAR(slow.ood.alpha, fixed.ood.alpha, 1e-6);
  EXPECT_NEAR(slow.ood.beta, fixed.ood.beta, 1e-6);
}

TEST(Imm, EpsilonNeverTouchesTheEstimates) {
  Rng rng(5);
  BetaMixtureModel a, b;
  b.epsilon = 7.5;
  for (int step = 0; step < 200; ++step) {
    const auto u = beta_draws(5, 2, 16, rng);
    const auto l = beta_draws(5, 2, 4, rng);
    a = imm_batch_step(a, u, l);
    b = imm_batch_step(b, u, l);
    ASSERT_EQ(a.id, b.id);
    ASSERT_EQ(a.ood, b.ood);
  }
}

TEST(Imm, EmptyComponentIsNotUpdated) {
  BetaMixtureModel m;
  m.id = {1e4, 1};
  m.ood = {1, 1e4};
  m.lambda_ema = 0.0;
  // Every unlabeled score is squarely ID: no OOD mass.
  const auto next = imm_batch_step(m, std::vector<double>{0.999, 0.9995, 0.9999},
                                   std::vector<double>{0.9991});
  EXPECT_EQ(next.ood, m.ood);
  EXPECT_NE(next.id, m.id);
}

TEST(FitReference, FullBatchStepEqualsOneIteration) {
  Rng rng(6);
  auto u = beta_draws(9, 3, 400, rng);
  const auto o = beta_draws(3, 9, 400, rng);
  u.insert(u.end(), o.begin(), o.end());
  const auto l = beta_draws(9, 3, 50, rng);
  BetaMixtureModel init;
  init.lambda_ema = 0.0;
  const auto one = fit_reference(u, l, init.pi, 1, 0.0, init);
  const auto step = imm_batch_step(init, u, l);
  EXPECT_EQ(one.model.id, step.id);
  EXPECT_EQ(one.model.ood, step.ood);
}

TEST(FitReference, IdenticalScoresDoNotCrash) {
  const std::vector<double> s(50, 0.6);
  const auto fit = fit_reference(s, {}, 0.5);
  EXPECT_TRUE(std::isfinite(fit.model.id.alpha));
  EXPECT_TRUE(std::isfinite(fit.model.ood.beta));
}

TEST(FitReference, SingleComponentData) {
  Rng rng(7);
  const auto s = beta_draws(8, 2, 5000, rng);
  const auto fit = fit_reference(s, {}, 0.99);
  EXPECT_NEAR(fit.model.id.mean(), 0.8, 0.05);
}

TEST(FitReference, NeedsTenScores) {
  EXPECT_THROW(fit_reference(std::vector<double>(9, 0.5), {}, 0.5), std::invalid_argument);
}

TEST(Model, ValidateRejectsBadPrior) {
  BetaMixtureModel m;
  m.pi = 1.0;
  EXPECT_THROW(m.validate(), ConfigError);
  m.pi = 0.5;
  m.epsilon = -1;
  EXPECT_THROW(m.validate(), ConfigError);
}

}  // namespace
}  // namespace osslab
