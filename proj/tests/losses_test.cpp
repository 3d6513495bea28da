// tests/losses_test.cpp

// Copyright 2026  The mtl-ctc Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <cmath>

#include <gtest/gtest.h>

#include "mtl/losses/ctc.hpp"
#include "mtl/losses/cross_entropy.hpp"
#include "mtl/losses/multitask.hpp"
#include "mtl/nn/activations.hpp"
#include "test_util.hpp"

namespace mtl {
namespace {

using testing::brute_force_ctc_loss;
using testing::random_logprobs;

Matrix<double> uniform_logprobs(int T, int V) {
  return Matrix<double>::Constant(T, V, -std::log(static_cast<double>(V)));
}

TEST(ExtendWithBlanks, Examples) {
  EXPECT_EQ(extend_with_blanks({1}), (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(extend_with_blanks({1, 2}), (std::vector<int>{0, 1, 0, 2, 0}));
  EXPECT_EQ(extend_with_blanks({1, 1}), (std::vector<int>{0, 1, 0, 1, 0}));
  EXPECT_THROW(extend_with_blanks({}), InvalidTargetError);
}

TEST(Ctc, SingleFrame) {
  Matrix<double> lp(1, 2);
  lp << std::log(0.5), std::log(0.5);
  auto out = ctc_loss_and_grad(lp, {1});
  EXPECT_NEAR(out.result.loss, std::log(2.0), 1e-12);
  auto per_t = trellis_consistency_check(out.trellis, lp);
  ASSERT_EQ(per_t.size(), 1u);
  EXPECT_NEAR(per_t[0], std::log(0.5), 1e-12);
}

TEST(Ctc, TwoFramesUniform) {
  auto out = ctc_loss_and_grad(uniform_logprobs(2, 2), {1});
  EXPECT_NEAR(out.result.loss, -std::log(0.75), 1e-12);
  EXPECT_NEAR(out.result.loss, 0.2877, 1e-4);
}

TEST(Ctc, MatchesBruteForce) {
  Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const int V = 2 + static_cast<int>(rng.uniform_int(2));
    const int T = 1 + static_cast<int>(rng.uniform_int(6));
    const int L = 1 + static_cast<int>(rng.uniform_int(3));
    LabelSequence z;
    for (int i = 0; i < L; ++i) z.push_back(1 + static_cast<int>(rng.uniform_int(V - 1)));
    auto lp = random_logprobs(T, V, rng);
    const double oracle = brute_force_ctc_loss(lp, z);
    if (!std::isfinite(oracle)) {
      EXPECT_THROW(ctc_loss_and_grad(lp, z), InfeasibleTargetError);
      continue;
    }
    auto out = ctc_loss_and_grad(lp, z);
    EXPECT_NEAR(out.result.loss, oracle, 1e-9);
    for (double v : trellis_consistency_check(out.trellis, lp))
      EXPECT_NEAR(v, -out.result.loss, 1e-9);
  }
}

TEST(Ctc, GradientMatchesFiniteDifferences) {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const int V = 3 + static_cast<int>(rng.uniform_int(3));
    const int T = 4 + static_cast<int>(rng.uniform_int(5));
    LabelSequence z;
    const int L = 1 + static_cast<int>(rng.uniform_int(3));
    for (int i = 0; i < L; ++i) z.push_back(1 + static_cast<int>(rng.uniform_int(V - 1)));
    Matrix<double> logits(T, V);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = rng.normal();
    auto loss = [&] { return ctc_loss_and_grad(log_softmax(logits), z).result.loss; };
    const Matrix<double> g = ctc_loss_and_grad(log_softmax(logits), z).result.grad_logits;
    EXPECT_LT(testing::gradient_check({&logits}, {&g}, loss), 1e-6);
  }
}

TEST(Ctc, GradientRowsSumToZero) {
  Rng rng(3);
  auto lp = random_logprobs(6, 4, rng);
  auto g = ctc_loss_and_grad(lp, {1, 2}).result.grad_logits;
  for (Eigen::Index t = 0; t < g.rows(); ++t) EXPECT_NEAR(g.row(t).sum(), 0.0, 1e-12);
}

TEST(Ctc, Errors) {
  auto lp = uniform_logprobs(2, 3);
  EXPECT_THROW(ctc_loss_and_grad(lp, {1, 1}), InfeasibleTargetError);
  EXPECT_THROW(ctc_loss_and_grad(lp, {3}), InvalidTargetError);
  EXPECT_THROW(ctc_loss_and_grad(lp, {0}), InvalidTargetError);
  EXPECT_THROW(ctc_loss_and_grad(lp, {}), InvalidTargetError);
  Matrix<double> bad = Matrix<double>::Zero(2, 3);  // rows sum to 3, not 1
  EXPECT_THROW(ctc_loss_and_grad(bad, {1}), InternalError);
  EXPECT_EQ(ctc_min_frames({1, 1, 2, 2}), 6);
}

TEST(Ctc, FloatAgreesWithDouble) {
  Rng rng(5);
  auto lp = random_logprobs(20, 6, rng);
  const Matrix<float> lpf = lp.cast<float>();
  const double d = ctc_loss_and_grad(lp, {1, 2, 3, 3, 5}).result.loss;
  const float f = ctc_loss_and_grad(lpf, {1, 2, 3, 3, 5}).result.loss;
  EXPECT_NEAR(f, d, 1e-3 * std::abs(d));
}

TEST(CrossEntropy, Uniform) {
  auto r = framewise_ce_loss(uniform_logprobs(3, 4), {0, 1, 2});
  EXPECT_NEAR(r.loss, 3 * std::log(4.0), 1e-12);
  EXPECT_NEAR(r.loss, 4.1589, 1e-4);
  auto pf = framewise_ce_loss(uniform_logprobs(3, 4), {0, 1, 2}, CeNormalization::kPerFrame);
  EXPECT_NEAR(pf.loss, std::log(4.0), 1e-12);
}

TEST(CrossEntropy, PerfectPrediction) {
  Matrix<double> lp = Matrix<double>::Constant(3, 3, -1e30);
  for (int t = 0; t < 3; ++t) lp(t, t) = 0.0;
  auto r = framewise_ce_loss(lp, {0, 1, 2});
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_EQ(framewise_errors(lp, {0, 1, 2}), 0.0);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const int T = 2 + static_cast<int>(rng.uniform_int(5));
    const int S = 2 + static_cast<int>(rng.uniform_int(5));
    FrameLabels labels;
    for (int t = 0; t < T; ++t) labels.push_back(static_cast<int>(rng.uniform_int(S)));
    Matrix<double> logits(T, S);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = rng.normal();
    for (auto norm : {CeNormalization::kSum, CeNormalization::kPerFrame}) {
      auto loss = [&] { return framewise_ce_loss(log_softmax(logits), labels, norm).loss; };
      const Matrix<double> g = framewise_ce_loss(log_softmax(logits), labels, norm).grad_logits;
      EXPECT_LT(testing::gradient_check({&logits}, {&g}, loss), 1e-6);
    }
  }
}

TEST(CrossEntropy, Errors) {
  EXPECT_THROW(framewise_ce_loss(uniform_logprobs(3, 4), {0, 1}), InvalidTargetError);
  EXPECT_THROW(framewise_ce_loss(uniform_logprobs(2, 4), {0, 4}), InvalidTargetError);
}

TEST(CombineLosses, Formula) {
  EXPECT_EQ(combine_losses(2.0, 1.0, 0.9).loss, 1.1);
  EXPECT_EQ(combine_losses(2.0f, 1.0f, 0.9).loss, 1.1f);
  auto one = combine_losses(2.5, 1.25, 1.0);
  EXPECT_EQ(one.loss, 1.25);
  EXPECT_EQ(one.ctc_scale, 0.0);
  auto zero = combine_losses(2.5, 1.25, 0.0);
  EXPECT_EQ(zero.loss, 2.5);
  EXPECT_EQ(zero.ce_scale, 0.0);
  EXPECT_THROW(combine_losses(1.0, 1.0, 1.5), ConfigError);
  EXPECT_THROW(combine_losses(1.0, 1.0, -0.1), ConfigError);
}

TEST(LogSoftmax, Examples) {
  Matrix<double> x(2, 2);
  x << 0, 0, 1000, 0;
  auto y = log_softmax(x);
  EXPECT_NEAR(y(0, 0), -std::log(2.0), 1e-15);
  EXPECT_NEAR(y(0, 1), -std::log(2.0), 1e-15);
  EXPECT_NEAR(y(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(y(1, 1), -1000.0, 1e-9);
  Rng rng(1);
  Matrix<double> r(1, 7);
  for (int i = 0; i < 7; ++i) r(0, i) = 3 * rng.normal();
  EXPECT_NEAR(log_softmax(r).array().exp().sum(), 1.0, 1e-12);
  Matrix<double> nan = Matrix<double>::Constant(1, 2, std::nan(""));
  EXPECT_THROW(log_softmax(nan), NumericError);
}

}  // namespace
}  // namespace mtl
