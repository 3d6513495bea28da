// tests/nn_test.cpp

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

#include "mtl/nn/bilstm.hpp"
#include "mtl/nn/dropout.hpp"
#include "mtl/nn/linear.hpp"
#include "mtl/nn/lstm.hpp"
#include "mtl/nn/pooling.hpp"
#include "test_util.hpp"

namespace mtl {
namespace {

Matrix<double> random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Matrix<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

// Fixed random projection so a scalar loss touches every output entry.
double weighted_sum(const Matrix<double>& y, const Matrix<double>& w) {
  return (y.array() * w.array()).sum();
}

double scalar_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST(Lstm, ZeroParamsGiveZeroHidden) {
  LstmLayerParams<double> p("l", 3, 4, Direction::kForward);
  Rng rng(1);
  auto h = lstm_forward(random_matrix(5, 3, rng), p);
  EXPECT_TRUE(h.isZero(0.0));
}

TEST(Lstm, MatchesScalarRecurrence) {
  Rng rng(2);
  const int T = 3, D = 2, H = 2;
  LstmLayerParams<double> p("l", D, H, Direction::kForward);
  p.init(rng);
  const auto x = random_matrix(T, D, rng);
  const auto h = lstm_forward(x, p);
  std::vector<double> hp(H, 0.0), cp(H, 0.0);
  for (int t = 0; t < T; ++t) {
    std::vector<double> hn(H), cn(H);
    for (int k = 0; k < H; ++k) {
      double pre[4];
      for (int g = 0; g < 4; ++g) {
        double s = p.bias.value(0, g * H + k);
        for (int d = 0; d < D; ++d) s += x(t, d) * p.w_input.value(d, g * H + k);
        for (int j = 0; j < H; ++j) s += hp[j] * p.w_hidden.value(j, g * H + k);
        pre[g] = s;
      }
      const double i = scalar_sigmoid(pre[0]), f = scalar_sigmoid(pre[1]);
      const double g = std::tanh(pre[2]), o = scalar_sigmoid(pre[3]);
      cn[k] = f * cp[k] + i * g;
      hn[k] = o * std::tanh(cn[k]);
      EXPECT_NEAR(h(t, k), hn[k], 1e-14);
    }
    hp = hn;
    cp = cn;
  }
}

TEST(Lstm, ForgetBiasStartsAtOne) {
  Rng rng(3);
  LstmLayerParams<double> p("l", 4, 5, Direction::kForward);
  p.init(rng);
  for (int k = 0; k < 5; ++k) EXPECT_EQ(p.bias.value(0, 5 + k), 1.0);
  const double r = 1.0 / std::sqrt(9.0);
  EXPECT_LE(p.w_input.value.cwiseAbs().maxCoeff(), r);
  EXPECT_LE(p.w_hidden.value.cwiseAbs().maxCoeff(), r);
}

TEST(Lstm, BackwardDirectionIsReversedForward) {
  Rng rng(4);
  LstmLayerParams<double> f("f", 2, 3, Direction::kForward);
  f.init(rng);
  LstmLayerParams<double> b = f;
  b.direction = Direction::kBackward;
  const auto x = random_matrix(4, 2, rng);
  const Matrix<double> xr = x.colwise().reverse();
  const Matrix<double> hb = lstm_forward(x, b);
  const Matrix<double> hf = lstm_forward(xr, f);
  EXPECT_LT((hb - Matrix<double>(hf.colwise().reverse())).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Lstm, ZeroGradientGivesZeroGradients) {
  Rng rng(5);
  LstmLayerParams<double> p("l", 2, 2, Direction::kForward);
  p.init(rng);
  LstmCache<double> cache;
  lstm_forward(random_matrix(3, 2, rng), p, &cache);
  auto dx = lstm_backward(cache, Matrix<double>(Matrix<double>::Zero(3, 2)), p);
  EXPECT_TRUE(dx.isZero(0.0));
  EXPECT_TRUE(p.w_input.grad.isZero(0.0));
  EXPECT_TRUE(p.w_hidden.grad.isZero(0.0));
  EXPECT_TRUE(p.bias.grad.isZero(0.0));
}

TEST(Lstm, GradientMatchesFiniteDifferences) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const int T = 1 + static_cast<int>(rng.uniform_int(5));
    const int D = 1 + static_cast<int>(rng.uniform_int(3));
    const int H = 1 + static_cast<int>(rng.uniform_int(3));
    const Direction dir = trial % 2 ? Direction::kBackward : Direction::kForward;
    LstmLayerParams<double> p("l", D, H, dir);
    p.init(rng);
    p.bias.value += random_matrix(1, 4 * H, rng, 0.5);
    Matrix<double> x = random_matrix(T, D, rng);
    const auto w = random_matrix(T, H, rng);
    LstmCache<double> cache;
    lstm_forward(x, p, &cache);
    const Matrix<double> dx = lstm_backward(cache, w, p);
    auto loss = [&] { return weighted_sum(lstm_forward(x, p), w); };
    EXPECT_LT(testing::gradient_check({&x, &p.w_input.value, &p.w_hidden.value, &p.bias.value},
                                      {&dx, &p.w_input.grad, &p.w_hidden.grad, &p.bias.grad},
                                      loss),
              1e-6);
  }
}

TEST(Lstm, AccumulationIsLinear) {
  Rng rng(7);
  LstmLayerParams<double> p("l", 2, 3, Direction::kForward);
  p.init(rng);
  const auto x = random_matrix(4, 2, rng);
  const auto w = random_matrix(4, 3, rng);
  LstmCache<double> cache;
  lstm_forward(x, p, &cache);
  lstm_backward(cache, w, p);
  const Matrix<double> once = p.w_input.grad;
  lstm_backward(cache, w, p);
  EXPECT_EQ(p.w_input.grad, Matrix<double>(2.0 * once));
}

TEST(Lstm, StaleCacheRejected) {
  Rng rng(8);
  LstmLayerParams<double> a("a", 2, 2, Direction::kForward), b("b", 2, 2, Direction::kForward);
  LstmCache<double> cache;
  lstm_forward(random_matrix(3, 2, rng), a, &cache);
  EXPECT_THROW(lstm_backward(cache, Matrix<double>(Matrix<double>::Zero(3, 2)), b), InternalError);
}

TEST(LstmStep, GradientMatchesFiniteDifferences) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const int D = 1 + static_cast<int>(rng.uniform_int(3));
    const int H = 1 + static_cast<int>(rng.uniform_int(3));
    LstmLayerParams<double> p("l", D, H, Direction::kForward);
    p.init(rng);
    Matrix<double> x = random_matrix(1, D, rng);
    Matrix<double> h0 = random_matrix(1, H, rng), c0 = random_matrix(1, H, rng);
    const auto wh = random_matrix(1, H, rng), wc = random_matrix(1, H, rng);
    auto run = [&](LstmStepCache<double>* cache) {
      LstmState<double> prev{h0.row(0), c0.row(0)};
      return lstm_step_forward(p, RowVector<double>(x.row(0)), prev, cache);
    };
    LstmStepCache<double> cache;
    run(&cache);
    LstmState<double> gp;
    const RowVector<double> dx = lstm_step_backward(p, cache, RowVector<double>(wh.row(0)),
                                                    RowVector<double>(wc.row(0)), gp);
    const Matrix<double> dxm = dx, dh0 = gp.h, dc0 = gp.c;
    auto loss = [&] {
      auto s = run(nullptr);
      return s.h.dot(wh.row(0)) + s.c.dot(wc.row(0));
    };
    EXPECT_LT(testing::gradient_check({&x, &h0, &c0, &p.w_input.value, &p.w_hidden.value,
                                       &p.bias.value},
                                      {&dxm, &dh0, &dc0, &p.w_input.grad, &p.w_hidden.grad,
                                       &p.bias.grad},
                                      loss),
              1e-6);
  }
}

TEST(Linear, IdentityAndShape) {
  Matrix<double> x(2, 3);
  x << 1, 2, 3, 4, 5, 6;
  Matrix<double> eye = Matrix<double>::Identity(3, 3);
  EXPECT_EQ(linear_forward(x, eye, Matrix<double>(Matrix<double>::Zero(1, 3))), x);
  Linear<double> proj("p", 640, 256);
  EXPECT_EQ(proj.forward(Matrix<double>::Zero(7, 640)).cols(), 256);
  EXPECT_THROW(proj.forward(Matrix<double>::Zero(7, 10)), ConfigError);
}

TEST(Linear, GradientMatchesFiniteDifferences) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const int T = 1 + static_cast<int>(rng.uniform_int(4));
    const int D = 1 + static_cast<int>(rng.uniform_int(4));
    const int K = 1 + static_cast<int>(rng.uniform_int(4));
    Linear<double> l("p", D, K);
    l.init(rng);
    Matrix<double> x = random_matrix(T, D, rng);
    const auto w = random_matrix(T, K, rng);
    const Matrix<double> dx = l.backward(x, w);
    auto loss = [&] { return weighted_sum(l.forward(x), w); };
    EXPECT_LT(testing::gradient_check({&x, &l.weight.value, &l.bias.value},
                                      {&dx, &l.weight.grad, &l.bias.grad}, loss),
              1e-6);
  }
}

TEST(MaxPool, Example) {
  Matrix<double> x(4, 2);
  x << 1, 2, 3, 0, 5, 5, 4, 6;
  Matrix<double> expect(2, 2);
  expect << 3, 2, 5, 6;
  EXPECT_EQ(maxpool_time(x), expect);
  Matrix<double> one(1, 3);
  one << 1, 2, 3;
  EXPECT_EQ(maxpool_time(one), one);
  Matrix<double> odd(3, 1);
  odd << 1, 2, 7;
  EXPECT_EQ(maxpool_time(odd).rows(), 2);
  EXPECT_EQ(maxpool_time(odd)(1, 0), 7);
}

TEST(MaxPool, TiesGoToEarlierRow) {
  Matrix<double> x(2, 1);
  x << 4, 4;
  PoolIndex idx;
  maxpool_time(x, 2, &idx);
  EXPECT_EQ(idx.source_row[0], 0);
}

TEST(MaxPool, GradientMatchesFiniteDifferences) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int T = 1 + static_cast<int>(rng.uniform_int(7));
    const int D = 1 + static_cast<int>(rng.uniform_int(3));
    // Well-separated values keep every window away from a tie.
    Matrix<double> x(T, D);
    std::vector<double> vals;
    for (int i = 0; i < T * D; ++i) vals.push_back(static_cast<double>(i));
    shuffle(vals, rng);
    for (int i = 0; i < T * D; ++i) x.data()[i] = vals[static_cast<std::size_t>(i)];
    PoolIndex idx;
    const auto y = maxpool_time(x, 2, &idx);
    const auto w = random_matrix(y.rows(), D, rng);
    const Matrix<double> dx = maxpool_time_backward(w, idx);
    auto loss = [&] { return weighted_sum(maxpool_time(x), w); };
    EXPECT_LT(testing::gradient_check({&x}, {&dx}, loss), 1e-8);
  }
}

TEST(Dropout, RateZeroIsIdentity) {
  Rng rng(12);
  auto x = random_matrix(3, 4, rng);
  auto d = dropout_apply(x, 0.0, rng);
  EXPECT_EQ(d.output, x);
  EXPECT_TRUE((d.mask.array() == 1.0).all());
}

TEST(Dropout, SeededMaskIsDeterministic) {
  Rng a(13), b(13);
  Matrix<double> x = Matrix<double>::Ones(10, 10);
  EXPECT_EQ(dropout_apply(x, 0.5, a).mask, dropout_apply(x, 0.5, b).mask);
}

TEST(Dropout, InvertedScaling) {
  Rng rng(14);
  Matrix<double> x = Matrix<double>::Ones(200, 200);
  auto d = dropout_apply(x, 0.2, rng);
  for (Eigen::Index i = 0; i < d.output.size(); ++i) {
    const double v = d.output.data()[i];
    EXPECT_TRUE(v == 0.0 || std::abs(v - 1.25) < 1e-12);
  }
  EXPECT_NEAR(d.output.mean(), 1.0, 0.02);
  EXPECT_THROW(dropout_apply(x, 1.0, rng), ConfigError);
  EXPECT_THROW(dropout_apply(x, -0.1, rng), ConfigError);
}

TEST(BiLstm, NoDropoutMatchesEval) {
  Rng rng(15);
  BiLstmStack<double> s("s", 3, 4, 3);
  s.init(rng);
  const auto x = random_matrix(6, 3, rng);
  Rng r1(1);
  EXPECT_EQ(s.forward(x, 0.0, true, &r1), s.forward(x, 0.0, false, nullptr));
}

TEST(BiLstm, SingleLayerIsConcatenation) {
  Rng rng(16);
  BiLstmStack<double> s("s", 3, 4, 1);
  s.init(rng);
  const auto x = random_matrix(5, 3, rng);
  const auto y = s.forward(x, 0.5, true, &rng);  // no dropout below the first layer
  EXPECT_EQ(y, concat_directions(lstm_forward(x, s.layers[0].fwd),
                                 lstm_forward(x, s.layers[0].bwd)));
}

TEST(BiLstm, FullSizeShape) {
  Rng rng(17);
  BiLstmStack<double> s("trunk", 40, 320, 5);
  s.init(rng);
  EXPECT_EQ(s.forward(random_matrix(50, 40, rng), 0.0, false, nullptr).rows(), 50);
  EXPECT_EQ(s.output_dim(), 640);
}

TEST(BiLstm, BrokenChainRejected) {
  BiLstmStack<double> s("s", 3, 4, 2);
  s.layers[1] = BiLstmLayer<double>("s.l1", 5, 4);
  EXPECT_THROW(s.forward(Matrix<double>::Zero(2, 3), 0.0, false, nullptr), ConfigError);
}

TEST(BiLstm, GradientWithDropoutMatchesFiniteDifferences) {
  Rng rng(18);
  for (int trial = 0; trial < 5; ++trial) {
    BiLstmStack<double> s("s", 2, 2, 2);
    s.init(rng);
    Matrix<double> x = random_matrix(4, 2, rng);
    const auto w = random_matrix(4, 4, rng);
    const std::uint64_t seed = rng.next_u64();
    BiLstmStackCache<double> cache;
    Rng r0(seed);
    s.forward(x, 0.3, true, &r0, &cache);
    const Matrix<double> dx = s.backward(cache, w);
    auto loss = [&] {
      Rng r(seed);  // same masks on every evaluation
      return weighted_sum(s.forward(x, 0.3, true, &r), w);
    };
    std::vector<Matrix<double>*> vals{&x};
    std::vector<const Matrix<double>*> grads{&dx};
    ParamRefs<double> ps;
    s.collect(ps);
    for (auto* p : ps) {
      vals.push_back(&p->value);
      grads.push_back(&p->grad);
    }
    EXPECT_LT(testing::gradient_check(vals, grads, loss), 1e-6);
  }
}

}  // namespace
}  // namespace mtl
