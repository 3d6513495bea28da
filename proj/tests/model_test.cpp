// tests/model_test.cpp

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

#include <filesystem>

#include <gtest/gtest.h>

#include "mtl/losses/ctc.hpp"
#include "mtl/losses/cross_entropy.hpp"
#include "mtl/model/attention_model.hpp"
#include "mtl/model/checkpoint.hpp"
#include "mtl/model/features.hpp"
#include "mtl/model/multitask_model.hpp"
#include "test_util.hpp"

namespace mtl {
namespace {

Matrix<double> random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

SharedEncoderConfig tiny_encoder(bool stacking = false) {
  SharedEncoderConfig c;
  c.num_layers = 2;
  c.hidden_per_direction = 3;
  c.projection_dim = 4;
  c.input_dim = 3;
  c.dropout_rate = 0.0;
  c.frame_stacking = stacking;
  return c;
}

TEST(Features, Downsample) {
  Rng rng(1);
  auto x = random_matrix(10, 40, rng);
  auto y = downsample_features(x);
  EXPECT_EQ(y.rows(), 5);
  EXPECT_EQ(y.cols(), 80);
  EXPECT_EQ(Matrix<double>(y.block(1, 0, 1, 40)), Matrix<double>(x.row(2)));
  EXPECT_EQ(Matrix<double>(y.block(1, 40, 1, 40)), Matrix<double>(x.row(3)));
  auto one = downsample_features(Matrix<double>(x.topRows(1)));
  EXPECT_EQ(one.rows(), 1);
  EXPECT_EQ(Matrix<double>(one.leftCols(40)), Matrix<double>(one.rightCols(40)));
  auto x7 = random_matrix(7, 3, rng);
  auto twice = downsample_features(downsample_features(x7));
  EXPECT_EQ(twice.rows(), 2);
  EXPECT_EQ(twice.cols(), 12);
  EXPECT_EQ(downsample_frame_labels({1, 2, 3, 4, 5}), (FrameLabels{1, 3, 5}));
}

TEST(MultiTask, ParameterCountClosedForm) {
  SharedEncoderConfig c;  // 5 x 320, projection 256, 40-dim input
  auto m = build_multitask_model<float>(c, 12, 8, 1);
  const std::size_t H4 = 4 * 320;
  std::size_t expect = 2 * (40 + 320 + 1) * H4;
  expect += 4 * 2 * (640 + 320 + 1) * H4;
  expect += 640 * 256 + 256;
  expect += 256 * 12 + 12;
  expect += 256 * 8 + 8;
  EXPECT_EQ(m.parameter_count(), expect);
}

TEST(MultiTask, SameSeedSameParameters) {
  auto a = build_multitask_model<double>(tiny_encoder(), 4, 5, 9);
  auto b = build_multitask_model<double>(tiny_encoder(), 4, 5, 9);
  auto pa = a.params(), pb = b.params();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i]->name, pb[i]->name);
    EXPECT_EQ(pa[i]->value, pb[i]->value);
  }
  auto c = build_multitask_model<double>(tiny_encoder(), 4, 5, 10);
  EXPECT_NE(c.params()[0]->value, pa[0]->value);
}

TEST(MultiTask, ForwardShapesAndDeterminism) {
  Rng rng(2);
  auto m = build_multitask_model<double>(tiny_encoder(true), 4, 5, 1);
  auto x = random_matrix(9, 3, rng);
  auto a = forward_multitask(m, x, false);
  auto b = forward_multitask(m, x, false);
  EXPECT_EQ(a.ctc_logprobs.rows(), 5);
  EXPECT_EQ(a.ctc_logprobs.cols(), 4);
  EXPECT_EQ(a.ce_logprobs.cols(), 5);
  EXPECT_EQ(a.ctc_logprobs, b.ctc_logprobs);
  EXPECT_THROW(forward_multitask(m, random_matrix(9, 2, rng), false), ConfigError);
  EXPECT_THROW(forward_multitask(m, Matrix<double>(0, 3), false), ConfigError);
}

TEST(MultiTask, FullModelGradient) {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    auto m = build_multitask_model<double>(tiny_encoder(trial % 2 == 1), 4, 5, trial);
    const auto x = random_matrix(8, 3, rng);
    const LabelSequence z{1, 3};
    FrameLabels fl;
    const int Tm = trial % 2 == 1 ? 4 : 8;
    for (int t = 0; t < Tm; ++t) fl.push_back(static_cast<int>(rng.uniform_int(5)));
    const double lambda = 0.3;
    auto loss = [&] {
      auto o = forward_multitask(m, x, false);
      return (1 - lambda) * ctc_loss_and_grad(o.ctc_logprobs, z).result.loss +
             lambda * framewise_ce_loss(o.ce_logprobs, fl).loss;
    };
    m.zero_grad();
    auto o = forward_multitask(m, x, false);
    Matrix<double> gc = (1 - lambda) * ctc_loss_and_grad(o.ctc_logprobs, z).result.grad_logits;
    Matrix<double> ge = lambda * framewise_ce_loss(o.ce_logprobs, fl).grad_logits;
    backward_multitask(m, o.cache, gc, ge);
    std::vector<Matrix<double>*> vals;
    std::vector<const Matrix<double>*> grads;
    for (auto* p : m.params()) {
      vals.push_back(&p->value);
      grads.push_back(&p->grad);
    }
    EXPECT_LT(testing::gradient_check(vals, grads, loss), 1e-6);
  }
}

TEST(MultiTask, EmptyHeadGradientLeavesHeadUntouched) {
  Rng rng(4);
  auto m = build_multitask_model<double>(tiny_encoder(), 4, 5, 1);
  auto o = forward_multitask(m, random_matrix(6, 3, rng), false);
  m.zero_grad();
  auto ge = framewise_ce_loss(o.ce_logprobs, FrameLabels{0, 1, 2, 3, 4, 0}).grad_logits;
  backward_multitask(m, o.cache, Matrix<double>(), ge);
  EXPECT_TRUE(m.ctc_head.weight.grad.isZero(0.0));
  EXPECT_TRUE(m.ctc_head.bias.grad.isZero(0.0));
  EXPECT_FALSE(m.ce_head.weight.grad.isZero(0.0));
}

TEST(Checkpoint, RoundTripBytes) {
  auto m = build_multitask_model<double>(tiny_encoder(), 4, 5, 1);
  Checkpoint c;
  c.config = {{"encoder", m.config}, {"note", "x"}};
  c.epoch = 3;
  c.rng_state = "123 456";
  c.put_all(m.params());
  const auto dir = testing::scratch_dir("ckpt");
  const auto p1 = dir + "/a", p2 = dir + "/b";
  c.save(p1);
  Checkpoint::load(p1).save(p2);
  EXPECT_EQ(testing::read_bytes(p1), testing::read_bytes(p2));
  auto back = Checkpoint::load(p1);
  EXPECT_EQ(back.epoch, 3);
  EXPECT_EQ(back.rng_state, "123 456");
  auto m2 = build_multitask_model<double>(tiny_encoder(), 4, 5, 99);
  back.get_all(m2.params());
  for (std::size_t i = 0; i < m.params().size(); ++i)
    EXPECT_EQ(m.params()[i]->value, m2.params()[i]->value);
}

TEST(Checkpoint, PrecisionConversion) {
  auto m = build_multitask_model<double>(tiny_encoder(), 4, 5, 1);
  Checkpoint c;
  c.put_all(m.params());
  auto f = build_multitask_model<float>(tiny_encoder(), 4, 5, 2);
  c.get_all(f.params());
  EXPECT_EQ(f.ctc_head.weight.value, m.ctc_head.weight.value.cast<float>());
}

TEST(Checkpoint, CorruptFilesRejected) {
  const auto dir = testing::scratch_dir("ckpt-bad");
  auto m = build_multitask_model<double>(tiny_encoder(), 4, 5, 1);
  Checkpoint c;
  c.put_all(m.params());
  auto bytes = c.serialize();
  bytes.resize(bytes.size() - 7);
  EXPECT_THROW(Checkpoint::deserialize(bytes), LoadError);
  std::vector<std::uint8_t> junk{'n', 'o', 'p', 'e'};
  EXPECT_THROW(Checkpoint::deserialize(junk), LoadError);
  EXPECT_THROW(Checkpoint::load(dir + "/missing"), LoadError);
}

AttentionConfig tiny_attention(const SharedEncoderConfig& enc) {
  AttentionConfig a;
  a.encoder = enc;
  a.extra_layers = 1;
  a.extra_hidden = 2;
  a.decoder_hidden = 3;
  a.attention_dim = 3;
  a.embedding_dim = 2;
  a.vocab = 4;
  return a;
}

TEST(Transfer, CopiesTrunkBitwise) {
  auto mt = build_multitask_model<double>(tiny_encoder(true), 4, 5, 7);
  Checkpoint c;
  c.config = {{"encoder", mt.config}};
  c.put_all(mt.params());
  auto am = transfer_encoder<double>(c, tiny_attention(tiny_encoder(true)), 11);
  auto src = mt.trunk_params();
  auto dst = am.trunk_params();
  ASSERT_EQ(src.size(), dst.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    EXPECT_EQ(src[i]->name, dst[i]->name);
    EXPECT_EQ(src[i]->value, dst[i]->value);
  }
  // Everything else matches a fresh build from the same seed.
  auto fresh = build_attention_model<double>(tiny_attention(tiny_encoder(true)), 11);
  EXPECT_EQ(fresh.output.weight.value, am.output.weight.value);
  EXPECT_EQ(fresh.decoder[0].w_input.value, am.decoder[0].w_input.value);

  // Re-saving the transferred trunk gives the same tensors again.
  Checkpoint again;
  again.put_all(am.trunk_params());
  for (const auto* p : mt.trunk_params()) {
    EXPECT_EQ(again.blob(p->name).bytes, c.blob(p->name).bytes);
  }
}

TEST(Transfer, ShapeMismatchNamesTensors) {
  auto mt = build_multitask_model<double>(tiny_encoder(), 4, 5, 7);
  Checkpoint c;
  c.config = {{"encoder", mt.config}};
  c.put_all(mt.params());
  auto other = tiny_encoder();
  other.hidden_per_direction = 5;
  try {
    transfer_encoder<double>(c, tiny_attention(other), 1);
    FAIL() << "expected TransferError";
  } catch (const TransferError& e) {
    EXPECT_FALSE(e.mismatched().empty());
    EXPECT_NE(std::string(e.what()).find("trunk.l0.fwd.w_hidden"), std::string::npos);
  }
}

}  // namespace
}  // namespace mtl
