// tests/data_test.cpp

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
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "mtl/data/dataset_io.hpp"
#include "mtl/data/synthetic.hpp"
#include "mtl/data/transforms.hpp"
#include "test_util.hpp"

namespace mtl {
namespace {

SyntheticTaskSpec small_spec() {
  SyntheticTaskSpec s;
  s.num_utterances = 60;
  s.num_conversations = 5;
  s.feature_dim = 6;
  return s;
}

TEST(Synthetic, FrameLabelsCollapseToTranscript) {
  auto spec = small_spec();
  for (const auto& u : generate_corpus(spec)) {
    EXPECT_EQ(collapse_frame_labels(u.frame_labels, spec.states_per_label), u.ctc_labels);
    EXPECT_EQ(static_cast<int>(u.frame_labels.size()), u.num_frames());
    EXPECT_EQ(u.features.cols(), spec.feature_dim);
    EXPECT_GE(static_cast<int>(u.ctc_labels.size()), spec.label_len_min);
    EXPECT_LE(static_cast<int>(u.ctc_labels.size()), spec.label_len_max);
    for (int k : u.ctc_labels) {
      EXPECT_GE(k, 1);
      EXPECT_LT(k, spec.vocab_size);
    }
    // Alignment tiles the utterance and agrees with the frame labels.
    int next = 0;
    for (const auto& a : u.alignment) {
      EXPECT_EQ(a.start, next);
      for (int t = a.start; t < a.end; ++t)
        EXPECT_EQ(u.frame_labels[static_cast<std::size_t>(t)] / spec.states_per_label, a.label);
      next = a.end;
    }
    EXPECT_EQ(next, u.num_frames());
    // Each unit lasts at least states * min duration frames, so CTC is always feasible.
    EXPECT_GE(u.num_frames(), ctc_min_frames(u.ctc_labels));
  }
}

TEST(Synthetic, RepeatedLabelsStaySeparate) {
  // label 1 twice in a row: states 3,4,5,3,4,5
  FrameLabels fl{3, 3, 4, 5, 3, 4, 4, 5};
  EXPECT_EQ(collapse_frame_labels(fl, 3), (LabelSequence{1, 1}));
  EXPECT_EQ(frame_label_segments(fl, 3).size(), 2u);
}

TEST(Synthetic, Deterministic) {
  auto a = generate_corpus(small_spec());
  auto b = generate_corpus(small_spec());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].features, b[i].features);
    EXPECT_EQ(a[i].frame_labels, b[i].frame_labels);
  }
  auto spec = small_spec();
  auto sm = synthetic_model(spec);
  EXPECT_EQ(generate_utterance(spec, sm, 17).features, a[17].features);
}

TEST(Synthetic, InvalidSpecNamesField) {
  auto s = small_spec();
  s.noise_sigma = 0.0;
  try {
    s.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("noise_sigma"), std::string::npos);
  }
}

TEST(Synthetic, BalancedStatesGiveUniformErrorRate) {
  // A classifier that always answers state 0 errs on every frame of any
  // other state; with S states visited evenly that is about (S-1)/S.
  SyntheticTaskSpec s = small_spec();
  s.vocab_size = 4;
  s.states_per_label = 1;
  s.silence_prob = 0.0;
  s.num_utterances = 400;
  std::vector<int> counts(4, 0);
  long total = 0;
  for (const auto& u : generate_corpus(s))
    for (int l : u.frame_labels) {
      ++counts[static_cast<std::size_t>(l)];
      ++total;
    }
  // Labels 1..3 only, so a state-0 answer is always wrong.
  EXPECT_EQ(counts[0], 0);
  for (int k = 1; k < 4; ++k) EXPECT_NEAR(counts[static_cast<std::size_t>(k)] / double(total), 1.0 / 3, 0.03);
}

TEST(Split, SizesAndDisjoint) {
  auto recs = generate_corpus(small_spec());
  auto s = split_train_cv(recs, 0.05, 1);
  EXPECT_EQ(s.cv.size(), 3u);
  EXPECT_EQ(s.train.size(), 57u);
  std::set<std::string> ids;
  for (const auto& r : s.train) ids.insert(r.id);
  for (const auto& r : s.cv) EXPECT_EQ(ids.count(r.id), 0u);
  auto again = split_train_cv(recs, 0.05, 1);
  EXPECT_EQ(again.cv[0].id, s.cv[0].id);
}

TEST(Normalize, PerConversation) {
  auto recs = generate_corpus(small_spec());
  normalize_per_conversation(recs);
  std::map<std::string, std::pair<RowVector<double>, double>> acc;
  for (const auto& r : recs) {
    auto& a = acc[r.conversation_id];
    if (a.first.size() == 0) a.first = RowVector<double>::Zero(r.features.cols());
    a.first += r.features.colwise().sum();
    a.second += static_cast<double>(r.features.rows());
  }
  for (const auto& [c, a] : acc) EXPECT_LT((a.first / a.second).cwiseAbs().maxCoeff(), 1e-12);
  std::map<std::string, RowVector<double>> var;
  std::map<std::string, double> n;
  for (const auto& r : recs) {
    auto& v = var[r.conversation_id];
    if (v.size() == 0) v = RowVector<double>::Zero(r.features.cols());
    v += r.features.array().square().matrix().colwise().sum();
    n[r.conversation_id] += static_cast<double>(r.features.rows());
  }
  for (const auto& [c, v] : var) EXPECT_LT(((v / n[c]).array() - 1.0).abs().maxCoeff(), 1e-9);
}

TEST(Normalize, SingleFrameConversation) {
  UtteranceRecord u;
  u.id = "a";
  u.conversation_id = "c";
  u.features = Matrix<double>::Constant(1, 3, 5.0);
  std::vector<UtteranceRecord> recs{u};
  normalize_per_conversation(recs);
  EXPECT_TRUE(recs[0].features.allFinite());
  EXPECT_TRUE(recs[0].features.isZero(0.0));
}

TEST(SpeedPerturb, Examples) {
  Rng rng(1);
  Matrix<double> x(100, 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  EXPECT_EQ(speed_perturb(x, 1.0), x);
  auto slow = speed_perturb(x, 0.8);
  EXPECT_EQ(slow.rows(), 125);
  EXPECT_EQ(Matrix<double>(slow.row(0)), Matrix<double>(x.row(0)));
  EXPECT_EQ(Matrix<double>(slow.row(124)), Matrix<double>(x.row(99)));
  EXPECT_EQ(speed_perturb(x, 1.25).rows(), 80);
  EXPECT_THROW(speed_perturb(x, 2.0), ConfigError);
  UtteranceRecord u;
  u.features = x;
  u.ctc_labels = {1, 2};
  u.frame_labels.assign(100, 0);
  auto p = speed_perturb_utterance(u, 0.9);
  EXPECT_TRUE(p.frame_labels.empty());
  EXPECT_EQ(p.ctc_labels, u.ctc_labels);
}

TEST(DatasetIo, RoundTripIsByteIdentical) {
  auto spec = small_spec();
  auto recs = generate_corpus(spec);
  const auto d1 = testing::scratch_dir("ds1"), d2 = testing::scratch_dir("ds2");
  auto m = save_dataset(d1, recs, spec);
  EXPECT_EQ(m.index.size(), recs.size());
  auto loaded = load_dataset(d1);
  ASSERT_EQ(loaded.records.size(), recs.size());
  EXPECT_EQ(loaded.records[5].features, recs[5].features);
  EXPECT_EQ(loaded.records[5].frame_labels, recs[5].frame_labels);
  EXPECT_EQ(loaded.records[5].alignment, recs[5].alignment);
  EXPECT_EQ(loaded.manifest.spec.get<SyntheticTaskSpec>(), spec);
  save_dataset(d2, loaded.records, loaded.manifest.spec);
  EXPECT_EQ(testing::read_bytes(bin_path(d1)), testing::read_bytes(bin_path(d2)));
  EXPECT_EQ(testing::read_bytes(manifest_path(d1)), testing::read_bytes(manifest_path(d2)));
}

TEST(DatasetIo, MissingFrameLabelsSurvive) {
  auto recs = generate_corpus(small_spec());
  std::vector<UtteranceRecord> sp{speed_perturb_utterance(recs[0], 0.9)};
  const auto d = testing::scratch_dir("ds-sp");
  save_dataset(d, sp);
  auto back = load_dataset(d);
  EXPECT_TRUE(back.records[0].frame_labels.empty());
  EXPECT_EQ(back.records[0].features, sp[0].features);
}

TEST(DatasetIo, Float32Features) {
  auto recs = generate_corpus(small_spec());
  const auto d = testing::scratch_dir("ds-f32");
  save_dataset(d, recs, nullptr, "f32");
  auto back = load_dataset(d);
  EXPECT_EQ(back.records[3].features, recs[3].features.cast<float>().cast<double>());
}

TEST(DatasetIo, TruncatedFileIsCorruptNotCrash) {
  auto recs = generate_corpus(small_spec());
  const auto d = testing::scratch_dir("ds-trunc");
  save_dataset(d, recs);
  const auto size = std::filesystem::file_size(bin_path(d));
  std::filesystem::resize_file(bin_path(d), size / 2);
  try {
    load_dataset(d);
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("corrupt"), std::string::npos);
  }
  std::ofstream(manifest_path(d)) << "{ not json";
  EXPECT_THROW(load_dataset(d), LoadError);
  EXPECT_THROW(load_dataset(d + "/nowhere"), LoadError);
}

}  // namespace
}  // namespace mtl
