// mtl/data/synthetic.hpp

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

// Synthetic speech-like corpus with exact frame alignments.
//
// Every label k in 0..V-1 owns `states_per_label` left-to-right states with
// ids k * states_per_label + j. Label 0 doubles as silence and may pad the
// start and end of an utterance; labels 1..V-1 make up the transcript. Each
// state lasts a uniform number of frames in [duration_min, duration_max] and
// emits Gaussian features around its mean, shifted by a per-conversation
// offset vector.

#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtl/core/base.hpp"
#include "mtl/core/random.hpp"
#include "mtl/losses/ctc.hpp"

namespace mtl {

struct SyntheticTaskSpec {
  int vocab_size = 12;  // CTC vocabulary including blank
  int states_per_label = 3;
  int feature_dim = 40;
  int duration_min = 2;
  int duration_max = 6;
  double mean_scale = 1.0;  // std-dev of the state mean coordinates
  double noise_sigma = 4.0;
  double conversation_offset = 0.5;  // std-dev of per-conversation offsets
  double silence_prob = 0.5;         // chance of a silence unit at each edge
  int label_len_min = 3;
  int label_len_max = 10;
  int num_utterances = 2105;
  int num_conversations = 50;
  std::uint64_t seed = 1;

  int num_states() const { return vocab_size * states_per_label; }

  void validate() const {
    require(vocab_size >= 2, "data.vocab_size must be >= 2");
    require(states_per_label >= 1, "data.states_per_label must be >= 1");
    require(feature_dim >= 1, "data.feature_dim must be >= 1");
    require(duration_min >= 1, "data.duration_min must be >= 1");
    require(duration_max >= duration_min, "data.duration_max must be >= data.duration_min");
    require(noise_sigma > 0.0, "data.noise_sigma must be > 0");
    require(mean_scale >= 0.0, "data.mean_scale must be >= 0");
    require(conversation_offset >= 0.0, "data.conversation_offset must be >= 0");
    require(silence_prob >= 0.0 && silence_prob <= 1.0, "data.silence_prob must be in [0, 1]");
    require(label_len_min >= 1, "data.label_len_min must be >= 1");
    require(label_len_max >= label_len_min, "data.label_len_max must be >= data.label_len_min");
    require(num_utterances >= 1, "data.num_utterances must be >= 1");
    require(num_conversations >= 1, "data.num_conversations must be >= 1");
  }

  bool operator==(const SyntheticTaskSpec&) const = default;
};

inline void to_json(nlohmann::json& j, const SyntheticTaskSpec& s) {
  j = nlohmann::json{{"vocab_size", s.vocab_size},
                     {"states_per_label", s.states_per_label},
                     {"feature_dim", s.feature_dim},
                     {"duration_min", s.duration_min},
                     {"duration_max", s.duration_max},
                     {"mean_scale", s.mean_scale},
                     {"noise_sigma", s.noise_sigma},
                     {"conversation_offset", s.conversation_offset},
                     {"silence_prob", s.silence_prob},
                     {"label_len_min", s.label_len_min},
                     {"label_len_max", s.label_len_max},
                     {"num_utterances", s.num_utterances},
                     {"num_conversations", s.num_conversations},
                     {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, SyntheticTaskSpec& s) {
  j.at("vocab_size").get_to(s.vocab_size);
  j.at("states_per_label").get_to(s.states_per_label);
  j.at("feature_dim").get_to(s.feature_dim);
  j.at("duration_min").get_to(s.duration_min);
  j.at("duration_max").get_to(s.duration_max);
  j.at("mean_scale").get_to(s.mean_scale);
  j.at("noise_sigma").get_to(s.noise_sigma);
  j.at("conversation_offset").get_to(s.conversation_offset);
  j.at("silence_prob").get_to(s.silence_prob);
  j.at("label_len_min").get_to(s.label_len_min);
  j.at("label_len_max").get_to(s.label_len_max);
  j.at("num_utterances").get_to(s.num_utterances);
  j.at("num_conversations").get_to(s.num_conversations);
  j.at("seed").get_to(s.seed);
}

struct AlignmentSegment {
  int label = 0;
  int start = 0;  // inclusive frame
  int end = 0;    // exclusive frame

  bool operator==(const AlignmentSegment&) const = default;
};

struct UtteranceRecord {
  std::string id;
  std::string conversation_id;
  Matrix<double> features;  // T x F
  LabelSequence ctc_labels;
  FrameLabels frame_labels;
  std::vector<AlignmentSegment> alignment;

  int num_frames() const { return static_cast<int>(features.rows()); }
};

/// Label-level segments of a state sequence. A new segment starts when the
/// label changes or the within-label state index does not increase, so
/// back-to-back repeats of one label stay separate.
inline std::vector<AlignmentSegment> frame_label_segments(const FrameLabels& states,
                                                          int states_per_label) {
  std::vector<AlignmentSegment> segs;
  for (std::size_t t = 0; t < states.size(); ++t) {
    const int label = states[t] / states_per_label;
    const int sub = states[t] % states_per_label;
    bool fresh = segs.empty() || segs.back().label != label;
    if (!fresh && t > 0 && states[t] != states[t - 1]) {
      const int prev_sub = states[t - 1] % states_per_label;
      fresh = sub <= prev_sub;
    }
    if (fresh) segs.push_back({label, static_cast<int>(t), static_cast<int>(t)});
    segs.back().end = static_cast<int>(t) + 1;
  }
  return segs;
}

/// Transcript recovered from frame labels: segment labels with silence dropped.
inline LabelSequence collapse_frame_labels(const FrameLabels& states, int states_per_label) {
  LabelSequence out;
  for (const auto& s : frame_label_segments(states, states_per_label))
    if (s.label != kBlank) out.push_back(s.label);
  return out;
}

/// State means (S x F) and per-conversation offsets (C x F), fixed by the seed.
struct SyntheticModel {
  Matrix<double> state_means;
  Matrix<double> conversation_offsets;
};

inline SyntheticModel synthetic_model(const SyntheticTaskSpec& spec) {
  SyntheticModel m;
  Rng rng(derive_seed(spec.seed, 0x6d65616e73ull));
  m.state_means.resize(spec.num_states(), spec.feature_dim);
  for (Eigen::Index i = 0; i < m.state_means.size(); ++i)
    m.state_means.data()[i] = spec.mean_scale * rng.normal();
  m.conversation_offsets.resize(spec.num_conversations, spec.feature_dim);
  for (Eigen::Index i = 0; i < m.conversation_offsets.size(); ++i)
    m.conversation_offsets.data()[i] = spec.conversation_offset * rng.normal();
  return m;
}

inline std::string utterance_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "utt-%07d", index);
  return buf;
}

inline std::string conversation_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "conv-%05d", index);
  return buf;
}

/// Utterance `index` depends only on (spec, index): each has its own stream.
inline UtteranceRecord generate_utterance(const SyntheticTaskSpec& spec, const SyntheticModel& sm,
                                          int index) {
  Rng rng(derive_seed(spec.seed, 0x757474ull, static_cast<std::uint64_t>(index)));
  UtteranceRecord u;
  u.id = utterance_id(index);
  const int conv = index % spec.num_conversations;
  u.conversation_id = conversation_id(conv);

  const int L = rng.uniform_int(spec.label_len_min, spec.label_len_max);
  for (int i = 0; i < L; ++i) u.ctc_labels.push_back(rng.uniform_int(1, spec.vocab_size - 1));

  std::vector<int> units;
  if (rng.bernoulli(spec.silence_prob)) units.push_back(kBlank);
  units.insert(units.end(), u.ctc_labels.begin(), u.ctc_labels.end());
  if (rng.bernoulli(spec.silence_prob)) units.push_back(kBlank);

  for (int label : units) {
    AlignmentSegment seg{label, static_cast<int>(u.frame_labels.size()), 0};
    for (int j = 0; j < spec.states_per_label; ++j) {
      const int d = rng.uniform_int(spec.duration_min, spec.duration_max);
      u.frame_labels.insert(u.frame_labels.end(), static_cast<std::size_t>(d),
                            label * spec.states_per_label + j);
    }
    seg.end = static_cast<int>(u.frame_labels.size());
    u.alignment.push_back(seg);
  }

  const int T = static_cast<int>(u.frame_labels.size());
  u.features.resize(T, spec.feature_dim);
  for (int t = 0; t < T; ++t)
    for (int f = 0; f < spec.feature_dim; ++f)
      u.features(t, f) = sm.state_means(u.frame_labels[static_cast<std::size_t>(t)], f) +
                         sm.conversation_offsets(conv, f) + spec.noise_sigma * rng.normal();
  return u;
}

inline std::vector<UtteranceRecord> generate_corpus(const SyntheticTaskSpec& spec) {
  spec.validate();
  const SyntheticModel sm = synthetic_model(spec);
  std::vector<UtteranceRecord> out;
  out.reserve(static_cast<std::size_t>(spec.num_utterances));
  for (int i = 0; i < spec.num_utterances; ++i) out.push_back(generate_utterance(spec, sm, i));
  return out;
}

struct CorpusSplit {
  std::vector<UtteranceRecord> train;
  std::vector<UtteranceRecord> cv;
};

/// Held-out set of round(cv_fraction * N) utterances chosen by `seed`; both
/// halves keep corpus order.
inline CorpusSplit split_train_cv(const std::vector<UtteranceRecord>& records, double cv_fraction,
                                  std::uint64_t seed) {
  require(cv_fraction >= 0.0 && cv_fraction < 1.0, "cv fraction must be in [0, 1)");
  const std::size_t n = records.size();
  std::size_t n_cv = static_cast<std::size_t>(std::llround(cv_fraction * static_cast<double>(n)));
  if (cv_fraction > 0.0 && n_cv == 0 && n >= 2) n_cv = 1;
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(derive_seed(seed, 0x6376ull));
  shuffle(idx, rng);
  std::vector<bool> is_cv(n, false);
  for (std::size_t i = 0; i < n_cv; ++i) is_cv[idx[i]] = true;
  CorpusSplit s;
  for (std::size_t i = 0; i < n; ++i) (is_cv[i] ? s.cv : s.train).push_back(records[i]);
  return s;
}

}  // namespace mtl
