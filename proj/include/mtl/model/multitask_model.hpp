// mtl/model/multitask_model.hpp

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

// Multi-task acoustic model: one bidirectional LSTM stack followed by a
// linear projection (together, the shared trunk) feeding two separate
// output layers, a CTC head over labels + blank and a framewise CE head over
// HMM-like states. Only the output layers are task specific.

#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "mtl/core/base.hpp"
#include "mtl/core/random.hpp"
#include "mtl/nn/activations.hpp"
#include "mtl/nn/bilstm.hpp"
#include "mtl/nn/linear.hpp"
#include "mtl/model/features.hpp"

namespace mtl {

struct SharedEncoderConfig {
  int num_layers = 5;
  int hidden_per_direction = 320;
  int projection_dim = 256;
  double dropout_rate = 0.2;
  int input_dim = 40;
  bool frame_stacking = false;  // downsample_features before the stack

  void validate() const {
    require(num_layers >= 1, "encoder.num_layers must be >= 1");
    require(hidden_per_direction >= 1, "encoder.hidden_per_direction must be >= 1");
    require(projection_dim >= 1, "encoder.projection_dim must be >= 1");
    require(input_dim >= 1, "encoder.input_dim must be >= 1");
    require(dropout_rate >= 0.0 && dropout_rate < 1.0, "encoder.dropout_rate must be in [0, 1)");
  }

  int stack_input_dim() const { return frame_stacking ? 2 * input_dim : input_dim; }

  bool operator==(const SharedEncoderConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const SharedEncoderConfig& c) {
  j = nlohmann::json{{"num_layers", c.num_layers},
                     {"hidden_per_direction", c.hidden_per_direction},
                     {"projection_dim", c.projection_dim},
                     {"dropout_rate", c.dropout_rate},
                     {"input_dim", c.input_dim},
                     {"frame_stacking", c.frame_stacking}};
}

inline void from_json(const nlohmann::json& j, SharedEncoderConfig& c) {
  j.at("num_layers").get_to(c.num_layers);
  j.at("hidden_per_direction").get_to(c.hidden_per_direction);
  j.at("projection_dim").get_to(c.projection_dim);
  j.at("dropout_rate").get_to(c.dropout_rate);
  j.at("input_dim").get_to(c.input_dim);
  j.at("frame_stacking").get_to(c.frame_stacking);
}

template <typename Real>
struct TrunkCache {
  Matrix<Real> stack_input;
  BiLstmStackCache<Real> stack;
  Matrix<Real> stack_output;
};

/// Bi-LSTM stack + linear projection. Parameter names start with "trunk.".
template <typename Real>
struct SharedTrunk {
  SharedEncoderConfig config;
  BiLstmStack<Real> stack;
  Linear<Real> projection;

  SharedTrunk() = default;
  explicit SharedTrunk(const SharedEncoderConfig& c)
      : config(c),
        stack("trunk", c.stack_input_dim(), c.hidden_per_direction, c.num_layers),
        projection("trunk.projection", 2 * c.hidden_per_direction, c.projection_dim) {
    c.validate();
  }

  int output_dim() const { return config.projection_dim; }

  void init(Rng& rng) {
    stack.init(rng);
    projection.init(rng);
  }

  void collect(ParamRefs<Real>& out) {
    stack.collect(out);
    projection.collect(out);
  }

  /// Raw features in, projection output out (one row per stacked frame).
  Matrix<Real> forward(const Matrix<Real>& features, bool training, Rng* rng,
                       TrunkCache<Real>* cache) const {
    if (features.rows() < 1) throw ConfigError("encoder: empty feature matrix");
    if (features.cols() != config.input_dim)
      throw ConfigError(str_cat("encoder: feature dim ", features.cols(), " != configured ",
                                config.input_dim));
    Matrix<Real> x = config.frame_stacking ? downsample_features(features) : features;
    Matrix<Real> h = stack.forward(x, config.dropout_rate, training, rng,
                                   cache ? &cache->stack : nullptr);
    Matrix<Real> p = projection.forward(h);
    if (cache) {
      cache->stack_input = std::move(x);
      cache->stack_output = std::move(h);
    }
    return p;
  }

  void backward(const TrunkCache<Real>& cache, const Matrix<Real>& grad_projection) {
    Matrix<Real> g = projection.backward(cache.stack_output, grad_projection);
    stack.backward(cache.stack, g);
  }
};

template <typename Real>
struct MultiTaskCache {
  TrunkCache<Real> trunk;
  Matrix<Real> shared;  // projection output
  Matrix<Real> ctc_logprobs;
  Matrix<Real> ce_logprobs;
};

template <typename Real>
struct MultiTaskOutput {
  Matrix<Real> ctc_logprobs;  // T' x V_ctc
  Matrix<Real> ce_logprobs;   // T' x S
  MultiTaskCache<Real> cache;
};

template <typename Real>
struct MultiTaskModel {
  SharedEncoderConfig config;
  int ctc_vocab = 0;  // including blank at 0
  int ce_states = 0;
  SharedTrunk<Real> trunk;
  Linear<Real> ctc_head;
  Linear<Real> ce_head;

  ParamRefs<Real> params() {
    ParamRefs<Real> out;
    trunk.collect(out);
    ctc_head.collect(out);
    ce_head.collect(out);
    return out;
  }

  ParamRefs<Real> trunk_params() {
    ParamRefs<Real> out;
    trunk.collect(out);
    return out;
  }

  ConstParamRefs<Real> params() const {
    auto refs = const_cast<MultiTaskModel*>(this)->params();
    return ConstParamRefs<Real>(refs.begin(), refs.end());
  }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : params()) n += static_cast<std::size_t>(p->size());
    return n;
  }
};

template <typename Real>
MultiTaskModel<Real> build_multitask_model(const SharedEncoderConfig& config, int ctc_vocab,
                                           int ce_states, std::uint64_t seed) {
  config.validate();
  require(ctc_vocab >= 2, "ctc vocabulary must include blank and at least one label");
  require(ce_states >= 1, "ce state inventory must be non-empty");
  MultiTaskModel<Real> m;
  m.config = config;
  m.ctc_vocab = ctc_vocab;
  m.ce_states = ce_states;
  m.trunk = SharedTrunk<Real>(config);
  m.ctc_head = Linear<Real>("ctc_head", config.projection_dim, ctc_vocab);
  m.ce_head = Linear<Real>("ce_head", config.projection_dim, ce_states);
  Rng rng(seed);
  m.trunk.init(rng);
  m.ctc_head.init(rng);
  m.ce_head.init(rng);
  return m;
}

/// One trunk pass feeding both heads. `rng` drives dropout in training mode.
template <typename Real>
MultiTaskOutput<Real> forward_multitask(const MultiTaskModel<Real>& model,
                                        const Matrix<Real>& features, bool training,
                                        Rng* rng = nullptr) {
  MultiTaskOutput<Real> out;
  out.cache.shared = model.trunk.forward(features, training, rng, &out.cache.trunk);
  out.ctc_logprobs = log_softmax(model.ctc_head.forward(out.cache.shared));
  out.ce_logprobs = log_softmax(model.ce_head.forward(out.cache.shared));
  return out;
}

/// Backprop from head logit gradients. An empty gradient skips that head
/// entirely (no contribution, not even a zero one).
template <typename Real>
void backward_multitask(MultiTaskModel<Real>& model, const MultiTaskCache<Real>& cache,
                        const Matrix<Real>& grad_ctc_logits,
                        const Matrix<Real>& grad_ce_logits) {
  const bool use_ctc = grad_ctc_logits.size() > 0;
  const bool use_ce = grad_ce_logits.size() > 0;
  if (!use_ctc && !use_ce) return;
  Matrix<Real> g;
  if (use_ctc) g = model.ctc_head.backward(cache.shared, grad_ctc_logits);
  if (use_ce) {
    Matrix<Real> gce = model.ce_head.backward(cache.shared, grad_ce_logits);
    if (use_ctc)
      g += gce;
    else
      g = std::move(gce);
  }
  model.trunk.backward(cache.trunk, g);
}

}  // namespace mtl
