// mtl/model/attention_model.hpp

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

// Attention-based encoder-decoder.
//
// Encoder: frame-stacked features -> shared trunk (bi-LSTM stack +
// projection, transferable from a multi-task checkpoint) -> extra bi-LSTM
// layers, with a two-step temporal max-pool directly below the topmost one.
//
// Decoder step i, with s the top decoder layer's previous hidden state:
//
//   e_j     = v . tanh(s W_q + h_j W_k + b_k)       additive scoring
//   a       = softmax(e)
//   c_i     = sum_j a_j h_j
//   state   = LSTM stack step on [embed(y_{i-1}) | c_i]
//   p(y_i)  = log_softmax([s_i | c_i] W_o + b_o)
//
// Output symbol 0 is end-of-sequence (the CTC blank slot is not needed
// here); labels keep their CTC indices 1..V-1. The start symbol only exists
// as an extra embedding row with index V.

#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtl/core/base.hpp"
#include "mtl/core/random.hpp"
#include "mtl/decoder/ctc_decode.hpp"
#include "mtl/model/checkpoint.hpp"
#include "mtl/model/multitask_model.hpp"
#include "mtl/nn/pooling.hpp"

namespace mtl {

constexpr int kEndOfSequence = 0;

struct AttentionConfig {
  SharedEncoderConfig encoder;  // transferable lower part
  int extra_layers = 1;
  int extra_hidden = 0;    // 0: same as encoder.hidden_per_direction
  int decoder_layers = 2;
  int decoder_hidden = 0;  // 0: encoder output dim
  int attention_dim = 0;   // 0: decoder_hidden
  int embedding_dim = 0;   // 0: decoder_hidden
  int vocab = 0;           // output symbols including end-of-sequence at 0
  int pool_width = 2;

  /// Fills the zero-valued "same as" fields.
  AttentionConfig resolved() const {
    AttentionConfig c = *this;
    if (c.extra_hidden == 0) c.extra_hidden = c.encoder.hidden_per_direction;
    if (c.decoder_hidden == 0) c.decoder_hidden = c.encoder_output_dim();
    if (c.attention_dim == 0) c.attention_dim = c.decoder_hidden;
    if (c.embedding_dim == 0) c.embedding_dim = c.decoder_hidden;
    return c;
  }

  int encoder_output_dim() const {
    const int eh = extra_hidden == 0 ? encoder.hidden_per_direction : extra_hidden;
    return extra_layers > 0 ? 2 * eh : encoder.projection_dim;
  }

  int start_symbol() const { return vocab; }

  void validate() const {
    encoder.validate();
    require(extra_layers >= 0, "attention.extra_layers must be >= 0");
    require(decoder_layers >= 1, "attention.decoder_layers must be >= 1");
    require(vocab >= 2, "attention.vocab must be >= 2");
    require(pool_width >= 1, "attention.pool_width must be >= 1");
  }
};

inline void to_json(nlohmann::json& j, const AttentionConfig& c) {
  j = nlohmann::json{{"encoder", c.encoder},           {"extra_layers", c.extra_layers},
                     {"extra_hidden", c.extra_hidden}, {"decoder_layers", c.decoder_layers},
                     {"decoder_hidden", c.decoder_hidden}, {"attention_dim", c.attention_dim},
                     {"embedding_dim", c.embedding_dim}, {"vocab", c.vocab},
                     {"pool_width", c.pool_width}};
}

inline void from_json(const nlohmann::json& j, AttentionConfig& c) {
  j.at("encoder").get_to(c.encoder);
  j.at("extra_layers").get_to(c.extra_layers);
  j.at("extra_hidden").get_to(c.extra_hidden);
  j.at("decoder_layers").get_to(c.decoder_layers);
  j.at("decoder_hidden").get_to(c.decoder_hidden);
  j.at("attention_dim").get_to(c.attention_dim);
  j.at("embedding_dim").get_to(c.embedding_dim);
  j.at("vocab").get_to(c.vocab);
  j.at("pool_width").get_to(c.pool_width);
}

template <typename Real>
struct AttentionModel {
  AttentionConfig config;  // resolved
  SharedTrunk<Real> trunk;
  BiLstmStack<Real> lower;  // extra layers below the pool
  BiLstmStack<Real> top;    // topmost extra layer (empty if extra_layers == 0)
  Parameter<Real> query;    // decoder_hidden x attention_dim
  Linear<Real> key;         // encoder_dim -> attention_dim
  Parameter<Real> score;    // 1 x attention_dim
  Parameter<Real> embedding;  // (vocab + 1) x embedding_dim
  std::vector<LstmLayerParams<Real>> decoder;
  Linear<Real> output;  // decoder_hidden + encoder_dim -> vocab

  int encoder_dim() const { return config.encoder_output_dim(); }
  int decoder_hidden() const { return config.decoder_hidden; }

  ParamRefs<Real> params() {
    ParamRefs<Real> out;
    trunk.collect(out);
    lower.collect(out);
    top.collect(out);
    out.push_back(&query);
    key.collect(out);
    out.push_back(&score);
    out.push_back(&embedding);
    for (auto& l : decoder) l.collect(out);
    output.collect(out);
    return out;
  }

  ConstParamRefs<Real> params() const {
    auto refs = const_cast<AttentionModel*>(this)->params();
    return ConstParamRefs<Real>(refs.begin(), refs.end());
  }

  ParamRefs<Real> trunk_params() {
    ParamRefs<Real> out;
    trunk.collect(out);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }
};

template <typename Real>
AttentionModel<Real> build_attention_model(const AttentionConfig& cfg_in, std::uint64_t seed) {
  cfg_in.validate();
  const AttentionConfig cfg = cfg_in.resolved();
  AttentionModel<Real> m;
  m.config = cfg;
  m.trunk = SharedTrunk<Real>(cfg.encoder);
  const int p = cfg.encoder.projection_dim;
  if (cfg.extra_layers > 0) {
    m.lower = BiLstmStack<Real>("encoder.lower", p, cfg.extra_hidden, cfg.extra_layers - 1);
    const int top_in = cfg.extra_layers > 1 ? 2 * cfg.extra_hidden : p;
    m.top = BiLstmStack<Real>("encoder.top", top_in, cfg.extra_hidden, 1);
  }
  const int e = cfg.encoder_output_dim();
  const int hd = cfg.decoder_hidden;
  m.query = Parameter<Real>("attention.query", hd, cfg.attention_dim);
  m.key = Linear<Real>("attention.key", e, cfg.attention_dim);
  m.score = Parameter<Real>("attention.v", 1, cfg.attention_dim);
  m.embedding = Parameter<Real>("decoder.embedding", cfg.vocab + 1, cfg.embedding_dim);
  int in = cfg.embedding_dim + e;
  for (int k = 0; k < cfg.decoder_layers; ++k) {
    m.decoder.emplace_back(str_cat("decoder.l", k), in, hd, Direction::kForward);
    in = hd;
  }
  m.output = Linear<Real>("decoder.output", hd + e, cfg.vocab);

  // Trunk first, so the remaining parameters draw the same values whether
  // or not the trunk is later overwritten by a transfer.
  Rng rng(seed);
  m.trunk.init(rng);
  m.lower.init(rng);
  m.top.init(rng);
  init_uniform_fan_in(m.query.value, hd, rng);
  m.key.init(rng);
  init_uniform_fan_in(m.score.value, cfg.attention_dim, rng);
  init_uniform_fan_in(m.embedding.value, cfg.embedding_dim, rng);
  for (auto& l : m.decoder) l.init(rng);
  m.output.init(rng);
  return m;
}

// ---------------------------------------------------------------------------
// Encoder

template <typename Real>
struct EncoderCache {
  TrunkCache<Real> trunk;
  Matrix<Real> drop_lower;  // dropout mask on the projection output
  BiLstmStackCache<Real> lower;
  PoolIndex pool;
  Matrix<Real> drop_top;  // dropout mask on the pooled activations
  BiLstmStackCache<Real> top;
};

template <typename Real>
Matrix<Real> encode(const AttentionModel<Real>& m, const Matrix<Real>& features, bool training,
                    Rng* rng, EncoderCache<Real>* cache) {
  const double rate = m.config.encoder.dropout_rate;
  const bool drop = training && rate > 0.0;
  if (drop && rng == nullptr) throw ConfigError("encoder: dropout needs an rng");
  TrunkCache<Real>* tc = cache ? &cache->trunk : nullptr;
  Matrix<Real> x = m.trunk.forward(features, training, rng, tc);
  if (m.config.extra_layers == 0)
    return maxpool_time(x, m.config.pool_width, cache ? &cache->pool : nullptr);

  if (m.lower.depth() > 0) {
    if (drop) {
      auto d = dropout_apply(x, rate, *rng);
      x = std::move(d.output);
      if (cache) cache->drop_lower = std::move(d.mask);
    }
    x = m.lower.forward(x, rate, training, rng, cache ? &cache->lower : nullptr);
  }
  x = maxpool_time(x, m.config.pool_width, cache ? &cache->pool : nullptr);
  if (drop) {
    auto d = dropout_apply(x, rate, *rng);
    x = std::move(d.output);
    if (cache) cache->drop_top = std::move(d.mask);
  }
  return m.top.forward(x, rate, training, rng, cache ? &cache->top : nullptr);
}

template <typename Real>
void encode_backward(AttentionModel<Real>& m, const EncoderCache<Real>& cache,
                     const Matrix<Real>& grad_enc) {
  Matrix<Real> g;
  if (m.config.extra_layers == 0) {
    g = maxpool_time_backward(grad_enc, cache.pool);
  } else {
    g = m.top.backward(cache.top, grad_enc);
    if (cache.drop_top.size() > 0) g = dropout_backward(g, cache.drop_top);
    g = maxpool_time_backward(g, cache.pool);
    if (m.lower.depth() > 0) {
      g = m.lower.backward(cache.lower, g);
      if (cache.drop_lower.size() > 0) g = dropout_backward(g, cache.drop_lower);
    }
  }
  m.trunk.backward(cache.trunk, g);
}

// ---------------------------------------------------------------------------
// Decoder

template <typename Real>
using DecoderState = std::vector<LstmState<Real>>;

template <typename Real>
DecoderState<Real> initial_decoder_state(const AttentionModel<Real>& m) {
  return DecoderState<Real>(m.decoder.size(), LstmState<Real>::zeros(m.decoder_hidden()));
}

template <typename Real>
struct AttentionStepCache {
  RowVector<Real> query_input;  // previous top hidden state
  Matrix<Real> scoring_tanh;    // T' x A
  RowVector<Real> weights;      // T'
  RowVector<Real> context;      // E
  int prev_label = 0;
  std::vector<LstmStepCache<Real>> layers;
  RowVector<Real> output_input;  // [s_i | c_i]
  RowVector<Real> logprobs;
};

template <typename Real>
struct AttentionStepResult {
  RowVector<Real> context;
  RowVector<Real> weights;
  DecoderState<Real> state;
  RowVector<Real> logprobs;
};

/// Encoder keys h_j W_k + b_k, computed once per utterance.
template <typename Real>
Matrix<Real> attention_keys(const AttentionModel<Real>& m, const Matrix<Real>& enc) {
  return m.key.forward(enc);
}

/// One decoder step.
template <typename Real>
AttentionStepResult<Real> attention_step(const AttentionModel<Real>& m,
                                         const DecoderState<Real>& state,
                                         const Matrix<Real>& enc, const Matrix<Real>& keys,
                                         int prev_label,
                                         AttentionStepCache<Real>* cache = nullptr) {
  const int hd = m.decoder_hidden();
  if (enc.cols() != m.encoder_dim() || keys.rows() != enc.rows())
    throw ConfigError("attention_step: encoder output shape mismatch");
  if (prev_label < 0 || prev_label > m.config.vocab)
    throw InvalidTargetError(str_cat("attention_step: symbol ", prev_label, " out of range"));
  const RowVector<Real>& s_prev = state.back().h;
  const RowVector<Real> q = s_prev * m.query.value;
  Matrix<Real> th = keys;
  th.rowwise() += q;
  th = th.array().tanh().matrix();
  RowVector<Real> e = (th * m.score.value.transpose()).transpose();
  const Real emax = e.maxCoeff();
  RowVector<Real> w = (e.array() - emax).exp().matrix();
  w /= w.sum();

  AttentionStepResult<Real> r;
  r.weights = w;
  r.context = w * enc;

  RowVector<Real> x(m.config.embedding_dim + m.encoder_dim());
  x.head(m.config.embedding_dim) = m.embedding.value.row(prev_label);
  x.tail(m.encoder_dim()) = r.context;

  if (cache) {
    cache->layers.resize(m.decoder.size());
    cache->query_input = s_prev;
    cache->prev_label = prev_label;
  }
  r.state.resize(m.decoder.size());
  for (std::size_t k = 0; k < m.decoder.size(); ++k) {
    r.state[k] = lstm_step_forward(m.decoder[k], k == 0 ? x : r.state[k - 1].h, state[k],
                                   cache ? &cache->layers[k] : nullptr);
  }
  RowVector<Real> o(hd + m.encoder_dim());
  o.head(hd) = r.state.back().h;
  o.tail(m.encoder_dim()) = r.context;
  RowVector<Real> logits = o * m.output.weight.value + m.output.bias.value.row(0);
  r.logprobs = log_softmax_row(logits);
  if (cache) {
    cache->scoring_tanh = std::move(th);
    cache->weights = r.weights;
    cache->context = r.context;
    cache->output_input = std::move(o);
    cache->logprobs = r.logprobs;
  }
  return r;
}

/// Backward of one step. `carry` holds dL/d(state) coming from later steps
/// and is replaced by dL/d(previous state). Encoder and key gradients are
/// accumulated into grad_enc / grad_keys.
template <typename Real>
void attention_step_backward(AttentionModel<Real>& m, const AttentionStepCache<Real>& c,
                             const Matrix<Real>& enc, const RowVector<Real>& grad_logits,
                             DecoderState<Real>& carry, Matrix<Real>& grad_enc,
                             Matrix<Real>& grad_keys) {
  const int hd = m.decoder_hidden();
  const int e_dim = m.encoder_dim();
  const int emb = m.config.embedding_dim;
  const std::size_t L = m.decoder.size();

  m.output.weight.grad.noalias() += c.output_input.transpose() * grad_logits;
  m.output.bias.grad += grad_logits;
  const RowVector<Real> d_o = grad_logits * m.output.weight.value.transpose();
  RowVector<Real> d_ctx = d_o.tail(e_dim);

  DecoderState<Real> prev_grad(L);
  RowVector<Real> dh = carry[L - 1].h + d_o.head(hd);
  for (std::size_t k = L; k-- > 0;) {
    const RowVector<Real> dx = lstm_step_backward(m.decoder[k], c.layers[k], dh, carry[k].c,
                                                  prev_grad[k]);
    if (k > 0) {
      dh = carry[k - 1].h + dx;
    } else {
      m.embedding.grad.row(c.prev_label) += dx.head(emb);
      d_ctx += dx.tail(e_dim);
    }
  }

  // Attention scoring.
  const RowVector<Real> d_w = (enc * d_ctx.transpose()).transpose();
  grad_enc.noalias() += c.weights.transpose() * d_ctx;
  const Real dot = c.weights.dot(d_w);
  const RowVector<Real> d_e = c.weights.cwiseProduct((d_w.array() - dot).matrix());
  m.score.grad.noalias() += d_e * c.scoring_tanh;
  Matrix<Real> d_pre = (d_e.transpose() * m.score.value).cwiseProduct(
      (Real(1) - c.scoring_tanh.array().square()).matrix());
  grad_keys += d_pre;
  const RowVector<Real> d_q = d_pre.colwise().sum();
  m.query.grad.noalias() += c.query_input.transpose() * d_q;
  prev_grad[L - 1].h += d_q * m.query.value.transpose();

  carry = std::move(prev_grad);
}

// ---------------------------------------------------------------------------
// Training loss

template <typename Real>
struct AttentionLoss {
  Real loss = 0;
  int steps = 0;
  int sampled_feeds = 0;  // steps that consumed a model sample instead of the target
  std::vector<int> fed_labels;
};

/// Sequence cross-entropy with scheduled sampling. Target symbols are fed
/// back with probability 1 - sampling_rate; otherwise a symbol is drawn from
/// the model's previous output distribution. If `backprop` is set, gradients
/// of the summed loss accumulate into the model.
template <typename Real>
AttentionLoss<Real> attention_forward_train(AttentionModel<Real>& m, const Matrix<Real>& features,
                                            const LabelSequence& target, double sampling_rate,
                                            Rng* rng, bool training, bool backprop) {
  if (target.empty()) throw InvalidTargetError("attention: empty target");
  for (int k : target)
    if (k < 1 || k >= m.config.vocab)
      throw InvalidTargetError(str_cat("attention: label ", k, " out of range"));
  if (!(sampling_rate >= 0.0 && sampling_rate <= 1.0))
    throw ConfigError("attention: sampling rate must be in [0, 1]");
  if (sampling_rate > 0.0 && rng == nullptr)
    throw ConfigError("attention: sampling needs an rng");

  EncoderCache<Real> enc_cache;
  const Matrix<Real> enc = encode(m, features, training, rng, backprop ? &enc_cache : nullptr);
  const Matrix<Real> keys = attention_keys(m, enc);

  std::vector<int> outputs = target;
  outputs.push_back(kEndOfSequence);
  const std::size_t n = outputs.size();

  AttentionLoss<Real> res;
  res.steps = static_cast<int>(n);
  std::vector<AttentionStepCache<Real>> caches(backprop ? n : 0);
  DecoderState<Real> state = initial_decoder_state(m);
  int prev = m.config.start_symbol();
  for (std::size_t i = 0; i < n; ++i) {
    res.fed_labels.push_back(prev);
    auto step = attention_step(m, state, enc, keys, prev, backprop ? &caches[i] : nullptr);
    res.loss -= step.logprobs(outputs[i]);
    state = std::move(step.state);
    prev = outputs[i];
    if (sampling_rate > 0.0 && i + 1 < n && rng->uniform() < sampling_rate) {
      // Draw from the model's own distribution at this step.
      double u = rng->uniform(), acc = 0.0;
      int drawn = static_cast<int>(step.logprobs.size()) - 1;
      for (Eigen::Index k = 0; k < step.logprobs.size(); ++k) {
        acc += std::exp(static_cast<double>(step.logprobs(k)));
        if (u < acc) {
          drawn = static_cast<int>(k);
          break;
        }
      }
      prev = drawn;
      ++res.sampled_feeds;
    }
  }
  if (!std::isfinite(static_cast<double>(res.loss)))
    throw NumericError("attention: non-finite sequence loss");

  if (backprop) {
    Matrix<Real> grad_enc = Matrix<Real>::Zero(enc.rows(), enc.cols());
    Matrix<Real> grad_keys = Matrix<Real>::Zero(keys.rows(), keys.cols());
    DecoderState<Real> carry = initial_decoder_state(m);
    for (std::size_t i = n; i-- > 0;) {
      RowVector<Real> g = caches[i].logprobs.array().exp().matrix();
      g(outputs[i]) -= Real(1);
      attention_step_backward(m, caches[i], enc, g, carry, grad_enc, grad_keys);
    }
    grad_enc += m.key.backward(enc, grad_keys);
    encode_backward(m, enc_cache, grad_enc);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Decoding

namespace detail {

template <typename Real>
struct AttnBeamEntry {
  LabelSequence labels;
  double score = 0;
  DecoderState<Real> state;
  int prev = 0;
};

}  // namespace detail

/// Beam search over output symbols. A hypothesis ends when it emits
/// end-of-sequence; after max_len labels only end-of-sequence is allowed.
/// Candidates from all live hypotheses compete for `beam` slots per step,
/// finished and unfinished alike.
template <typename Real>
std::vector<Hypothesis> attention_beam_decode(const AttentionModel<Real>& m,
                                              const Matrix<Real>& features, int beam,
                                              int max_len) {
  if (beam < 1) throw ConfigError("attention_beam_decode: beam must be >= 1");
  if (max_len < 1) throw ConfigError("attention_beam_decode: max_len must be >= 1");
  const Matrix<Real> enc = encode<Real>(m, features, false, nullptr, nullptr);
  const Matrix<Real> keys = attention_keys(m, enc);

  std::vector<detail::AttnBeamEntry<Real>> alive(1);
  alive[0].state = initial_decoder_state(m);
  alive[0].prev = m.config.start_symbol();
  std::vector<Hypothesis> finished;

  struct Candidate {
    std::size_t parent;
    int symbol;
    double score;
    LabelSequence labels;  // for tie-breaking
  };

  for (int len = 0; len <= max_len && !alive.empty(); ++len) {
    std::vector<Candidate> cands;
    std::vector<AttentionStepResult<Real>> steps;
    steps.reserve(alive.size());
    for (std::size_t a = 0; a < alive.size(); ++a) {
      steps.push_back(attention_step(m, alive[a].state, enc, keys, alive[a].prev));
      const auto& lp = steps.back().logprobs;
      for (int k = 0; k < m.config.vocab; ++k) {
        if (len == max_len && k != kEndOfSequence) continue;
        Candidate c{a, k, alive[a].score + static_cast<double>(lp(k)), alive[a].labels};
        c.labels.push_back(k);
        cands.push_back(std::move(c));
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
      if (x.score != y.score) return x.score > y.score;
      return x.labels < y.labels;
    });
    if (static_cast<int>(cands.size()) > beam) cands.resize(static_cast<std::size_t>(beam));
    std::vector<detail::AttnBeamEntry<Real>> next;
    for (auto& c : cands) {
      if (c.symbol == kEndOfSequence) {
        finished.push_back({alive[c.parent].labels, c.score});
      } else {
        detail::AttnBeamEntry<Real> e;
        e.labels = alive[c.parent].labels;
        e.labels.push_back(c.symbol);
        e.score = c.score;
        e.state = steps[c.parent].state;
        e.prev = c.symbol;
        next.push_back(std::move(e));
      }
    }
    alive = std::move(next);
  }
  std::sort(finished.begin(), finished.end(), detail::hyp_before);
  if (static_cast<int>(finished.size()) > beam) finished.resize(static_cast<std::size_t>(beam));
  return finished;
}

/// Greedy autoregressive decoding (argmax feed-back).
template <typename Real>
LabelSequence attention_greedy_decode(const AttentionModel<Real>& m, const Matrix<Real>& features,
                                      int max_len) {
  const Matrix<Real> enc = encode<Real>(m, features, false, nullptr, nullptr);
  const Matrix<Real> keys = attention_keys(m, enc);
  DecoderState<Real> state = initial_decoder_state(m);
  int prev = m.config.start_symbol();
  LabelSequence out;
  for (int len = 0; len < max_len; ++len) {
    auto step = attention_step(m, state, enc, keys, prev);
    Eigen::Index arg;
    step.logprobs.maxCoeff(&arg);
    if (arg == kEndOfSequence) break;
    out.push_back(static_cast<int>(arg));
    state = std::move(step.state);
    prev = static_cast<int>(arg);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Encoder transfer

/// Builds an attention model (fresh parameters from `seed`) and overwrites
/// its trunk with the checkpoint's trunk tensors, bit for bit.
template <typename Real>
AttentionModel<Real> transfer_encoder(const Checkpoint& ckpt, const AttentionConfig& cfg,
                                      std::uint64_t seed) {
  AttentionModel<Real> m = build_attention_model<Real>(cfg, seed);
  std::vector<std::string> mismatched;
  if (ckpt.config.contains("encoder")) {
    SharedEncoderConfig src = ckpt.config.at("encoder").get<SharedEncoderConfig>();
    SharedEncoderConfig dst = m.config.encoder;
    src.dropout_rate = dst.dropout_rate;  // regularization is not structure
    if (!(src == dst)) mismatched.push_back("config.encoder");
  }
  for (auto* p : m.trunk_params()) {
    if (!ckpt.has(p->name)) {
      mismatched.push_back(p->name + " (missing)");
      continue;
    }
    const TensorBlob& b = ckpt.blob(p->name);
    if (b.rows != p->value.rows() || b.cols != p->value.cols())
      mismatched.push_back(str_cat(p->name, " (", b.rows, "x", b.cols, " vs ", p->value.rows(),
                                   "x", p->value.cols(), ")"));
  }
  if (!mismatched.empty()) {
    std::string msg = "transfer_encoder: incompatible tensors:";
    for (const auto& n : mismatched) msg += " " + n;
    throw TransferError(msg, mismatched);
  }
  for (auto* p : m.trunk_params()) ckpt.get_into(*p);
  return m;
}

}  // namespace mtl
