// mtl/train/trainer.hpp

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

// Epoch loop shared by the multi-task and attention models.
//
// A mini-batch is a run of whole utterances from the epoch order. Each
// utterance's gradient is computed into a zeroed replica and the replicas are
// summed in batch order, so the update does not depend on how many worker
// threads computed them. The sum is divided by the batch size, clipped by
// global norm and handed to the optimizer.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtl/data/synthetic.hpp"
#include "mtl/data/transforms.hpp"
#include "mtl/decoder/ctc_decode.hpp"
#include "mtl/decoder/edit_distance.hpp"
#include "mtl/losses/ctc.hpp"
#include "mtl/losses/cross_entropy.hpp"
#include "mtl/losses/multitask.hpp"
#include "mtl/model/attention_model.hpp"
#include "mtl/model/checkpoint.hpp"
#include "mtl/model/multitask_model.hpp"
#include "mtl/train/optimizer.hpp"

namespace mtl {

enum class Stage { kJoint, kFinetuneCtc, kFinetuneCe, kAttention };

inline std::string stage_name(Stage s) {
  switch (s) {
    case Stage::kJoint: return "joint";
    case Stage::kFinetuneCtc: return "ctc";
    case Stage::kFinetuneCe: return "ce";
    case Stage::kAttention: return "attention";
  }
  return "?";
}

inline Stage parse_stage(const std::string& s) {
  if (s == "joint") return Stage::kJoint;
  if (s == "ctc" || s == "finetune_ctc") return Stage::kFinetuneCtc;
  if (s == "ce" || s == "finetune_ce") return Stage::kFinetuneCe;
  if (s == "attention") return Stage::kAttention;
  throw ConfigError("unknown stage '" + s + "' (joint|ctc|ce|attention)");
}

inline std::string ordering_name(Ordering o) {
  switch (o) {
    case Ordering::kAscending: return "asc";
    case Ordering::kDescending: return "desc";
    case Ordering::kRandom: return "random";
  }
  return "?";
}

inline Ordering parse_ordering(const std::string& s) {
  if (s == "asc" || s == "ascending") return Ordering::kAscending;
  if (s == "desc" || s == "descending") return Ordering::kDescending;
  if (s == "random") return Ordering::kRandom;
  throw ConfigError("unknown order '" + s + "' (asc|desc|random)");
}

inline std::string optimizer_name(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }

inline std::string ce_normalization_name(CeNormalization n) {
  return n == CeNormalization::kSum ? "sum" : "per_frame";
}

inline CeNormalization parse_ce_normalization(const std::string& s) {
  if (s == "sum") return CeNormalization::kSum;
  if (s == "per_frame") return CeNormalization::kPerFrame;
  throw ConfigError("unknown ce normalization '" + s + "' (sum|per_frame)");
}

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer '" + s + "' (sgd|adam)");
}

struct TrainConfig {
  Stage stage = Stage::kJoint;
  double lambda = 0.9;
  Ordering ordering = Ordering::kRandom;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double initial_lr = 0.05;
  double decay_factor = 0.8;
  double newbob_threshold = 0.005;
  int epochs = 30;
  int batch_size = 8;
  double clip_norm = 5.0;  // <= 0 disables
  CeNormalization ce_normalization = CeNormalization::kSum;
  double sampling_rate = 0.3;           // attention stage only
  int max_decode_len = 0;               // attention greedy decode; 0: 2 * longest target
  std::vector<double> speed_factors;    // extra perturbed copies (ctc / attention stages)
  std::string init_from;
  std::uint64_t seed = 1;
  bool save_checkpoints = true;

  /// SGD 0.05 / 0.8 for the CTC-style stages, Adam 1e-3 / 0.25 for attention.
  static TrainConfig defaults_for(Stage s) {
    TrainConfig c;
    c.stage = s;
    if (s == Stage::kAttention) {
      c.optimizer = OptimizerKind::kAdam;
      c.initial_lr = 1e-3;
      c.decay_factor = 0.25;
      c.epochs = 20;
    }
    return c;
  }

  bool uses_ctc_head() const { return stage == Stage::kJoint || stage == Stage::kFinetuneCtc; }
  bool uses_ce_head() const { return stage == Stage::kJoint || stage == Stage::kFinetuneCe; }

  void validate() const {
    check_lambda(lambda);
    require(initial_lr >= 0.0 && std::isfinite(initial_lr), "train.initial_lr must be >= 0");
    require(decay_factor > 0.0 && decay_factor < 1.0, "train.decay_factor must be in (0, 1)");
    require(newbob_threshold >= 0.0, "train.newbob_threshold must be >= 0");
    require(epochs >= 0, "train.epochs must be >= 0");
    require(batch_size >= 1, "train.batch_size must be >= 1");
    require(sampling_rate >= 0.0 && sampling_rate <= 1.0, "train.sampling_rate must be in [0, 1]");
    require(max_decode_len >= 0, "train.max_decode_len must be >= 0");
    for (double f : speed_factors)
      require(f >= 0.8 && f <= 1.25, "train.speed_factors entries must be in [0.8, 1.25]");
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"stage", stage_name(c.stage)},
                     {"lambda", c.lambda},
                     {"order", ordering_name(c.ordering)},
                     {"optimizer", optimizer_name(c.optimizer)},
                     {"initial_lr", c.initial_lr},
                     {"decay_factor", c.decay_factor},
                     {"newbob_threshold", c.newbob_threshold},
                     {"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"clip_norm", c.clip_norm},
                     {"ce_normalization", ce_normalization_name(c.ce_normalization)},
                     {"sampling_rate", c.sampling_rate},
                     {"max_decode_len", c.max_decode_len},
                     {"speed_factors", c.speed_factors},
                     {"init_from", c.init_from},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c = TrainConfig::defaults_for(parse_stage(j.at("stage").get<std::string>()));
  c.lambda = j.value("lambda", c.lambda);
  if (j.contains("order")) c.ordering = parse_ordering(j.at("order").get<std::string>());
  if (j.contains("optimizer")) c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  c.initial_lr = j.value("initial_lr", c.initial_lr);
  c.decay_factor = j.value("decay_factor", c.decay_factor);
  c.newbob_threshold = j.value("newbob_threshold", c.newbob_threshold);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  if (j.contains("ce_normalization"))
    c.ce_normalization = parse_ce_normalization(j.at("ce_normalization").get<std::string>());
  c.sampling_rate = j.value("sampling_rate", c.sampling_rate);
  c.max_decode_len = j.value("max_decode_len", c.max_decode_len);
  c.speed_factors = j.value("speed_factors", c.speed_factors);
  c.init_from = j.value("init_from", c.init_from);
  c.seed = j.value("seed", c.seed);
}

/// Worker count: MTL_DETERMINISTIC=1 forces 1, else MTL_NUM_THREADS, else 1.
inline int worker_threads() {
  if (const char* d = std::getenv("MTL_DETERMINISTIC"); d && std::string(d) == "1") return 1;
  if (const char* n = std::getenv("MTL_NUM_THREADS")) {
    const int v = std::atoi(n);
    if (v >= 1) return v;
  }
  return 1;
}

inline bool deterministic_mode() {
  const char* d = std::getenv("MTL_DETERMINISTIC");
  return d && std::string(d) == "1";
}

/// One utterance converted to the model precision, with CE labels at the
/// model frame rate.
template <typename Real>
struct PreparedUtterance {
  std::string id;
  Matrix<Real> features;
  LabelSequence labels;
  FrameLabels frame_labels;  // empty if unavailable
  int frames = 0;
};

template <typename Real>
std::vector<PreparedUtterance<Real>> prepare_utterances(const std::vector<UtteranceRecord>& records,
                                                        bool frame_stacking,
                                                        const std::vector<double>& speed_factors = {}) {
  std::vector<PreparedUtterance<Real>> out;
  auto add = [&](const UtteranceRecord& r) {
    PreparedUtterance<Real> p;
    p.id = r.id;
    p.features = r.features.template cast<Real>();
    p.labels = r.ctc_labels;
    if (!r.frame_labels.empty())
      p.frame_labels = frame_stacking ? downsample_frame_labels(r.frame_labels) : r.frame_labels;
    p.frames = r.num_frames();
    out.push_back(std::move(p));
  };
  for (const auto& r : records) add(r);
  for (double f : speed_factors)
    for (const auto& r : records) add(speed_perturb_utterance(r, f));
  return out;
}

struct UtteranceLoss {
  double loss = 0;
  double ctc = 0;
  double ce = 0;
};

template <typename Real>
UtteranceLoss utterance_step(MultiTaskModel<Real>& m, const PreparedUtterance<Real>& u,
                             const TrainConfig& cfg, Rng& rng) {
  auto out = forward_multitask(m, u.features, true, &rng);
  UtteranceLoss r;
  Matrix<Real> g_ctc, g_ce;
  if (cfg.stage == Stage::kJoint) {
    if (u.frame_labels.empty())
      throw InvalidTargetError("joint training needs frame labels (" + u.id + ")");
    auto ctc = ctc_loss_and_grad(out.ctc_logprobs, u.labels).result;
    auto ce = framewise_ce_loss(out.ce_logprobs, u.frame_labels, cfg.ce_normalization);
    const auto c = combine_losses(ctc, ce, cfg.lambda);
    r = {static_cast<double>(c.loss), static_cast<double>(ctc.loss), static_cast<double>(ce.loss)};
    // A zero-weighted head contributes nothing, not even a zero gradient.
    if (c.ctc_scale != Real(0)) g_ctc = c.ctc_scale * ctc.grad_logits;
    if (c.ce_scale != Real(0)) g_ce = c.ce_scale * ce.grad_logits;
  } else if (cfg.stage == Stage::kFinetuneCtc) {
    auto ctc = ctc_loss_and_grad(out.ctc_logprobs, u.labels).result;
    r = {static_cast<double>(ctc.loss), static_cast<double>(ctc.loss), 0.0};
    g_ctc = std::move(ctc.grad_logits);
  } else if (cfg.stage == Stage::kFinetuneCe) {
    if (u.frame_labels.empty())
      throw InvalidTargetError("ce training needs frame labels (" + u.id + ")");
    auto ce = framewise_ce_loss(out.ce_logprobs, u.frame_labels, cfg.ce_normalization);
    r = {static_cast<double>(ce.loss), 0.0, static_cast<double>(ce.loss)};
    g_ce = std::move(ce.grad_logits);
  } else {
    throw ConfigError("multi-task model cannot train the attention stage");
  }
  if (!std::isfinite(r.loss)) throw NumericError("non-finite loss on " + u.id);
  backward_multitask(m, out.cache, g_ctc, g_ce);
  return r;
}

template <typename Real>
UtteranceLoss utterance_step(AttentionModel<Real>& m, const PreparedUtterance<Real>& u,
                             const TrainConfig& cfg, Rng& rng) {
  if (cfg.stage != Stage::kAttention)
    throw ConfigError("attention model only trains the attention stage");
  auto l = attention_forward_train(m, u.features, u.labels, cfg.sampling_rate, &rng, true, true);
  return {static_cast<double>(l.loss), 0.0, 0.0};
}

struct EvalMetrics {
  double cv_loss = 0;
  std::optional<double> ctc_loss;
  std::optional<double> ce_loss;
  double ter = 0;
  std::optional<double> frame_error_rate;
  EditStats edits;
};

/// Dropout off, no randomness. cv_loss follows the stage: combined for
/// joint, the single head for ctc / ce. Losses are means per utterance.
template <typename Real>
EvalMetrics evaluate(const MultiTaskModel<Real>& m, const std::vector<PreparedUtterance<Real>>& data,
                     const TrainConfig& cfg) {
  EvalMetrics e;
  double ctc_sum = 0, ce_sum = 0, frames = 0, wrong = 0;
  bool have_ce = true;
  for (const auto& u : data) {
    auto out = forward_multitask(m, u.features, false, nullptr);
    ctc_sum += static_cast<double>(ctc_loss_and_grad(out.ctc_logprobs, u.labels).result.loss);
    e.edits += edit_distance(u.labels, greedy_decode(out.ctc_logprobs));
    if (u.frame_labels.empty()) {
      have_ce = false;
    } else {
      ce_sum += static_cast<double>(
          framewise_ce_loss(out.ce_logprobs, u.frame_labels, cfg.ce_normalization).loss);
      wrong += framewise_errors(out.ce_logprobs, u.frame_labels);
      frames += static_cast<double>(u.frame_labels.size());
    }
  }
  const double n = std::max<double>(1.0, static_cast<double>(data.size()));
  e.ctc_loss = ctc_sum / n;
  if (have_ce && !data.empty()) {
    e.ce_loss = ce_sum / n;
    e.frame_error_rate = wrong / std::max(frames, 1.0);
  }
  e.ter = e.edits.error_rate();
  switch (cfg.stage) {
    case Stage::kFinetuneCtc:
      e.cv_loss = *e.ctc_loss;
      break;
    case Stage::kFinetuneCe:
      if (!e.ce_loss) throw InvalidTargetError("ce evaluation needs frame labels");
      e.cv_loss = *e.ce_loss;
      break;
    default:
      if (!e.ce_loss) throw InvalidTargetError("joint evaluation needs frame labels");
      e.cv_loss = static_cast<double>(
          combine_losses(*e.ctc_loss, *e.ce_loss, cfg.lambda).loss);
      break;
  }
  return e;
}

/// Teacher-forced sequence loss and greedy-decode TER.
template <typename Real>
EvalMetrics evaluate(const AttentionModel<Real>& m, const std::vector<PreparedUtterance<Real>>& data,
                     const TrainConfig& cfg) {
  EvalMetrics e;
  int max_len = cfg.max_decode_len;
  if (max_len == 0)
    for (const auto& u : data) max_len = std::max(max_len, 2 * static_cast<int>(u.labels.size()));
  max_len = std::max(max_len, 1);
  double sum = 0;
  auto& mm = const_cast<AttentionModel<Real>&>(m);  // forward only, no gradient writes
  for (const auto& u : data) {
    sum += static_cast<double>(
        attention_forward_train(mm, u.features, u.labels, 0.0, nullptr, false, false).loss);
    e.edits += edit_distance(u.labels, attention_greedy_decode(m, u.features, max_len));
  }
  e.cv_loss = sum / std::max<double>(1.0, static_cast<double>(data.size()));
  e.ter = e.edits.error_rate();
  return e;
}

struct EpochReport {
  int epoch = 0;
  double train_loss = 0;
  std::optional<double> train_ctc_loss;
  std::optional<double> train_ce_loss;
  double cv_loss = 0;
  std::optional<double> cv_ctc_loss;
  std::optional<double> cv_ce_loss;
  double ter = 0;
  std::optional<double> frame_error_rate;
  double lr = 0;         // rate used during this epoch
  double next_lr = 0;    // rate chosen by new-bob for the next epoch
  double wall_time = 0;  // seconds; 0 in deterministic mode

  void check_finite() const {
    auto ok = [](double v) { return std::isfinite(v); };
    auto ok_opt = [&](const std::optional<double>& v) { return !v || ok(*v); };
    if (!(ok(train_loss) && ok(cv_loss) && ok(ter) && ok(lr) && ok_opt(train_ctc_loss) &&
          ok_opt(train_ce_loss) && ok_opt(cv_ctc_loss) && ok_opt(cv_ce_loss) &&
          ok_opt(frame_error_rate)))
      throw NumericError(str_cat("non-finite metric at epoch ", epoch));
  }
};

inline nlohmann::json to_json_value(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline void to_json(nlohmann::json& j, const EpochReport& r) {
  j = nlohmann::json{{"epoch", r.epoch},
                     {"train_loss", r.train_loss},
                     {"train_ctc_loss", to_json_value(r.train_ctc_loss)},
                     {"train_ce_loss", to_json_value(r.train_ce_loss)},
                     {"cv_loss", r.cv_loss},
                     {"cv_ctc_loss", to_json_value(r.cv_ctc_loss)},
                     {"cv_ce_loss", to_json_value(r.cv_ce_loss)},
                     {"ter", r.ter},
                     {"frame_error_rate", to_json_value(r.frame_error_rate)},
                     {"lr", r.lr},
                     {"next_lr", r.next_lr},
                     {"wall_time", r.wall_time}};
}

namespace detail {

template <typename Real>
void copy_values(const ConstParamRefs<Real>& from, const ParamRefs<Real>& to) {
  for (std::size_t i = 0; i < from.size(); ++i) to[i]->value = from[i]->value;
}

}  // namespace detail

struct EpochTrainStats {
  double loss = 0;
  double ctc = 0;
  double ce = 0;
  std::size_t utterances = 0;
};

/// One pass over `order`. `epoch` and utterance positions seed the dropout /
/// sampling streams, so results do not depend on the worker count.
template <typename Model, typename Real>
EpochTrainStats train_epoch(Model& model, const std::vector<PreparedUtterance<Real>>& data,
                            const std::vector<std::size_t>& order, const TrainConfig& cfg,
                            Optimizer<Real>& opt, double lr, int epoch, int threads = 1) {
  EpochTrainStats st;
  ParamRefs<Real> main_params = model.params();
  const std::size_t B = static_cast<std::size_t>(cfg.batch_size);
  threads = std::max(1, std::min<int>(threads, cfg.batch_size));
  std::vector<Model> replicas(static_cast<std::size_t>(threads), model);
  std::vector<ParamRefs<Real>> replica_params;
  for (auto& r : replicas) replica_params.push_back(r.params());
  std::vector<Matrix<Real>> accum(main_params.size());

  for (std::size_t start = 0; start < order.size(); start += B) {
    const std::size_t end = std::min(order.size(), start + B);
    const std::size_t n = end - start;
    const ConstParamRefs<Real> current(main_params.begin(), main_params.end());
    for (auto& rp : replica_params) detail::copy_values(current, rp);
    for (std::size_t i = 0; i < accum.size(); ++i)
      accum[i] = Matrix<Real>::Zero(main_params[i]->value.rows(), main_params[i]->value.cols());

    std::vector<UtteranceLoss> losses(n);
    auto run_one = [&](std::size_t w, std::size_t k) {
      Model& rm = replicas[w];
      rm.zero_grad();
      Rng rng(derive_seed(cfg.seed, 0x747261696eull, static_cast<std::uint64_t>(epoch),
                          static_cast<std::uint64_t>(start + k)));
      losses[k] = utterance_step(rm, data[order[start + k]], cfg, rng);
    };

    if (threads == 1) {
      for (std::size_t k = 0; k < n; ++k) {
        run_one(0, k);
        for (std::size_t i = 0; i < accum.size(); ++i) accum[i] += replica_params[0][i]->grad;
      }
    } else {
      // Keep each utterance's gradient so the sum runs in batch order.
      std::vector<std::vector<Matrix<Real>>> grads(n);
      std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
      std::vector<std::thread> pool;
      for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t k = static_cast<std::size_t>(w); k < n;
                 k += static_cast<std::size_t>(threads)) {
              run_one(static_cast<std::size_t>(w), k);
              for (auto* p : replica_params[static_cast<std::size_t>(w)]) grads[k].push_back(p->grad);
            }
          } catch (...) {
            errors[static_cast<std::size_t>(w)] = std::current_exception();
          }
        });
      }
      for (auto& t : pool) t.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < accum.size(); ++i) accum[i] += grads[k][i];
    }

    const Real inv = Real(1) / static_cast<Real>(n);
    for (std::size_t i = 0; i < accum.size(); ++i) main_params[i]->grad = accum[i] * inv;
    check_finite_gradients(main_params);
    clip_global_norm(main_params, cfg.clip_norm);
    opt.step(main_params, lr);
    for (const auto& l : losses) {
      st.loss += l.loss;
      st.ctc += l.ctc;
      st.ce += l.ce;
    }
    st.utterances += n;
  }
  if (st.utterances > 0) {
    const double d = static_cast<double>(st.utterances);
    st.loss /= d;
    st.ctc /= d;
    st.ce /= d;
  }
  return st;
}

// ---------------------------------------------------------------------------
// Checkpoints of whole models

template <typename Real>
nlohmann::json model_config_json(const MultiTaskModel<Real>& m) {
  return {{"model", "multitask"},
          {"encoder", m.config},
          {"ctc_vocab", m.ctc_vocab},
          {"ce_states", m.ce_states},
          {"dtype", dtype_name<Real>()}};
}

template <typename Real>
nlohmann::json model_config_json(const AttentionModel<Real>& m) {
  return {{"model", "attention"},
          {"encoder", m.config.encoder},
          {"attention", m.config},
          {"dtype", dtype_name<Real>()}};
}

template <typename Model>
Checkpoint make_checkpoint(Model& m, int epoch, const nlohmann::json& train_echo,
                           const std::string& rng_state) {
  Checkpoint c;
  c.config = model_config_json(m);
  c.config["train"] = train_echo;
  c.epoch = epoch;
  c.rng_state = rng_state;
  c.put_all(m.params());
  return c;
}

inline std::string checkpoint_model_kind(const Checkpoint& c) {
  return c.config.value("model", std::string());
}

template <typename Real>
MultiTaskModel<Real> load_multitask_model(const Checkpoint& c) {
  if (checkpoint_model_kind(c) != "multitask")
    throw LoadError("checkpoint does not hold a multi-task model");
  auto m = build_multitask_model<Real>(c.config.at("encoder").get<SharedEncoderConfig>(),
                                       c.config.at("ctc_vocab").get<int>(),
                                       c.config.at("ce_states").get<int>(), 0);
  c.get_all(m.params());
  return m;
}

template <typename Real>
AttentionModel<Real> load_attention_model(const Checkpoint& c) {
  if (checkpoint_model_kind(c) != "attention")
    throw LoadError("checkpoint does not hold an attention model");
  auto m = build_attention_model<Real>(c.config.at("attention").get<AttentionConfig>(), 0);
  c.get_all(m.params());
  return m;
}

inline std::string checkpoint_name(int epoch) { return str_cat("ckpt-epoch-", epoch); }

// ---------------------------------------------------------------------------
// Run driver

struct RunResult {
  std::vector<EpochReport> reports;
  int best_epoch = 0;
  double best_cv_loss = std::numeric_limits<double>::infinity();
};

/// Trains `model` for cfg.epochs, writing metrics.jsonl, ckpt-epoch-N and
/// a `best` pointer into run_dir (empty run_dir: nothing is written).
/// Metrics are flushed per epoch; a numeric failure leaves the last good
/// checkpoint in place.
template <typename Model, typename Real>
RunResult train_run(Model& model, const std::vector<PreparedUtterance<Real>>& train,
                    const std::vector<PreparedUtterance<Real>>& cv, const TrainConfig& cfg,
                    const std::string& run_dir, const nlohmann::json& echo = nullptr) {
  cfg.validate();
  namespace fs = std::filesystem;
  const bool write = !run_dir.empty();
  std::ofstream metrics;
  if (write) {
    fs::create_directories(run_dir);
    metrics.open(fs::path(run_dir) / "metrics.jsonl", std::ios::trunc);
    if (!metrics) throw Error("cannot write metrics in " + run_dir);
  }
  nlohmann::json train_echo = echo.is_null() ? nlohmann::json(cfg) : echo;

  const int threads = worker_threads();
  const bool deterministic = deterministic_mode();
  std::vector<int> lengths;
  for (const auto& u : train) lengths.push_back(u.frames);

  Optimizer<Real> opt(cfg.optimizer);
  NewBobState nb(cfg.initial_lr, cfg.newbob_threshold);
  RunResult res;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng order_rng(derive_seed(cfg.seed, 0x6f72646572ull, static_cast<std::uint64_t>(epoch)));
    const auto order = order_utterances(lengths, cfg.ordering, order_rng);
    const double lr = nb.current_lr;
    const auto st = train_epoch(model, train, order, cfg, opt, lr, epoch, threads);
    const EvalMetrics ev = evaluate(model, cv, cfg);

    EpochReport r;
    r.epoch = epoch;
    r.train_loss = st.loss;
    if (cfg.uses_ctc_head()) r.train_ctc_loss = st.ctc;
    if (cfg.uses_ce_head()) r.train_ce_loss = st.ce;
    r.cv_loss = ev.cv_loss;
    r.cv_ctc_loss = ev.ctc_loss;
    r.cv_ce_loss = ev.ce_loss;
    r.ter = ev.ter;
    r.frame_error_rate = ev.frame_error_rate;
    r.lr = lr;
    r.check_finite();
    r.next_lr = newbob_update(nb, ev.cv_loss, cfg.decay_factor, epoch);
    if (!deterministic)
      r.wall_time =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (write) {
      if (cfg.save_checkpoints)
        make_checkpoint(model, epoch, train_echo, order_rng.state())
            .save((fs::path(run_dir) / checkpoint_name(epoch)).string());
      metrics << nlohmann::json(r).dump() << '\n';
      metrics.flush();
    }
    if (r.cv_loss < res.best_cv_loss) {
      res.best_cv_loss = r.cv_loss;
      res.best_epoch = epoch;
      if (write && cfg.save_checkpoints) {
        std::ofstream best(fs::path(run_dir) / "best", std::ios::trunc);
        best << checkpoint_name(epoch) << '\n';
      }
    }
    res.reports.push_back(r);
  }
  return res;
}

/// Reads metrics.jsonl from a run directory.
inline std::vector<nlohmann::json> read_metrics(const std::string& run_dir) {
  const auto path = std::filesystem::path(run_dir) / "metrics.jsonl";
  std::ifstream is(path);
  if (!is) throw LoadError("no metrics.jsonl in " + run_dir);
  std::vector<nlohmann::json> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw LoadError("corrupt metrics line in " + run_dir + ": " + e.what());
    }
  }
  return out;
}

/// Joint training into <dir>/joint, then a single-task fine-tune into
/// <dir>/finetune starting from <dir>/joint/ckpt-epoch-<snapshot_epoch>.
template <typename Real>
RunResult run_two_step(const SharedEncoderConfig& enc, int ctc_vocab, int ce_states,
                       const std::vector<UtteranceRecord>& train,
                       const std::vector<UtteranceRecord>& cv, const TrainConfig& joint_cfg,
                       TrainConfig finetune_cfg, int snapshot_epoch, const std::string& dir) {
  namespace fs = std::filesystem;
  require(joint_cfg.stage == Stage::kJoint, "two-step: first stage must be joint");
  require(finetune_cfg.stage == Stage::kFinetuneCtc || finetune_cfg.stage == Stage::kFinetuneCe,
          "two-step: second stage must be ctc or ce");
  const auto joint_dir = (fs::path(dir) / "joint").string();
  {
    auto model = build_multitask_model<Real>(enc, ctc_vocab, ce_states, joint_cfg.seed);
    const auto tr = prepare_utterances<Real>(train, enc.frame_stacking);
    const auto va = prepare_utterances<Real>(cv, enc.frame_stacking);
    train_run(model, tr, va, joint_cfg, joint_dir);
  }
  const auto snap = fs::path(joint_dir) / checkpoint_name(snapshot_epoch);
  if (!fs::exists(snap)) throw ConfigError("two-step: missing snapshot " + snap.string());
  finetune_cfg.init_from = snap.string();
  auto model = load_multitask_model<Real>(Checkpoint::load(snap.string()));
  const auto tr = prepare_utterances<Real>(
      train, enc.frame_stacking,
      finetune_cfg.stage == Stage::kFinetuneCtc ? finetune_cfg.speed_factors : std::vector<double>{});
  const auto va = prepare_utterances<Real>(cv, enc.frame_stacking);
  return train_run(model, tr, va, finetune_cfg, (fs::path(dir) / "finetune").string());
}

}  // namespace mtl
