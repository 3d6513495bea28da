// mtl/cli/commands.hpp

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

// Command bodies behind tools/mtl.cpp: corpus loading, training stages,
// the lambda sweep, decoding, evaluation and convergence tables.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtl/cli/config.hpp"
#include "mtl/data/dataset_io.hpp"
#include "mtl/data/synthetic.hpp"
#include "mtl/data/transforms.hpp"
#include "mtl/decoder/ctc_decode.hpp"
#include "mtl/model/attention_model.hpp"
#include "mtl/model/checkpoint.hpp"
#include "mtl/model/multitask_model.hpp"
#include "mtl/train/trainer.hpp"

namespace mtl {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Corpus

struct CorpusData {
  std::vector<UtteranceRecord> train;
  std::vector<UtteranceRecord> cv;
  int input_dim = 0;
  int ctc_vocab = 0;
  int ce_states = 0;
};

/// Normalizes (if configured) and splits; label inventory comes from the
/// generator spec when present, else from the data.* keys.
inline CorpusData split_corpus(std::vector<UtteranceRecord> records, const RunConfig& cfg,
                               const nlohmann::json& spec = nullptr) {
  if (records.empty()) throw InvalidTargetError("dataset is empty");
  CorpusData d;
  if (spec.is_object() && spec.contains("vocab_size")) {
    d.ctc_vocab = spec.at("vocab_size").get<int>();
    d.ce_states = d.ctc_vocab * spec.at("states_per_label").get<int>();
  } else {
    d.ctc_vocab = static_cast<int>(cfg.get_int("data.vocab_size"));
    d.ce_states = d.ctc_vocab * static_cast<int>(cfg.get_int("data.states_per_label"));
  }
  d.input_dim = static_cast<int>(records.front().features.cols());
  if (cfg.get_bool("data.normalize")) normalize_per_conversation(records);
  auto s = split_train_cv(records, cfg.get_double("data.cv_fraction"),
                          static_cast<std::uint64_t>(cfg.get_int("data.split_seed")));
  d.train = std::move(s.train);
  d.cv = std::move(s.cv);
  return d;
}

inline CorpusData load_corpus(const std::string& dir, const RunConfig& cfg) {
  auto ds = load_dataset(dir);
  return split_corpus(std::move(ds.records), cfg, ds.manifest.spec);
}

/// train, cv or all.
inline std::vector<UtteranceRecord> subset(const CorpusData& d, const std::string& which) {
  if (which == "train") return d.train;
  if (which == "cv") return d.cv;
  if (which == "all") {
    auto out = d.train;
    out.insert(out.end(), d.cv.begin(), d.cv.end());
    return out;
  }
  throw ConfigError("decode.subset must be train, cv or all (got '" + which + "')");
}

inline void cmd_gen_data(const RunConfig& cfg, const std::string& out_dir) {
  const SyntheticTaskSpec spec = cfg.data_spec();
  const auto records = generate_corpus(spec);
  save_dataset(out_dir, records, spec, cfg.get("data.feature_dtype"));
  cfg.write((fs::path(out_dir) / "config.resolved").string());
}

// ---------------------------------------------------------------------------
// Checkpoints

/// A run directory resolves to the checkpoint named in its `best` file.
inline std::string resolve_checkpoint_path(const std::string& path) {
  if (fs::is_directory(path)) {
    std::ifstream is(fs::path(path) / "best");
    std::string name;
    if (!(is >> name)) throw LoadError("no best checkpoint recorded in " + path);
    return (fs::path(path) / name).string();
  }
  return path;
}

template <typename Real>
void set_dropout(MultiTaskModel<Real>& m, double rate) {
  m.config.dropout_rate = rate;
  m.trunk.config.dropout_rate = rate;
}

template <typename Real>
void set_dropout(AttentionModel<Real>& m, double rate) {
  m.config.encoder.dropout_rate = rate;
  m.trunk.config.dropout_rate = rate;
}

// ---------------------------------------------------------------------------
// Training

template <typename Real>
RunResult run_training(const RunConfig& cfg, const CorpusData& d, const std::string& out_dir,
                       std::ostream* log = nullptr) {
  const TrainConfig tc = cfg.train();
  const SharedEncoderConfig enc = cfg.encoder(d.input_dim);
  const bool perturb = tc.stage == Stage::kFinetuneCtc || tc.stage == Stage::kAttention;
  if (!perturb && !tc.speed_factors.empty())
    throw ConfigError("train.speed_factors needs frame-free targets (stage ctc or attention)");
  const auto tr = prepare_utterances<Real>(d.train, enc.frame_stacking,
                                           perturb ? tc.speed_factors : std::vector<double>{});
  const auto va = prepare_utterances<Real>(d.cv, enc.frame_stacking);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    cfg.write((fs::path(out_dir) / "config.resolved").string());
  }

  std::optional<Checkpoint> init;
  if (!tc.init_from.empty()) init = Checkpoint::load(resolve_checkpoint_path(tc.init_from));
  const std::string kind = init ? checkpoint_model_kind(*init) : "";

  RunResult r;
  if (tc.stage == Stage::kAttention) {
    AttentionModel<Real> m;
    if (!init) {
      m = build_attention_model<Real>(cfg.attention(enc, d.ctc_vocab), tc.seed);
    } else if (kind == "multitask") {
      // The transferred trunk keeps its own structure; only dropout follows this run.
      SharedEncoderConfig src = init->config.at("encoder").get<SharedEncoderConfig>();
      src.dropout_rate = enc.dropout_rate;
      m = transfer_encoder<Real>(*init, cfg.attention(src, d.ctc_vocab), tc.seed);
    } else if (kind == "attention") {
      m = load_attention_model<Real>(*init);
      set_dropout(m, enc.dropout_rate);
    } else {
      throw ConfigError("init checkpoint has unknown model kind '" + kind + "'");
    }
    r = train_run(m, tr, va, tc, out_dir);
  } else {
    MultiTaskModel<Real> m;
    if (!init) {
      m = build_multitask_model<Real>(enc, d.ctc_vocab, d.ce_states, tc.seed);
    } else if (kind == "multitask") {
      m = load_multitask_model<Real>(*init);
      set_dropout(m, enc.dropout_rate);
    } else {
      throw ConfigError("stage " + stage_name(tc.stage) + " needs a multitask checkpoint, got '" +
                        kind + "'");
    }
    r = train_run(m, tr, va, tc, out_dir);
  }
  if (log)
    for (const auto& rep : r.reports) *log << nlohmann::json(rep).dump() << '\n';
  return r;
}

inline RunResult run_training_any(const RunConfig& cfg, const CorpusData& d,
                                  const std::string& out_dir, std::ostream* log = nullptr) {
  const std::string dtype = cfg.get("model.dtype");
  if (dtype == "f32") return run_training<float>(cfg, d, out_dir, log);
  if (dtype == "f64") return run_training<double>(cfg, d, out_dir, log);
  throw ConfigError("model.dtype must be f32 or f64 (got '" + dtype + "')");
}

// ---------------------------------------------------------------------------
// Lambda sweep

struct SweepRun {
  double lambda = 0;
  std::uint64_t seed = 0;
  double ter = 0;  // last epoch
  std::optional<double> frame_error_rate;
  int epochs_to_threshold = 0;  // budget + 1 when never reached
  bool censored = false;
  std::vector<EpochReport> reports;
};

struct SweepRow {
  double lambda = 0;
  int seeds = 0;
  double ter_mean = 0, ter_std = 0;
  double fer_mean = 0, fer_std = 0;
  double ett_mean = 0, ett_std = 0;
  int censored = 0;
};

/// First epoch whose TER is below `threshold`; budget + 1 if none.
inline int epochs_to_threshold(const std::vector<EpochReport>& reps, double threshold) {
  for (const auto& r : reps)
    if (r.ter < threshold) return r.epoch;
  return static_cast<int>(reps.size()) + 1;
}

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / static_cast<double>(v.size() - 1))};
}

inline std::string lambda_dir_name(double lambda) { return "lambda-" + format_number(lambda); }

/// One joint run per (lambda, seed) into out_dir/lambda-X/seed-S.
inline std::vector<SweepRun> lambda_sweep(const RunConfig& base, const CorpusData& d,
                                          const std::vector<double>& grid,
                                          const std::vector<std::uint64_t>& seeds,
                                          double ter_threshold, const std::string& out_dir,
                                          std::ostream* log = nullptr) {
  if (grid.empty()) throw ConfigError("sweep.grid is empty");
  if (seeds.empty()) throw ConfigError("sweep.seeds is empty");
  for (double l : grid) check_lambda(l);
  std::vector<SweepRun> runs;
  for (double lambda : grid) {
    for (std::uint64_t seed : seeds) {
      RunConfig c = base;
      c.set("train.stage", "joint");
      c.set("train.lambda", format_number(lambda));
      c.set("train.seed", std::to_string(seed));
      const std::string dir =
          out_dir.empty() ? "" : (fs::path(out_dir) / lambda_dir_name(lambda) /
                                  ("seed-" + std::to_string(seed))).string();
      RunResult r = run_training_any(c, d, dir);
      SweepRun s;
      s.lambda = lambda;
      s.seed = seed;
      s.reports = std::move(r.reports);
      if (!s.reports.empty()) {
        s.ter = s.reports.back().ter;
        s.frame_error_rate = s.reports.back().frame_error_rate;
      }
      s.epochs_to_threshold = epochs_to_threshold(s.reports, ter_threshold);
      s.censored = s.epochs_to_threshold > static_cast<int>(s.reports.size());
      if (log)
        *log << "lambda " << lambda << " seed " << seed << " ter " << s.ter << " epochs_to_threshold "
             << s.epochs_to_threshold << (s.censored ? " (censored)" : "") << std::endl;
      runs.push_back(std::move(s));
    }
  }
  return runs;
}

inline std::vector<SweepRow> summarize_sweep(const std::vector<SweepRun>& runs) {
  std::vector<SweepRow> rows;
  std::vector<double> order;
  for (const auto& r : runs)
    if (std::find(order.begin(), order.end(), r.lambda) == order.end()) order.push_back(r.lambda);
  for (double lambda : order) {
    std::vector<double> ter, fer, ett;
    SweepRow row;
    row.lambda = lambda;
    for (const auto& r : runs) {
      if (r.lambda != lambda) continue;
      ter.push_back(r.ter);
      if (r.frame_error_rate) fer.push_back(*r.frame_error_rate);
      ett.push_back(static_cast<double>(r.epochs_to_threshold));
      row.censored += r.censored ? 1 : 0;
    }
    row.seeds = static_cast<int>(ter.size());
    std::tie(row.ter_mean, row.ter_std) = mean_std(ter);
    std::tie(row.fer_mean, row.fer_std) = mean_std(fer);
    std::tie(row.ett_mean, row.ett_std) = mean_std(ett);
    rows.push_back(row);
  }
  return rows;
}

inline constexpr const char* kSweepHeader =
    "lambda,seeds,ter_mean,ter_std,fer_mean,fer_std,epochs_to_threshold_mean,"
    "epochs_to_threshold_std,censored";

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << kSweepHeader << '\n';
  for (const auto& r : rows)
    os << format_number(r.lambda) << ',' << r.seeds << ',' << format_number(r.ter_mean) << ','
       << format_number(r.ter_std) << ',' << format_number(r.fer_mean) << ','
       << format_number(r.fer_std) << ',' << format_number(r.ett_mean) << ','
       << format_number(r.ett_std) << ',' << r.censored << '\n';
}

inline void write_sweep_runs_csv(std::ostream& os, const std::vector<SweepRun>& runs) {
  os << "lambda,seed,ter,fer,epochs_to_threshold,censored\n";
  for (const auto& r : runs)
    os << format_number(r.lambda) << ',' << r.seed << ',' << format_number(r.ter) << ','
       << (r.frame_error_rate ? format_number(*r.frame_error_rate) : "") << ','
       << r.epochs_to_threshold << ',' << (r.censored ? 1 : 0) << '\n';
}

inline std::vector<SweepRow> cmd_lambda_sweep(const RunConfig& cfg, const std::string& data_dir,
                                              const std::string& out_dir, std::ostream* log) {
  const CorpusData d = load_corpus(data_dir, cfg);
  std::vector<std::uint64_t> seeds;
  for (double s : cfg.get_list("sweep.seeds")) {
    if (s < 0 || s != std::floor(s)) throw ConfigError("sweep.seeds must be non-negative integers");
    seeds.push_back(static_cast<std::uint64_t>(s));
  }
  fs::create_directories(out_dir);
  cfg.write((fs::path(out_dir) / "config.resolved").string());
  const auto runs = lambda_sweep(cfg, d, cfg.get_list("sweep.grid"), seeds,
                                 cfg.get_double("sweep.ter_threshold"), out_dir, log);
  const auto rows = summarize_sweep(runs);
  std::ofstream a(fs::path(out_dir) / "sweep.csv", std::ios::trunc);
  write_sweep_csv(a, rows);
  std::ofstream b(fs::path(out_dir) / "sweep_runs.csv", std::ios::trunc);
  write_sweep_runs_csv(b, runs);
  return rows;
}

// ---------------------------------------------------------------------------
// Decode and eval

struct DecodeOptions {
  std::string mode = "greedy";  // greedy | beam
  int beam = 12;
  int nbest = 1;
  int max_len = 0;  // attention only; 0: 2 * longest reference
};

inline DecodeOptions decode_options(const RunConfig& cfg) {
  DecodeOptions o;
  o.mode = cfg.get("decode.mode");
  o.beam = static_cast<int>(cfg.get_int("decode.beam"));
  o.nbest = static_cast<int>(cfg.get_int("decode.nbest"));
  o.max_len = static_cast<int>(cfg.get_int("decode.max_len"));
  if (o.mode != "greedy" && o.mode != "beam")
    throw ConfigError("decode.mode must be greedy or beam (got '" + o.mode + "')");
  require(o.beam >= 1, "decode.beam must be >= 1");
  require(o.nbest >= 1, "decode.nbest must be >= 1");
  require(o.max_len >= 0, "decode.max_len must be >= 0");
  return o;
}

inline void reject_empty(const std::vector<UtteranceRecord>& recs) {
  for (const auto& r : recs)
    if (r.features.rows() == 0)
      throw InvalidTargetError("decode: utterance " + r.id + " has no feature frames");
}

inline nlohmann::json decode_metadata(const std::string& kind, const DecodeOptions& o) {
  nlohmann::json j{{"model", kind}, {"mode", o.mode}, {"beam", o.beam}, {"nbest", o.nbest}};
  if (kind == "attention") {
    j["greedy_vs_beam1"] =
        "beam=1 keeps one hypothesis and feeds back its argmax symbol, so its 1-best equals greedy";
  } else {
    j["greedy_vs_beam1"] =
        "greedy collapses the best frame path; beam search scores a prefix by the sum over all "
        "its paths, so beam=1 can differ from greedy";
  }
  return j;
}

template <typename Real>
void decode_multitask(const MultiTaskModel<Real>& m, const std::vector<UtteranceRecord>& recs,
                      const DecodeOptions& o, std::ostream& os) {
  for (const auto& r : recs) {
    const Matrix<Real> x = r.features.template cast<Real>();
    const Matrix<Real> lp = forward_multitask(m, x, false).ctc_logprobs;
    std::vector<Hypothesis> hyps;
    if (o.mode == "greedy") {
      double score = 0;
      for (Eigen::Index t = 0; t < lp.rows(); ++t) score += static_cast<double>(lp.row(t).maxCoeff());
      hyps.push_back({greedy_decode(lp), score});
    } else {
      hyps = prefix_beam_search(lp, o.beam);
      if (static_cast<int>(hyps.size()) > o.nbest) hyps.resize(static_cast<std::size_t>(o.nbest));
    }
    write_nbest(os, r.id, hyps);
  }
}

template <typename Real>
void decode_attention(const AttentionModel<Real>& m, const std::vector<UtteranceRecord>& recs,
                      const DecodeOptions& o, std::ostream& os) {
  int max_len = o.max_len;
  if (max_len == 0)
    for (const auto& r : recs) max_len = std::max(max_len, 2 * static_cast<int>(r.ctc_labels.size()));
  max_len = std::max(max_len, 1);
  for (const auto& r : recs) {
    const Matrix<Real> x = r.features.template cast<Real>();
    auto hyps = attention_beam_decode(m, x, o.mode == "greedy" ? 1 : o.beam, max_len);
    const int keep = o.mode == "greedy" ? 1 : o.nbest;
    if (static_cast<int>(hyps.size()) > keep) hyps.resize(static_cast<std::size_t>(keep));
    write_nbest(os, r.id, hyps);
  }
}

/// Writes n-best lines to `os`; returns the metadata record.
inline nlohmann::json cmd_decode(const RunConfig& cfg, const std::string& ckpt_path,
                                 const std::string& data_dir, std::ostream& os) {
  const DecodeOptions o = decode_options(cfg);
  const Checkpoint ckpt = Checkpoint::load(resolve_checkpoint_path(ckpt_path));
  const CorpusData d = load_corpus(data_dir, cfg);
  const auto recs = subset(d, cfg.get("decode.subset"));
  reject_empty(recs);
  const std::string kind = checkpoint_model_kind(ckpt);
  const bool f32 = ckpt.config.value("dtype", std::string("f64")) == "f32";
  if (kind == "multitask") {
    if (f32)
      decode_multitask(load_multitask_model<float>(ckpt), recs, o, os);
    else
      decode_multitask(load_multitask_model<double>(ckpt), recs, o, os);
  } else if (kind == "attention") {
    if (f32)
      decode_attention(load_attention_model<float>(ckpt), recs, o, os);
    else
      decode_attention(load_attention_model<double>(ckpt), recs, o, os);
  } else {
    throw LoadError("checkpoint has unknown model kind '" + kind + "'");
  }
  return decode_metadata(kind, o);
}

inline nlohmann::json metrics_json(const EvalMetrics& e, std::size_t n) {
  return {{"utterances", n},
          {"cv_loss", e.cv_loss},
          {"ctc_loss", to_json_value(e.ctc_loss)},
          {"ce_loss", to_json_value(e.ce_loss)},
          {"ter", e.ter},
          {"frame_error_rate", to_json_value(e.frame_error_rate)},
          {"substitutions", e.edits.substitutions},
          {"deletions", e.edits.deletions},
          {"insertions", e.edits.insertions},
          {"reference_length", e.edits.ref_length}};
}

/// Evaluates a checkpoint; the loss definition follows its training config.
inline nlohmann::json evaluate_checkpoint(const Checkpoint& ckpt,
                                          const std::vector<UtteranceRecord>& recs,
                                          std::optional<TrainConfig> tc_override = std::nullopt) {
  const std::string kind = checkpoint_model_kind(ckpt);
  TrainConfig tc;
  if (tc_override) {
    tc = *tc_override;
  } else if (ckpt.config.contains("train") && ckpt.config.at("train").is_object()) {
    tc = ckpt.config.at("train").get<TrainConfig>();
  } else {
    tc = TrainConfig::defaults_for(kind == "attention" ? Stage::kAttention : Stage::kJoint);
  }
  const bool f32 = ckpt.config.value("dtype", std::string("f64")) == "f32";
  const bool stacking = ckpt.config.at("encoder").at("frame_stacking").get<bool>();
  EvalMetrics e;
  auto run = [&](auto tag) {
    using Real = decltype(tag);
    const auto data = prepare_utterances<Real>(recs, stacking);
    if (kind == "multitask")
      e = evaluate(load_multitask_model<Real>(ckpt), data, tc);
    else if (kind == "attention")
      e = evaluate(load_attention_model<Real>(ckpt), data, tc);
    else
      throw LoadError("checkpoint has unknown model kind '" + kind + "'");
  };
  if (f32)
    run(float{});
  else
    run(double{});
  nlohmann::json j = metrics_json(e, recs.size());
  j["model"] = kind;
  j["stage"] = stage_name(tc.stage);
  j["epoch"] = ckpt.epoch;
  return j;
}

inline nlohmann::json cmd_eval(const RunConfig& cfg, const std::string& ckpt_path,
                               const std::string& data_dir) {
  const Checkpoint ckpt = Checkpoint::load(resolve_checkpoint_path(ckpt_path));
  const CorpusData d = load_corpus(data_dir, cfg);
  const auto recs = subset(d, cfg.get("decode.subset"));
  reject_empty(recs);
  return evaluate_checkpoint(ckpt, recs);
}

// ---------------------------------------------------------------------------
// Convergence report

struct ConvergenceReport {
  std::vector<std::string> runs;
  std::vector<std::vector<double>> cv_loss;  // per run, per epoch
  std::size_t reference = 0;
  double target = 0;
  std::vector<std::optional<int>> epochs_to_target;  // first epoch with cv_loss <= target
};

/// target_mode "min": lowest CV loss of the reference run; "final": its last epoch.
inline ConvergenceReport convergence_report(const std::vector<std::string>& dirs,
                                            std::size_t reference,
                                            const std::string& target_mode = "min") {
  if (dirs.empty()) throw ConfigError("convergence-report: no run directories");
  if (reference >= dirs.size()) throw ConfigError("convergence-report: reference out of range");
  if (target_mode != "min" && target_mode != "final")
    throw ConfigError("convergence-report: target must be min or final");
  ConvergenceReport rep;
  rep.runs = dirs;
  rep.reference = reference;
  for (const auto& dir : dirs) {
    std::vector<double> curve;
    for (const auto& j : read_metrics(dir)) curve.push_back(j.at("cv_loss").get<double>());
    if (curve.empty()) throw LoadError("empty metrics.jsonl in " + dir);
    rep.cv_loss.push_back(std::move(curve));
  }
  const auto& ref = rep.cv_loss[reference];
  rep.target = target_mode == "min" ? *std::min_element(ref.begin(), ref.end()) : ref.back();
  for (const auto& curve : rep.cv_loss) {
    std::optional<int> e;
    for (std::size_t i = 0; i < curve.size(); ++i)
      if (curve[i] <= rep.target) {
        e = static_cast<int>(i) + 1;
        break;
      }
    rep.epochs_to_target.push_back(e);
  }
  return rep;
}

inline void write_convergence_table(std::ostream& os, const ConvergenceReport& r) {
  os << "epoch";
  for (const auto& d : r.runs) os << ',' << d;
  os << '\n';
  std::size_t n = 0;
  for (const auto& c : r.cv_loss) n = std::max(n, c.size());
  for (std::size_t e = 0; e < n; ++e) {
    os << e + 1;
    for (const auto& c : r.cv_loss) {
      os << ',';
      if (e < c.size()) os << format_number(c[e]);
    }
    os << '\n';
  }
}

inline void write_epochs_to_target(std::ostream& os, const ConvergenceReport& r) {
  os << "run,target,epochs_to_target,ratio_to_reference\n";
  const auto& ref = r.epochs_to_target[r.reference];
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    const auto& e = r.epochs_to_target[i];
    os << r.runs[i] << ',' << format_number(r.target) << ',' << (e ? std::to_string(*e) : "")
       << ',';
    if (e && ref) os << format_number(static_cast<double>(*e) / static_cast<double>(*ref));
    os << '\n';
  }
}

}  // namespace mtl
