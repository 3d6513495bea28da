// mtl/cli/config.hpp

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

// Flat key-value run configuration.
//
//   # comment
//   [train]
//   lambda = 0.9
//
// A key inside [section] is addressed as "section.key". Keys outside any
// section must already be dotted. Unknown keys are errors. Values are kept
// as text and parsed on access, so a resolved dump reproduces the input.

#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mtl/data/synthetic.hpp"
#include "mtl/model/attention_model.hpp"
#include "mtl/model/multitask_model.hpp"
#include "mtl/train/trainer.hpp"

namespace mtl {

struct ConfigKey {
  const char* key;
  const char* default_value;  // "" for stage-dependent train keys
};

inline const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> keys = {
      {"data.vocab_size", "12"},
      {"data.states_per_label", "3"},
      {"data.feature_dim", "40"},
      {"data.duration_min", "2"},
      {"data.duration_max", "6"},
      {"data.mean_scale", "1"},
      {"data.noise_sigma", "4"},
      {"data.conversation_offset", "0.5"},
      {"data.silence_prob", "0.5"},
      {"data.label_len_min", "3"},
      {"data.label_len_max", "10"},
      {"data.num_utterances", "2105"},
      {"data.num_conversations", "50"},
      {"data.seed", "1"},
      {"data.feature_dtype", "f64"},
      {"data.normalize", "true"},
      {"data.cv_fraction", "0.05"},
      {"data.split_seed", "1"},
      {"model.dtype", "f32"},
      {"model.num_layers", "5"},
      {"model.hidden_per_direction", "320"},
      {"model.projection_dim", "256"},
      {"model.dropout_rate", "0.2"},
      {"model.frame_stacking", "true"},
      {"attention.extra_layers", "1"},
      {"attention.extra_hidden", "0"},
      {"attention.decoder_layers", "2"},
      {"attention.decoder_hidden", "0"},
      {"attention.attention_dim", "0"},
      {"attention.embedding_dim", "0"},
      {"train.stage", "joint"},
      {"train.lambda", "0.9"},
      {"train.order", "random"},
      {"train.optimizer", ""},
      {"train.initial_lr", ""},
      {"train.decay_factor", ""},
      {"train.epochs", ""},
      {"train.newbob_threshold", "0.005"},
      {"train.batch_size", "8"},
      {"train.clip_norm", "5"},
      {"train.ce_normalization", "sum"},
      {"train.sampling_rate", "0.3"},
      {"train.max_decode_len", "0"},
      {"train.speed_factors", ""},
      {"train.init_from", ""},
      {"train.seed", "1"},
      {"train.save_checkpoints", "true"},
      {"decode.mode", "greedy"},
      {"decode.beam", "12"},
      {"decode.nbest", "1"},
      {"decode.max_len", "0"},
      {"decode.subset", "cv"},
      {"sweep.grid", "0,0.5,0.85,0.9,0.95,1"},
      {"sweep.seeds", "1,2,3"},
      {"sweep.ter_threshold", "0.5"},
  };
  return keys;
}

inline std::string format_number(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class RunConfig {
 public:
  static bool known(const std::string& key) {
    for (const auto& k : config_schema())
      if (key == k.key) return true;
    return false;
  }

  void set(const std::string& key, const std::string& value) {
    if (!known(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  void load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    parse(ss.str(), path);
  }

  void parse(const std::string& text, const std::string& origin = "<config>") {
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']' || line.size() < 3)
          throw ConfigError(str_cat(origin, ":", lineno, ": malformed section header"));
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(str_cat(origin, ":", lineno, ": expected key = value"));
      std::string key = trim(line.substr(0, eq));
      if (!section.empty()) key = section + "." + key;
      try {
        set(key, trim(line.substr(eq + 1)));
      } catch (const ConfigError& e) {
        throw ConfigError(str_cat(origin, ":", lineno, ": ", e.what()));
      }
    }
  }

  bool is_set(const std::string& key) const { return values_.count(key) > 0; }

  std::string get(const std::string& key) const {
    if (auto it = values_.find(key); it != values_.end()) return it->second;
    for (const auto& k : config_schema())
      if (key == k.key) return k.default_value;
    throw ConfigError("unknown config key '" + key + "'");
  }

  double get_double(const std::string& key) const {
    const std::string v = get(key);
    double out = 0;
    auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size())
      throw ConfigError(key + ": expected a number, got '" + v + "'");
    return out;
  }

  long long get_int(const std::string& key) const {
    const std::string v = get(key);
    long long out = 0;
    auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size())
      throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return out;
  }

  bool get_bool(const std::string& key) const {
    const std::string v = get(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
  }

  std::vector<double> get_list(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      double d = 0;
      auto r = std::from_chars(item.data(), item.data() + item.size(), d);
      if (r.ec != std::errc() || r.ptr != item.data() + item.size())
        throw ConfigError(key + ": bad list entry '" + item + "'");
      out.push_back(d);
    }
    return out;
  }

  SyntheticTaskSpec data_spec() const {
    SyntheticTaskSpec s;
    s.vocab_size = static_cast<int>(get_int("data.vocab_size"));
    s.states_per_label = static_cast<int>(get_int("data.states_per_label"));
    s.feature_dim = static_cast<int>(get_int("data.feature_dim"));
    s.duration_min = static_cast<int>(get_int("data.duration_min"));
    s.duration_max = static_cast<int>(get_int("data.duration_max"));
    s.mean_scale = get_double("data.mean_scale");
    s.noise_sigma = get_double("data.noise_sigma");
    s.conversation_offset = get_double("data.conversation_offset");
    s.silence_prob = get_double("data.silence_prob");
    s.label_len_min = static_cast<int>(get_int("data.label_len_min"));
    s.label_len_max = static_cast<int>(get_int("data.label_len_max"));
    s.num_utterances = static_cast<int>(get_int("data.num_utterances"));
    s.num_conversations = static_cast<int>(get_int("data.num_conversations"));
    s.seed = static_cast<std::uint64_t>(get_int("data.seed"));
    s.validate();
    return s;
  }

  SharedEncoderConfig encoder(int input_dim) const {
    SharedEncoderConfig c;
    c.num_layers = static_cast<int>(get_int("model.num_layers"));
    c.hidden_per_direction = static_cast<int>(get_int("model.hidden_per_direction"));
    c.projection_dim = static_cast<int>(get_int("model.projection_dim"));
    c.dropout_rate = get_double("model.dropout_rate");
    c.frame_stacking = get_bool("model.frame_stacking");
    c.input_dim = input_dim;
    c.validate();
    return c;
  }

  AttentionConfig attention(const SharedEncoderConfig& enc, int vocab) const {
    AttentionConfig a;
    a.encoder = enc;
    a.extra_layers = static_cast<int>(get_int("attention.extra_layers"));
    a.extra_hidden = static_cast<int>(get_int("attention.extra_hidden"));
    a.decoder_layers = static_cast<int>(get_int("attention.decoder_layers"));
    a.decoder_hidden = static_cast<int>(get_int("attention.decoder_hidden"));
    a.attention_dim = static_cast<int>(get_int("attention.attention_dim"));
    a.embedding_dim = static_cast<int>(get_int("attention.embedding_dim"));
    a.vocab = vocab;
    a.validate();
    return a;
  }

  /// Stage defaults fill the optimizer, rate, decay and epoch keys left unset.
  TrainConfig train() const {
    TrainConfig c = TrainConfig::defaults_for(parse_stage(get("train.stage")));
    c.lambda = get_double("train.lambda");
    c.ordering = parse_ordering(get("train.order"));
    if (is_set("train.optimizer")) c.optimizer = parse_optimizer(get("train.optimizer"));
    if (is_set("train.initial_lr")) c.initial_lr = get_double("train.initial_lr");
    if (is_set("train.decay_factor")) c.decay_factor = get_double("train.decay_factor");
    if (is_set("train.epochs")) c.epochs = static_cast<int>(get_int("train.epochs"));
    c.newbob_threshold = get_double("train.newbob_threshold");
    c.batch_size = static_cast<int>(get_int("train.batch_size"));
    c.clip_norm = get_double("train.clip_norm");
    c.ce_normalization = parse_ce_normalization(get("train.ce_normalization"));
    c.sampling_rate = get_double("train.sampling_rate");
    c.max_decode_len = static_cast<int>(get_int("train.max_decode_len"));
    c.speed_factors = get_list("train.speed_factors");
    c.init_from = get("train.init_from");
    c.seed = static_cast<std::uint64_t>(get_int("train.seed"));
    c.save_checkpoints = get_bool("train.save_checkpoints");
    c.validate();
    return c;
  }

  /// Every key with its effective value, stage defaults written out.
  RunConfig resolved() const {
    RunConfig r = *this;
    const TrainConfig t = train();
    r.values_["train.optimizer"] = optimizer_name(t.optimizer);
    r.values_["train.initial_lr"] = format_number(t.initial_lr);
    r.values_["train.decay_factor"] = format_number(t.decay_factor);
    r.values_["train.epochs"] = std::to_string(t.epochs);
    for (const auto& k : config_schema())
      if (!r.is_set(k.key)) r.values_[k.key] = k.default_value;
    return r;
  }

  std::string dump() const {
    std::ostringstream os;
    std::string section;
    for (const auto& k : config_schema()) {
      const std::string key = k.key;
      const auto dot = key.find('.');
      const std::string sec = key.substr(0, dot);
      if (sec != section) {
        if (!section.empty()) os << '\n';
        os << '[' << sec << "]\n";
        section = sec;
      }
      os << key.substr(dot + 1) << " = " << get(key) << '\n';
    }
    return os.str();
  }

  void write(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw Error("cannot write " + path);
    os << resolved().dump();
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& k : config_schema()) j[k.key] = get(k.key);
    return j;
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace mtl
