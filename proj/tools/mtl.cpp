// tools/mtl.cpp

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

// mtl: corpus generation, training, sweeps, decoding and reports.
//
// Every command reads an optional key-value config (--config FILE); any
// config key can be overridden as --section.key VALUE (or --key VALUE when
// the short name is unambiguous). Exit codes: 0 ok, 1 usage or config
// error, 2 runtime failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mtl/cli/commands.hpp"

namespace {

using mtl::ConfigError;
using mtl::RunConfig;

std::string expand_key(const std::string& name) {
  if (name.find('.') != std::string::npos) return name;
  std::string found;
  for (const auto& k : mtl::config_schema()) {
    const std::string key = k.key;
    if (key.substr(key.find('.') + 1) == name) {
      if (!found.empty()) throw ConfigError("ambiguous config key '" + name + "', use section.key");
      found = key;
    }
  }
  if (found.empty()) throw ConfigError("unknown config key '" + name + "'");
  return found;
}

/// Leftover "--key value" / "--key=value" pairs become config overrides.
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& rest) {
  for (std::size_t i = 0; i < rest.size(); ++i) {
    const std::string& a = rest[i];
    if (a.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + a + "'");
    std::string name = a.substr(2), value;
    if (const auto eq = name.find('='); eq != std::string::npos) {
      value = name.substr(eq + 1);
      name = name.substr(0, eq);
    } else {
      if (i + 1 >= rest.size()) throw ConfigError("missing value for --" + name);
      value = rest[++i];
    }
    cfg.set(expand_key(name), value);
  }
}

struct Common {
  std::string config_file;
  RunConfig build(CLI::App* sub) const {
    RunConfig cfg;
    if (!config_file.empty()) cfg.load_file(config_file);
    apply_overrides(cfg, sub->remaining());
    return cfg;
  }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw mtl::Error("cannot write " + path);
  os << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-task CTC / attention toolkit"};
  app.require_subcommand(1);
  Common common;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_file, "key-value config file");
    sub->allow_extras();
  };

  std::string out, data, ckpt, stage, init_from, order, lambda, grid, seeds, mode, subset, target =
                                                                                        "min";
  int beam = 0, nbest = 0;
  std::size_t reference = 0;
  std::vector<std::string> run_dirs;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpus");
  add_common(gen);
  gen->add_option("--out", out, "dataset directory")->required();

  auto* train = app.add_subcommand("train", "train one stage");
  add_common(train);
  train->add_option("--data", data, "dataset directory")->required();
  train->add_option("--out", out, "run directory")->required();
  train->add_option("--stage", stage, "joint|ctc|ce|attention");
  train->add_option("--init-from", init_from, "checkpoint file or run directory");
  train->add_option("--order", order, "asc|desc|random");
  train->add_option("--lambda", lambda, "CE weight in the joint loss");

  auto* sweep = app.add_subcommand("lambda-sweep", "joint training over a lambda grid");
  add_common(sweep);
  sweep->add_option("--data", data, "dataset directory")->required();
  sweep->add_option("--out", out, "sweep directory")->required();
  sweep->add_option("--grid", grid, "comma-separated lambdas");
  sweep->add_option("--seeds", seeds, "comma-separated seeds");

  auto* decode = app.add_subcommand("decode", "write n-best hypotheses");
  add_common(decode);
  decode->add_option("--ckpt", ckpt, "checkpoint file or run directory")->required();
  decode->add_option("--data", data, "dataset directory")->required();
  decode->add_option("--mode", mode, "greedy|beam");
  decode->add_option("--beam", beam, "beam width");
  decode->add_option("--nbest", nbest, "hypotheses per utterance");
  decode->add_option("--subset", subset, "train|cv|all");
  decode->add_option("--out", out, "n-best file (default stdout)");

  auto* eval = app.add_subcommand("eval", "print TER, frame error and CV loss as JSON");
  add_common(eval);
  eval->add_option("--ckpt", ckpt, "checkpoint file or run directory")->required();
  eval->add_option("--data", data, "dataset directory")->required();
  eval->add_option("--subset", subset, "train|cv|all");
  eval->add_option("--out", out, "JSON file (default stdout)");

  auto* conv = app.add_subcommand("convergence-report", "align CV-loss curves across runs");
  conv->add_option("runs", run_dirs, "run directories")->required();
  conv->add_option("--reference", reference, "index of the reference run (default 0)");
  conv->add_option("--target", target, "min|final CV loss of the reference run");
  conv->add_option("--out", out, "output directory (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      RunConfig cfg = common.build(gen);
      mtl::cmd_gen_data(cfg, out);
      std::cout << "wrote " << cfg.get("data.num_utterances") << " utterances to " << out << '\n';
    } else if (train->parsed()) {
      RunConfig cfg = common.build(train);
      if (!stage.empty()) cfg.set("train.stage", stage);
      if (!init_from.empty()) cfg.set("train.init_from", init_from);
      if (!order.empty()) cfg.set("train.order", order);
      if (!lambda.empty()) cfg.set("train.lambda", lambda);
      const auto corpus = mtl::load_corpus(data, cfg);
      const auto r = mtl::run_training_any(cfg, corpus, out, &std::cout);
      std::cout << nlohmann::json{{"best_epoch", r.best_epoch}, {"best_cv_loss", r.best_cv_loss}}.dump()
                << '\n';
    } else if (sweep->parsed()) {
      RunConfig cfg = common.build(sweep);
      if (!grid.empty()) cfg.set("sweep.grid", grid);
      if (!seeds.empty()) cfg.set("sweep.seeds", seeds);
      const auto rows = mtl::cmd_lambda_sweep(cfg, data, out, &std::cerr);
      mtl::write_sweep_csv(std::cout, rows);
    } else if (decode->parsed()) {
      RunConfig cfg = common.build(decode);
      if (!mode.empty()) cfg.set("decode.mode", mode);
      if (beam != 0) cfg.set("decode.beam", std::to_string(beam));
      if (nbest != 0) cfg.set("decode.nbest", std::to_string(nbest));
      if (!subset.empty()) cfg.set("decode.subset", subset);
      if (out.empty()) {
        const auto meta = mtl::cmd_decode(cfg, ckpt, data, std::cout);
        std::cerr << meta.dump() << '\n';
      } else {
        std::ofstream os(out, std::ios::trunc);
        if (!os) throw mtl::Error("cannot write " + out);
        const auto meta = mtl::cmd_decode(cfg, ckpt, data, os);
        write_file(out + ".meta.json", meta.dump(1) + "\n");
        cfg.write(out + ".config.resolved");
      }
    } else if (eval->parsed()) {
      RunConfig cfg = common.build(eval);
      if (!subset.empty()) cfg.set("decode.subset", subset);
      const auto j = mtl::cmd_eval(cfg, ckpt, data);
      if (out.empty()) {
        std::cout << j.dump(1) << '\n';
      } else {
        write_file(out, j.dump(1) + "\n");
        cfg.write(out + ".config.resolved");
      }
    } else if (conv->parsed()) {
      const auto rep = mtl::convergence_report(run_dirs, reference, target);
      if (out.empty()) {
        mtl::write_convergence_table(std::cout, rep);
        std::cout << '\n';
        mtl::write_epochs_to_target(std::cout, rep);
      } else {
        std::filesystem::create_directories(out);
        std::ofstream a(std::filesystem::path(out) / "convergence.csv", std::ios::trunc);
        mtl::write_convergence_table(a, rep);
        std::ofstream b(std::filesystem::path(out) / "epochs_to_target.csv", std::ios::trunc);
        mtl::write_epochs_to_target(b, rep);
      }
    }
  } catch (const mtl::ConfigError& e) {
    std::cerr << "mtl: config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "mtl: error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
