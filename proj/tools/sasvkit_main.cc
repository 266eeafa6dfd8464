// Copyright (c) 2026 The sasvkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sasv/cli.h"

namespace {

// Flat key=value config support: the file is expanded into synthesized flags
// inserted right after the subcommand token, so flags given on the command
// line come later and win.
std::vector<std::string> load_flat_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::FileError("cannot read config file " + path);
  std::vector<std::string> args;
  std::string line;
  while (std::getline(in, line)) {
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) continue;
    args.push_back(value.empty() ? "--" + key : "--" + key + "=" + value);
  }
  return args;
}

// Expands any --config FILE (or --config=FILE) occurring after the
// subcommand name into the file's key=value pairs.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.push_back(argv[i]);
  size_t sub = 0;
  while (sub < args.size() && !args[sub].empty() && args[sub][0] == '-') ++sub;
  if (sub >= args.size()) return args;

  std::string config_path;
  for (size_t i = sub + 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
      args.erase(args.begin() + i, args.begin() + i + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      args.erase(args.begin() + i);
      break;
    }
  }
  if (config_path.empty()) return args;
  std::vector<std::string> synthesized = load_flat_config(config_path);
  args.insert(args.begin() + sub + 1, synthesized.begin(), synthesized.end());
  return args;
}

void add_model_flags(CLI::App* cmd, sasv::ModelConfig* m) {
  cmd->add_option("--blocks", m->num_blocks, "number of dual-path blocks");
  cmd->add_option("--model-dim", m->model_dim, "block width");
  cmd->add_option("--heads", m->attention_heads, "attention heads");
  cmd->add_option("--kernel", m->conv_kernel, "convolution kernel size");
  cmd->add_option("--embedding-dim", m->embedding_dim, "embedding size");
  cmd->add_option("--se-bottleneck", m->se_bottleneck,
                  "squeeze-excitation bottleneck width");
  cmd->add_option("--backend-hidden", m->backend_hidden,
                  "back-end hidden layer width");
  cmd->add_option("--dilation", m->conv_dilation,
                  "right-branch convolution dilation");
}

void add_train_flags(CLI::App* cmd, sasv::TrainConfig* t, bool* no_meta) {
  cmd->add_option("--epochs", t->epochs, "training epochs");
  cmd->add_option("--batch", t->batch_size, "utterances per meta-task");
  cmd->add_option("--inner-steps", t->inner_steps, "inner-loop gradient steps");
  cmd->add_option("--inner-lr", t->inner_lr, "inner-loop learning rate");
  cmd->add_option("--warmup", t->warmup_steps, "warm-up steps");
  cmd->add_option("--peak-lr", t->peak_lr, "peak learning rate");
  cmd->add_option("--decay", t->decay_rate, "per-step exponential decay");
  cmd->add_option("--beta1", t->beta1, "Adam beta1");
  cmd->add_option("--beta2", t->beta2, "Adam beta2");
  cmd->add_option("--w-asv", t->w_asv, "speaker loss weight");
  cmd->add_option("--w-spoof", t->w_spoof, "spoof loss weight");
  cmd->add_option("--w-sasv", t->w_sasv, "SASV loss weight");
  cmd->add_option("--g-mtr", t->g_mtr, "meta-train genre count (-1 = G-2)");
  cmd->add_option("--steps-per-epoch", t->steps_per_epoch,
                  "meta-tasks per epoch (-1 = #utts/batch)");
  cmd->add_option("--seed", t->seed, "training seed");
  cmd->add_flag("--no-meta", *no_meta,
                "plain supervised training (no bilevel adaptation)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spoofing-aware speaker verification toolkit"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  // generate
  sasv::GenerateOptions gen;
  int genre_count = 10;
  std::string genre_tags;
  bool no_spoofs = false;
  CLI::App* g = app.add_subcommand("generate", "synthesize a corpus");
  g->add_option("--out", gen.out_dir, "corpus output directory")->required();
  g->add_option("--speakers", gen.spec.num_speakers, "number of speakers");
  g->add_option("--genres", genre_count, "number of genres (first N tags)");
  g->add_option("--genre-tags", genre_tags, "comma-separated genre tags");
  g->add_option("--utts-per-cell", gen.spec.utterances_per_speaker_genre,
                "bona fide utterances per (speaker, genre)");
  g->add_option("--frames", gen.spec.frames, "frames per utterance");
  g->add_option("--feature-dim", gen.spec.feature_dim, "feature dimension");
  g->add_option("--speaker-scale", gen.spec.speaker_scale, "speaker factor");
  g->add_option("--genre-scale", gen.spec.genre_scale, "genre factor");
  g->add_option("--noise-scale", gen.spec.noise_scale, "frame noise factor");
  g->add_option("--spoof-scale", gen.spec.spoof_scale, "spoof channel factor");
  g->add_option("--seed", gen.spec.seed, "corpus seed");
  g->add_flag("--no-spoofs", no_spoofs, "skip spoofed counterparts");

  // protocol
  sasv::ProtocolOptions proto;
  CLI::App* p = app.add_subcommand("protocol", "build CGP split and trials");
  p->add_option("--corpus", proto.corpus_manifest, "corpus manifest.tsv")
      ->required();
  p->add_option("--out", proto.out_dir, "protocol output directory")->required();
  p->add_option("--cgp", proto.cgp, "cross-genre protocol (1..4)");
  p->add_option("--eval-fraction", proto.eval_fraction,
                "per-cell evaluation fraction");
  p->add_option("--trials", proto.eval_list.num_trials, "evaluation trials");
  p->add_option("--enroll-size", proto.eval_list.enroll_size,
                "enrollment utterances per trial");
  p->add_option("--target-fraction", proto.eval_list.target_fraction,
                "target share before substitution");
  p->add_option("--substitution-rate", proto.substitution_rate,
                "spoof substitution probability");
  p->add_option("--seed", proto.seed, "protocol seed");

  // train
  sasv::TrainOptions tr;
  bool no_meta = false;
  CLI::App* t = app.add_subcommand("train", "train a model");
  t->add_option("--train-manifest", tr.train_manifest, "training manifest")
      ->required();
  t->add_option("--out", tr.checkpoint_out, "checkpoint output path")
      ->required();
  t->add_option("--telemetry", tr.telemetry_out, "telemetry CSV path");
  t->add_flag("--quiet", tr.quiet, "suppress progress lines");
  add_model_flags(t, &tr.model);
  add_train_flags(t, &tr.train, &no_meta);

  // evaluate
  sasv::EvaluateOptions ev;
  CLI::App* e = app.add_subcommand("evaluate", "score a trial list");
  e->add_option("--manifest", ev.manifest, "evaluation manifest")->required();
  e->add_option("--trials", ev.trials, "trial list")->required();
  e->add_option("--checkpoint", ev.checkpoint, "model checkpoint")->required();
  e->add_option("--out", ev.scores_out, "score file output path")->required();
  e->add_flag("--ablation", ev.ablation,
              "speaker-only cosine scoring (no back-end)");

  // report
  sasv::ReportOptions rep;
  CLI::App* r = app.add_subcommand("report", "render EER tables");
  r->add_option("--scores", rep.scores, "score file")->required();
  r->add_option("--baseline", rep.baseline, "baseline score file");
  r->add_option("--out-dir", rep.out_dir, "CSV output directory");

  std::string config_doc;
  for (CLI::App* sub : {g, p, t, e, r}) {
    sub->add_option("--config", config_doc,
                    "flat key=value config file; flags win");
  }

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const CLI::FileError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return sasv::kExitValidation;
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& err) {
    int code = app.exit(err);
    return code == 0 ? 0 : sasv::kExitValidation;
  }

  if (g->parsed()) {
    gen.with_spoofs = !no_spoofs;
    if (!genre_tags.empty()) {
      gen.spec.genres.clear();
      std::string tag;
      std::istringstream ss(genre_tags);
      while (std::getline(ss, tag, ',')) gen.spec.genres.push_back(tag);
    } else {
      std::vector<std::string> all = sasv::default_genres();
      if (genre_count < 1) {
        std::cerr << "error: --genres must be >= 1\n";
        return sasv::kExitValidation;
      }
      gen.spec.genres.clear();
      for (int i = 0; i < genre_count; ++i) {
        if (i < static_cast<int>(all.size())) {
          gen.spec.genres.push_back(all[i]);
        } else {
          gen.spec.genres.push_back("g" + std::to_string(i));
        }
      }
    }
    return sasv::cmd_generate(gen);
  }
  if (p->parsed()) return sasv::cmd_protocol(proto);
  if (t->parsed()) {
    tr.train.meta = !no_meta;
    return sasv::cmd_train(tr);
  }
  if (e->parsed()) return sasv::cmd_evaluate(ev);
  if (r->parsed()) return sasv::cmd_report(rep);
  return sasv::kExitValidation;
}
