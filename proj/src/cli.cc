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

#include "sasv/cli.h"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <stdexcept>

#include "sasv/eval.h"
#include "sasv/metrics.h"

namespace fs = std::filesystem;

namespace sasv {

namespace {

// Runs body and maps exceptions to exit codes.
int guarded(const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

void require_parent_exists(const std::string& path) {
  fs::path parent = fs::absolute(path).parent_path();
  if (!fs::is_directory(parent)) {
    throw std::invalid_argument("output location " + parent.string() +
                                " does not exist");
  }
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) {
    throw std::invalid_argument(std::string(what) + " " + path + " not found");
  }
}

// Stage-and-rename for a single file.
void staged_write(const std::string& path,
                  const std::function<void(const std::string&)>& writer) {
  require_parent_exists(path);
  std::string tmp = path + ".tmp-stage";
  try {
    writer(tmp);
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

// Stage-and-swap for a directory output.
void staged_dir(const std::string& dir,
                const std::function<void(const std::string&)>& writer) {
  require_parent_exists(dir);
  std::string tmp = dir + ".tmp-stage";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  try {
    writer(tmp);
    fs::remove_all(dir);
    fs::rename(tmp, dir);
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }
}

}  // namespace

void write_manifest_refs(const std::string& path, const Manifest& manifest) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& u : manifest) {
    if (u.feature_path.empty()) {
      throw std::runtime_error("write_manifest_refs: " + u.utt_id +
                               " has no feature path");
    }
    out << u.utt_id << '\t' << u.speaker << '\t' << u.genre << '\t'
        << (u.is_spoof ? 1 : 0) << '\t' << u.feature_path << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

int cmd_generate(const GenerateOptions& opt) {
  return guarded([&]() {
    opt.spec.validate();
    if (opt.out_dir.empty()) {
      throw std::invalid_argument("generate: --out is required");
    }
    Manifest manifest = opt.with_spoofs ? synth_corpus_with_spoofs(opt.spec)
                                        : synth_corpus(opt.spec);
    staged_dir(opt.out_dir,
               [&](const std::string& tmp) { save_corpus(manifest, tmp); });
    std::cout << "wrote " << manifest.size() << " utterances to " << opt.out_dir
              << '\n';
  });
}

int cmd_protocol(const ProtocolOptions& opt) {
  return guarded([&]() {
    require_file(opt.corpus_manifest, "corpus manifest");
    if (opt.cgp < 1 || opt.cgp > 4) {
      throw std::invalid_argument("protocol: --cgp must be 1..4");
    }
    if (opt.out_dir.empty()) {
      throw std::invalid_argument("protocol: --out is required");
    }
    require_parent_exists(opt.out_dir);

    Manifest manifest = load_manifest_rows(opt.corpus_manifest);
    std::set<std::string> genre_set;
    for (const auto& u : manifest) genre_set.insert(u.genre);
    std::vector<std::string> genres(genre_set.begin(), genre_set.end());

    GenreGrouping grouping = GenreGrouping::default_grouping();
    grouping.validate(genres);
    const char* names[] = {"CGP I", "CGP II", "CGP III", "CGP IV"};
    CgpProtocol cgp = build_cgp(grouping, names[opt.cgp - 1]);

    auto [train, eval] = split_train_eval(manifest, opt.eval_fraction);
    Manifest train_filtered = filter_training(train, grouping, cgp);

    ManifestIndex eval_index(eval);
    std::vector<TrialPair> trials =
        build_complex_eval(eval_index, opt.eval_list, opt.substitution_rate,
                           opt.seed);

    staged_dir(opt.out_dir, [&](const std::string& tmp) {
      fs::create_directory(tmp);
      write_protocol((fs::path(tmp) / "protocol.txt").string(), cgp);
      write_manifest_refs((fs::path(tmp) / "train.tsv").string(),
                          train_filtered);
      write_manifest_refs((fs::path(tmp) / "eval.tsv").string(), eval);
      write_trials((fs::path(tmp) / "trials.tsv").string(), trials);
    });
    std::cout << cgp.name << ": " << train_filtered.size()
              << " training utterances, " << eval.size()
              << " evaluation utterances, " << trials.size() << " trials\n";
  });
}

int cmd_train(const TrainOptions& opt) {
  return guarded([&]() {
    require_file(opt.train_manifest, "training manifest");
    if (opt.checkpoint_out.empty()) {
      throw std::invalid_argument("train: --out is required");
    }
    opt.train.validate();
    Manifest manifest = load_corpus(opt.train_manifest);

    int printed = 0;
    auto on_step = [&](const StepRecord& r) {
      if (opt.quiet) return;
      if (r.step % 50 == 0 || r.step == 0) {
        std::cout << "step " << r.step << " inner " << r.inner_loss << " outer "
                  << r.outer_loss << " lr " << r.lr << '\n';
        ++printed;
      }
    };
    TrainResult result = train(manifest, opt.model, opt.train, on_step);

    staged_write(opt.checkpoint_out, [&](const std::string& tmp) {
      save_checkpoint(tmp, result.checkpoint);
    });
    std::string telemetry = opt.telemetry_out.empty()
                                ? opt.checkpoint_out + ".telemetry.csv"
                                : opt.telemetry_out;
    staged_write(telemetry, [&](const std::string& tmp) {
      write_telemetry(tmp, result.log);
    });
    std::cout << "trained " << result.log.size() << " steps; checkpoint at "
              << opt.checkpoint_out << '\n';
  });
}

int cmd_evaluate(const EvaluateOptions& opt) {
  return guarded([&]() {
    require_file(opt.manifest, "manifest");
    require_file(opt.trials, "trial list");
    require_file(opt.checkpoint, "checkpoint");
    if (opt.scores_out.empty()) {
      throw std::invalid_argument("evaluate: --out is required");
    }
    Manifest manifest = load_corpus(opt.manifest);
    ManifestIndex index(manifest);
    std::vector<TrialPair> trials = read_trials(opt.trials);
    Checkpoint ckpt = load_checkpoint(opt.checkpoint);
    ScoringMode mode =
        opt.ablation ? ScoringMode::kCosineOnly : ScoringMode::kFull;
    std::vector<ScoreRecord> records = score_trials(index, trials, ckpt, mode);
    staged_write(opt.scores_out, [&](const std::string& tmp) {
      write_scores(tmp, records);
    });
    std::cout << "scored " << records.size() << " trials to " << opt.scores_out
              << '\n';
  });
}

int cmd_report(const ReportOptions& opt) {
  return guarded([&]() {
    require_file(opt.scores, "score file");
    std::vector<ScoreRecord> records = read_scores(opt.scores);
    if (records.empty()) {
      throw std::invalid_argument("report: empty score file");
    }
    GenreGrouping grouping = GenreGrouping::default_grouping();

    std::string text = render_overall(records);
    GenreMatrix sv_matrix = genre_matrix(records, EerMetric::kSv);
    text += render_genre_matrix(sv_matrix, "SV-EER by genre");
    text += render_genre_breakdown(records, EerMetric::kSv, grouping);

    std::optional<DiffMatrix> diff;
    if (!opt.baseline.empty()) {
      require_file(opt.baseline, "baseline score file");
      std::vector<ScoreRecord> base = read_scores(opt.baseline);
      diff = diff_report(records, base, EerMetric::kSv);
      text += render_diff_matrix(*diff, "SV-EER difference vs baseline");
    }
    std::cout << text;

    if (!opt.out_dir.empty()) {
      staged_dir(opt.out_dir, [&](const std::string& tmp) {
        fs::create_directory(tmp);
        auto dump = [&](const char* name, const std::string& content) {
          std::ofstream out(fs::path(tmp) / name);
          out << content;
          if (!out) {
            throw std::runtime_error(std::string("cannot write ") + name);
          }
        };
        dump("overall.csv", csv_overall(records));
        dump("sv_matrix.csv", csv_genre_matrix(sv_matrix));
        dump("report.txt", text);
        if (diff) dump("sv_diff.csv", csv_diff_matrix(*diff));
      });
    }
  });
}

}  // namespace sasv
