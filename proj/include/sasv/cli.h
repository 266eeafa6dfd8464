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

#ifndef SASV_CLI_H_
#define SASV_CLI_H_

#include <string>

#include "sasv/datagen.h"
#include "sasv/model.h"
#include "sasv/protocol.h"
#include "sasv/trainer.h"

namespace sasv {

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

struct GenerateOptions {
  std::string out_dir;
  CorpusSpec spec;
  bool with_spoofs = true;
};

struct ProtocolOptions {
  std::string corpus_manifest;
  std::string out_dir;
  int cgp = 1;  // 1..4
  double eval_fraction = 0.4;
  EvalListConfig eval_list;
  double substitution_rate = 0.3;
  uint64_t seed = 1;
};

struct TrainOptions {
  std::string train_manifest;
  std::string checkpoint_out;
  std::string telemetry_out;  // empty -> <checkpoint_out>.telemetry.csv
  ModelConfig model;
  TrainConfig train;
  bool quiet = false;
};

struct EvaluateOptions {
  std::string manifest;
  std::string trials;
  std::string checkpoint;
  std::string scores_out;
  bool ablation = false;  // cosine-only scoring
};

struct ReportOptions {
  std::string scores;
  std::string baseline;  // optional second score file for the diff matrix
  std::string out_dir;   // optional CSV output directory
};

// Each command validates inputs, stages outputs to temporaries, and renames
// on success; on failure nothing is left behind. Errors are printed to
// stderr and mapped to the exit codes above.
int cmd_generate(const GenerateOptions& opt);
int cmd_protocol(const ProtocolOptions& opt);
int cmd_train(const TrainOptions& opt);
int cmd_evaluate(const EvaluateOptions& opt);
int cmd_report(const ReportOptions& opt);

// Manifest rows with absolute feature paths, for derived manifests that live
// outside the corpus directory. Every utterance must carry a feature_path.
void write_manifest_refs(const std::string& path, const Manifest& manifest);

}  // namespace sasv

#endif  // SASV_CLI_H_
