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

#ifndef SASV_EVAL_H_
#define SASV_EVAL_H_

#include <map>
#include <string>
#include <vector>

#include "sasv/metrics.h"
#include "sasv/model.h"
#include "sasv/protocol.h"

namespace sasv {

// How the SASV decision score is produced. kFull runs the trained back-end;
// kCosineOnly is the speaker-only ablation, which maps the e_asv cosine into
// (0,1) and never touches the spoof or fusion paths.
enum class ScoringMode { kFull, kCosineOnly };

struct UttEmbeddings {
  Mat e_asv;   // 1 x emb
  Mat e_fuse;  // 1 x emb; empty in kCosineOnly mode
};

// Encodes each utterance once (no gradients) under the mode's path mask.
std::map<std::string, UttEmbeddings> utterance_embeddings(
    const ManifestIndex& index, const std::vector<std::string>& utt_ids,
    const Checkpoint& ckpt, ScoringMode mode);

// Scores a trial list: asv_score is the cosine between the averaged
// enrollment e_asv and the test e_asv; sasv_score is the back-end output
// (kFull) or the rescaled cosine (kCosineOnly). Record order follows the
// trial list. Genres are taken from the manifest.
std::vector<ScoreRecord> score_trials(const ManifestIndex& index,
                                      const std::vector<TrialPair>& trials,
                                      const Checkpoint& ckpt, ScoringMode mode);

}  // namespace sasv

#endif  // SASV_EVAL_H_
