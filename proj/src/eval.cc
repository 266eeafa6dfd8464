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

#include "sasv/eval.h"

#include <cmath>
#include <set>
#include <stdexcept>

namespace sasv {

namespace {

double plain_cosine(const Mat& a, const Mat& b) {
  double num = (a.array() * b.array()).sum();
  double na = std::sqrt(a.squaredNorm() + 1e-24);
  double nb = std::sqrt(b.squaredNorm() + 1e-24);
  return num / (na * nb);
}

}  // namespace

std::map<std::string, UttEmbeddings> utterance_embeddings(
    const ManifestIndex& index, const std::vector<std::string>& utt_ids,
    const Checkpoint& ckpt, ScoringMode mode) {
  PathMask mask;
  mask.spoof = false;
  mask.sasv = mode == ScoringMode::kFull;

  std::map<std::string, UttEmbeddings> out;
  // Chunked so each tape stays small.
  constexpr size_t kChunk = 64;
  for (size_t start = 0; start < utt_ids.size(); start += kChunk) {
    Tape tape;
    BoundParams bp = bind_params(tape, ckpt.params, false);
    size_t end = std::min(utt_ids.size(), start + kChunk);
    for (size_t i = start; i < end; ++i) {
      const std::string& id = utt_ids[i];
      if (out.count(id)) continue;
      const Utterance& u = index.require(id);
      Var x = tape.input(u.features, false);
      EncodeOut enc = encode(tape, x, bp, ckpt.config, mask);
      UttEmbeddings emb;
      emb.e_asv = tape.val(enc.e_asv);
      if (mask.sasv) emb.e_fuse = tape.val(enc.e_fuse);
      out[id] = std::move(emb);
    }
  }
  return out;
}

std::vector<ScoreRecord> score_trials(const ManifestIndex& index,
                                      const std::vector<TrialPair>& trials,
                                      const Checkpoint& ckpt, ScoringMode mode) {
  std::set<std::string> id_set;
  for (const auto& t : trials) {
    for (const auto& e : t.enroll_utts) id_set.insert(e);
    id_set.insert(t.test_utt);
  }
  std::vector<std::string> ids(id_set.begin(), id_set.end());
  auto embeddings = utterance_embeddings(index, ids, ckpt, mode);

  // A shared tape per chunk of back-end evaluations; embeddings enter as
  // plain inputs, so the tape stays tiny per trial.
  constexpr size_t kTrialChunk = 512;
  Tape tape;
  BoundParams bp;
  size_t in_chunk = kTrialChunk;

  std::vector<ScoreRecord> records;
  records.reserve(trials.size());
  for (const auto& t : trials) {
    if (mode == ScoringMode::kFull && in_chunk >= kTrialChunk) {
      tape.clear();
      bp = bind_params(tape, ckpt.params, false);
      in_chunk = 0;
    }
    ++in_chunk;
    if (t.enroll_utts.empty()) {
      throw std::runtime_error("score_trials: trial " + t.trial_id +
                               " has no enrollment utterances");
    }
    const UttEmbeddings& test = embeddings.at(t.test_utt);
    Mat enroll_mean = Mat::Zero(1, test.e_asv.cols());
    for (const auto& id : t.enroll_utts) {
      enroll_mean += embeddings.at(id).e_asv;
    }
    enroll_mean /= static_cast<double>(t.enroll_utts.size());
    double cos = plain_cosine(enroll_mean, test.e_asv);

    ScoreRecord r;
    r.trial_id = t.trial_id;
    r.asv_score = cos;
    if (mode == ScoringMode::kFull) {
      std::vector<Var> enroll_vars;
      enroll_vars.reserve(t.enroll_utts.size());
      for (const auto& id : t.enroll_utts) {
        enroll_vars.push_back(tape.input(embeddings.at(id).e_fuse, false));
      }
      Var test_var = tape.input(test.e_fuse, false);
      Var score = sasv_score(tape, enroll_vars, test_var, bp, ckpt.config);
      r.sasv_score = tape.val(score)(0, 0);
    } else {
      r.sasv_score = 0.5 * (1.0 + cos);
    }
    const Utterance& test_utt = index.require(t.test_utt);
    const Utterance& enroll_utt = index.require(t.enroll_utts.front());
    bool match = test_utt.speaker == enroll_utt.speaker;
    bool genuine = !test_utt.is_spoof;
    r.label = label_trial(genuine, match);
    r.trial_kind = test_utt.is_spoof
                       ? TrialKind::kSpoof
                       : (match ? TrialKind::kTarget : TrialKind::kNontarget);
    if (r.label != t.label) {
      throw std::runtime_error("score_trials: stored label of " + t.trial_id +
                               " disagrees with the manifest");
    }
    r.enroll_genre = enroll_utt.genre;
    r.test_genre = test_utt.genre;
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace sasv
