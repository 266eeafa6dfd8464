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

#ifndef SASV_PROTOCOL_H_
#define SASV_PROTOCOL_H_

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sasv/datagen.h"

namespace sasv {

// Genre groups; group ids are 1-based (Group I..IV in the default layout).
struct GenreGrouping {
  std::vector<std::vector<std::string>> groups;

  static GenreGrouping default_grouping();
  // Throws unless groups are disjoint and cover exactly `genres`.
  void validate(const std::vector<std::string>& genres) const;
  // 1-based group id, or 0 if the genre is not in any group.
  int group_of(const std::string& genre) const;
  std::vector<std::string> genres_of_groups(const std::set<int>& ids) const;
};

struct CgpProtocol {
  std::string name;             // "CGP I".."CGP IV"
  std::set<int> seen_groups;    // group ids
  std::set<int> unseen_groups;  // exactly one group
};

// The fixed K-fold assignment: CGP I holds out Group IV, CGP II Group III,
// CGP III Group II, CGP IV Group I.
CgpProtocol build_cgp(const GenreGrouping& grouping, const std::string& name);

// Keeps utterances whose genre belongs to a seen group. Throws if the result
// would be empty.
Manifest filter_training(const Manifest& manifest, const GenreGrouping& grouping,
                         const CgpProtocol& cgp);

// Spoofing-aware ground truth: accept only a genuine utterance from the
// enrolled speaker.
bool label_trial(bool test_is_genuine, bool speaker_match);

enum class TrialKind { kTarget, kNontarget, kSpoof };

const char* trial_kind_name(TrialKind kind);
TrialKind trial_kind_from_name(const std::string& name);

struct TrialPair {
  std::string trial_id;
  std::vector<std::string> enroll_utts;  // same speaker, bona fide
  std::string test_utt;
  bool label = false;
  std::string enroll_genre;
  std::string test_genre;
  TrialKind trial_kind = TrialKind::kNontarget;
};

struct MetaTask {
  std::vector<TrialPair> meta_train;
  std::vector<TrialPair> meta_test;
  std::set<std::string> train_genres;
  std::set<std::string> test_genres;
};

// Target/nontarget/spoof composition of sampled training trials.
struct TrialMix {
  double target = 0.4;
  double nontarget = 0.4;
  double spoof = 0.2;
};

// Fast lookups over a manifest. The manifest must outlive the index.
class ManifestIndex {
 public:
  explicit ManifestIndex(const Manifest& manifest);

  const Utterance* by_id(const std::string& utt_id) const;  // null if absent
  const Utterance& require(const std::string& utt_id) const;
  // Spoofed counterpart of a bona fide utterance, or null.
  const Utterance* spoof_counterpart(const std::string& utt_id) const;
  const std::vector<std::string>& speakers() const { return speakers_; }
  const std::vector<std::string>& genres() const { return genres_; }
  // Bona fide utterances of one speaker, manifest order.
  const std::vector<const Utterance*>& bona_of(const std::string& speaker) const;
  // Bona fide utterances of a (speaker, genre) cell, manifest order.
  std::vector<const Utterance*> bona_cell(const std::string& speaker,
                                          const std::string& genre) const;
  const Manifest& manifest() const { return *manifest_; }

 private:
  const Manifest* manifest_;
  std::map<std::string, const Utterance*> by_id_;
  std::vector<std::string> speakers_;  // sorted unique
  std::vector<std::string> genres_;    // sorted unique
  std::map<std::string, std::vector<const Utterance*>> bona_by_speaker_;
  std::map<std::pair<std::string, std::string>, std::vector<const Utterance*>>
      bona_by_cell_;
  static const std::vector<const Utterance*> kEmpty;
};

// Balanced pair-wise trials over one utterance pool: target trials prefer a
// genre-mismatched test side, spoof trials use a spoofed test utterance of
// the enrolled speaker when one exists. Enrollment uses a single utterance.
// n_trials < 0 means one trial per pool utterance.
std::vector<TrialPair> sample_pairwise_trials(
    const std::vector<const Utterance*>& utterances, uint64_t seed,
    const TrialMix& mix = TrialMix{}, int n_trials = -1,
    const std::string& id_prefix = "trial");

// One bilevel task: a speaker-blocked batch of about batch_size utterances is
// drawn, one held-out genre forms the meta-test side and g_mtr others the
// meta-train side, and each side is turned into pair-wise trials.
// g_mtr < 0 selects the default G - 2.
MetaTask sample_meta_task(const ManifestIndex& index, int batch_size, int g_mtr,
                          uint64_t seed, const TrialMix& mix = TrialMix{});

struct EvalListConfig {
  int num_trials = 5000;
  int enroll_size = 3;
  double target_fraction = 0.5;
};

// Mixed-condition evaluation list: a target/nontarget list over per-speaker
// single-genre enrollment sets, with each test utterance independently
// replaced by its spoofed counterpart with probability substitution_rate.
std::vector<TrialPair> build_complex_eval(const ManifestIndex& eval_index,
                                          const EvalListConfig& cfg,
                                          double substitution_rate,
                                          uint64_t seed);

// Splits per (speaker, genre) cell: the last ceil(eval_fraction * cell) bona
// fide utterances (and their spoofed counterparts) become evaluation data.
// Speakers overlap between the two sides by construction.
std::pair<Manifest, Manifest> split_train_eval(const Manifest& manifest,
                                               double eval_fraction);

// ---- files ----
// Trial line: trial_id<TAB>enroll_ids(comma)<TAB>test_id<TAB>label<TAB>kind
void write_trials(const std::string& path, const std::vector<TrialPair>& trials);
std::vector<TrialPair> read_trials(const std::string& path);

void write_protocol(const std::string& path, const CgpProtocol& cgp);
CgpProtocol read_protocol(const std::string& path);

std::string group_set_to_string(const std::set<int>& ids);

}  // namespace sasv

#endif  // SASV_PROTOCOL_H_
