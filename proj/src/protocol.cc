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

#include "sasv/protocol.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sasv/rng.h"

namespace sasv {

namespace {

const char* kRoman[] = {"", "I", "II", "III", "IV", "V", "VI", "VII", "VIII",
                        "IX", "X"};

std::string group_name(int id) {
  if (id >= 1 && id <= 10) return kRoman[id];
  return std::to_string(id);
}

int parse_group_name(const std::string& s) {
  for (int i = 1; i <= 10; ++i) {
    if (s == kRoman[i]) return i;
  }
  return std::stoi(s);
}

std::string strip_spoof_suffix(const std::string& id) {
  const std::string suffix = kSpoofSuffix;
  if (id.size() > suffix.size() &&
      id.compare(id.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return id.substr(0, id.size() - suffix.size());
  }
  return id;
}

}  // namespace

const std::vector<const Utterance*> ManifestIndex::kEmpty;

GenreGrouping GenreGrouping::default_grouping() {
  GenreGrouping g;
  g.groups = {{"dr", "vl", "sp"}, {"en", "in", "pl"}, {"lb", "mo"}, {"si", "re"}};
  return g;
}

void GenreGrouping::validate(const std::vector<std::string>& genres) const {
  std::set<std::string> seen;
  size_t total = 0;
  for (const auto& group : groups) {
    for (const auto& g : group) {
      if (!seen.insert(g).second) {
        throw std::invalid_argument("GenreGrouping: genre " + g +
                                    " appears in more than one group");
      }
      ++total;
    }
  }
  std::set<std::string> corpus(genres.begin(), genres.end());
  if (corpus != seen) {
    throw std::invalid_argument(
        "GenreGrouping: groups must cover exactly the corpus genres");
  }
  (void)total;
}

int GenreGrouping::group_of(const std::string& genre) const {
  for (size_t i = 0; i < groups.size(); ++i) {
    for (const auto& g : groups[i]) {
      if (g == genre) return static_cast<int>(i) + 1;
    }
  }
  return 0;
}

std::vector<std::string> GenreGrouping::genres_of_groups(
    const std::set<int>& ids) const {
  std::vector<std::string> out;
  for (int id : ids) {
    if (id < 1 || id > static_cast<int>(groups.size())) {
      throw std::invalid_argument("GenreGrouping: no group " +
                                  std::to_string(id));
    }
    for (const auto& g : groups[id - 1]) out.push_back(g);
  }
  return out;
}

CgpProtocol build_cgp(const GenreGrouping& grouping, const std::string& name) {
  if (grouping.groups.size() != 4) {
    throw std::invalid_argument("build_cgp: expects exactly 4 genre groups");
  }
  // Held-out group per protocol.
  int unseen = 0;
  if (name == "CGP I") {
    unseen = 4;
  } else if (name == "CGP II") {
    unseen = 3;
  } else if (name == "CGP III") {
    unseen = 2;
  } else if (name == "CGP IV") {
    unseen = 1;
  } else {
    throw std::invalid_argument("build_cgp: unknown protocol name '" + name +
                                "' (expected CGP I..CGP IV)");
  }
  CgpProtocol cgp;
  cgp.name = name;
  cgp.unseen_groups = {unseen};
  for (int g = 1; g <= 4; ++g) {
    if (g != unseen) cgp.seen_groups.insert(g);
  }
  return cgp;
}

Manifest filter_training(const Manifest& manifest, const GenreGrouping& grouping,
                         const CgpProtocol& cgp) {
  Manifest out;
  for (const auto& u : manifest) {
    int g = grouping.group_of(u.genre);
    if (g == 0) {
      throw std::invalid_argument("filter_training: genre " + u.genre +
                                  " is not covered by the grouping");
    }
    if (cgp.seen_groups.count(g)) out.push_back(u);
  }
  if (out.empty()) {
    throw std::runtime_error(
        "filter_training: no utterances left, training impossible");
  }
  return out;
}

bool label_trial(bool test_is_genuine, bool speaker_match) {
  return test_is_genuine && speaker_match;
}

const char* trial_kind_name(TrialKind kind) {
  switch (kind) {
    case TrialKind::kTarget:
      return "target";
    case TrialKind::kNontarget:
      return "nontarget";
    case TrialKind::kSpoof:
      return "spoof";
  }
  return "?";
}

TrialKind trial_kind_from_name(const std::string& name) {
  if (name == "target") return TrialKind::kTarget;
  if (name == "nontarget") return TrialKind::kNontarget;
  if (name == "spoof") return TrialKind::kSpoof;
  throw std::invalid_argument("unknown trial kind '" + name + "'");
}

ManifestIndex::ManifestIndex(const Manifest& manifest) : manifest_(&manifest) {
  std::set<std::string> spk, gen;
  for (const auto& u : manifest) {
    if (!by_id_.emplace(u.utt_id, &u).second) {
      throw std::invalid_argument("ManifestIndex: duplicate utt_id " + u.utt_id);
    }
    spk.insert(u.speaker);
    gen.insert(u.genre);
    if (!u.is_spoof) {
      bona_by_speaker_[u.speaker].push_back(&u);
      bona_by_cell_[{u.speaker, u.genre}].push_back(&u);
    }
  }
  speakers_.assign(spk.begin(), spk.end());
  genres_.assign(gen.begin(), gen.end());
}

const Utterance* ManifestIndex::by_id(const std::string& utt_id) const {
  auto it = by_id_.find(utt_id);
  return it == by_id_.end() ? nullptr : it->second;
}

const Utterance& ManifestIndex::require(const std::string& utt_id) const {
  const Utterance* u = by_id(utt_id);
  if (!u) throw std::runtime_error("unknown utterance id " + utt_id);
  return *u;
}

const Utterance* ManifestIndex::spoof_counterpart(
    const std::string& utt_id) const {
  const Utterance* u = by_id(utt_id + kSpoofSuffix);
  return (u && u->is_spoof) ? u : nullptr;
}

const std::vector<const Utterance*>& ManifestIndex::bona_of(
    const std::string& speaker) const {
  auto it = bona_by_speaker_.find(speaker);
  return it == bona_by_speaker_.end() ? kEmpty : it->second;
}

std::vector<const Utterance*> ManifestIndex::bona_cell(
    const std::string& speaker, const std::string& genre) const {
  auto it = bona_by_cell_.find({speaker, genre});
  return it == bona_by_cell_.end() ? std::vector<const Utterance*>{}
                                   : it->second;
}

namespace {

struct TrialPools {
  // Bona fide utterances keyed by speaker, pool order.
  std::vector<std::pair<std::string, std::vector<const Utterance*>>> bona;
  std::vector<const Utterance*> spoofs;
  std::map<std::string, size_t> speaker_slot;  // into bona

  const std::vector<const Utterance*>* bona_of(const std::string& spk) const {
    auto it = speaker_slot.find(spk);
    return it == speaker_slot.end() ? nullptr : &bona[it->second].second;
  }
};

TrialPools build_pools(const std::vector<const Utterance*>& utterances) {
  TrialPools p;
  for (const Utterance* u : utterances) {
    if (u->is_spoof) {
      p.spoofs.push_back(u);
      continue;
    }
    auto it = p.speaker_slot.find(u->speaker);
    if (it == p.speaker_slot.end()) {
      p.speaker_slot[u->speaker] = p.bona.size();
      p.bona.push_back({u->speaker, {u}});
    } else {
      p.bona[it->second].second.push_back(u);
    }
  }
  return p;
}

TrialPair make_trial(const Utterance* enroll, const Utterance* test) {
  TrialPair t;
  t.enroll_utts = {enroll->utt_id};
  t.test_utt = test->utt_id;
  t.enroll_genre = enroll->genre;
  t.test_genre = test->genre;
  bool match = enroll->speaker == test->speaker;
  t.label = label_trial(!test->is_spoof, match);
  t.trial_kind = test->is_spoof
                     ? TrialKind::kSpoof
                     : (match ? TrialKind::kTarget : TrialKind::kNontarget);
  return t;
}

}  // namespace

std::vector<TrialPair> sample_pairwise_trials(
    const std::vector<const Utterance*>& utterances, uint64_t seed,
    const TrialMix& mix, int n_trials, const std::string& id_prefix) {
  TrialPools pools = build_pools(utterances);
  if (pools.bona.size() < 2) {
    throw std::invalid_argument(
        "sample_pairwise_trials: need at least 2 speakers with bona fide "
        "utterances");
  }
  std::vector<size_t> pair_speakers;  // slots with >= 2 bona utterances
  for (size_t i = 0; i < pools.bona.size(); ++i) {
    if (pools.bona[i].second.size() >= 2) pair_speakers.push_back(i);
  }
  if (pair_speakers.empty()) {
    throw std::runtime_error(
        "sample_pairwise_trials: cannot form any target trial (all speakers "
        "singleton)");
  }

  int n = n_trials >= 0 ? n_trials : static_cast<int>(utterances.size());
  double total = mix.target + mix.nontarget + mix.spoof;
  if (total <= 0.0) throw std::invalid_argument("TrialMix: weights sum to 0");
  int nt = static_cast<int>(std::lround(n * mix.target / total));
  int nn = static_cast<int>(std::lround(n * mix.nontarget / total));
  int ns = n - nt - nn;
  if (ns < 0) {
    nn += ns;
    ns = 0;
  }
  if (pools.spoofs.empty() && ns > 0) {
    nt += ns / 2;
    nn += ns - ns / 2;
    ns = 0;
  }

  Rng rng(derive_seed(seed, "pairwise-trials"));
  std::vector<TrialKind> kinds;
  kinds.insert(kinds.end(), nt, TrialKind::kTarget);
  kinds.insert(kinds.end(), nn, TrialKind::kNontarget);
  kinds.insert(kinds.end(), ns, TrialKind::kSpoof);
  rng.shuffle(kinds);

  std::vector<TrialPair> trials;
  trials.reserve(kinds.size());
  for (size_t i = 0; i < kinds.size(); ++i) {
    const Utterance* enroll = nullptr;
    const Utterance* test = nullptr;
    switch (kinds[i]) {
      case TrialKind::kTarget: {
        const auto& utts =
            pools.bona[pair_speakers[rng.index(pair_speakers.size())]].second;
        enroll = utts[rng.index(utts.size())];
        std::vector<const Utterance*> cross, same;
        for (const Utterance* u : utts) {
          if (u == enroll) continue;
          (u->genre != enroll->genre ? cross : same).push_back(u);
        }
        // Channel-mismatch simulation: prefer a genre-mismatched test side.
        const auto& cand = cross.empty() ? same : cross;
        test = cand[rng.index(cand.size())];
        break;
      }
      case TrialKind::kNontarget: {
        size_t a = rng.index(pools.bona.size());
        size_t b = rng.index(pools.bona.size() - 1);
        if (b >= a) ++b;
        const auto& ua = pools.bona[a].second;
        const auto& ub = pools.bona[b].second;
        enroll = ua[rng.index(ua.size())];
        test = ub[rng.index(ub.size())];
        break;
      }
      case TrialKind::kSpoof: {
        test = pools.spoofs[rng.index(pools.spoofs.size())];
        const auto* own = pools.bona_of(test->speaker);
        if (own && !own->empty()) {
          enroll = (*own)[rng.index(own->size())];
        } else {
          const auto& ua = pools.bona[rng.index(pools.bona.size())].second;
          enroll = ua[rng.index(ua.size())];
        }
        break;
      }
    }
    TrialPair t = make_trial(enroll, test);
    char id[64];
    std::snprintf(id, sizeof(id), "%s-%06zu", id_prefix.c_str(), i);
    t.trial_id = id;
    trials.push_back(std::move(t));
  }
  return trials;
}

namespace {

bool side_supports_trials(const std::vector<const Utterance*>& side) {
  std::map<std::string, int> bona_count;
  for (const Utterance* u : side) {
    if (!u->is_spoof) ++bona_count[u->speaker];
  }
  if (bona_count.size() < 2) return false;
  for (const auto& [spk, c] : bona_count) {
    if (c >= 2) return true;
  }
  return false;
}

}  // namespace

MetaTask sample_meta_task(const ManifestIndex& index, int batch_size, int g_mtr,
                          uint64_t seed, const TrialMix& mix) {
  if (batch_size < 2) {
    throw std::invalid_argument("sample_meta_task: batch_size must be >= 2");
  }
  int num_genres = static_cast<int>(index.genres().size());
  if (g_mtr < 0) g_mtr = num_genres - 2;
  if (g_mtr < 1) {
    throw std::invalid_argument("sample_meta_task: G_mtr must be >= 1");
  }
  if (num_genres < g_mtr + 1) {
    throw std::invalid_argument(
        "sample_meta_task: manifest needs at least G_mtr + 1 genres");
  }

  // Speakers that can contribute a 2-utterance pair in two distinct genres.
  std::vector<std::string> eligible;
  std::map<std::string, std::vector<std::string>> cells_of;
  for (const auto& spk : index.speakers()) {
    std::vector<std::string> cells;
    for (const auto& g : index.genres()) {
      if (index.bona_cell(spk, g).size() >= 2) cells.push_back(g);
    }
    if (cells.size() >= 2) {
      eligible.push_back(spk);
      cells_of[spk] = std::move(cells);
    }
  }
  if (eligible.size() < 2) {
    throw std::runtime_error(
        "sample_meta_task: too few speakers with multi-genre pairs");
  }

  const int kAttempts = 100;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    Rng rng(derive_seed(seed, "meta-attempt", attempt));
    // Two genres per speaker, so the batch needs enough speakers to expose
    // g_mtr + 1 distinct genres.
    int min_spk = std::max(2, (g_mtr + 2) / 2);
    size_t n_spk = std::min(
        eligible.size(),
        static_cast<size_t>(std::max(min_spk, batch_size / 6)));
    std::vector<std::string> chosen = eligible;
    rng.shuffle(chosen);
    chosen.resize(n_spk);

    // Speaker-blocked batch: per speaker two genres, two bona fide
    // utterances each, plus their spoofed counterparts when present.
    std::vector<const Utterance*> pool;
    for (const auto& spk : chosen) {
      std::vector<std::string> cells = cells_of[spk];
      rng.shuffle(cells);
      cells.resize(2);
      for (const auto& genre : cells) {
        std::vector<const Utterance*> cell = index.bona_cell(spk, genre);
        rng.shuffle(cell);
        for (int u = 0; u < 2; ++u) {
          pool.push_back(cell[u]);
          const Utterance* sp = index.spoof_counterpart(cell[u]->utt_id);
          if (sp && u == 0) pool.push_back(sp);
        }
      }
    }

    std::set<std::string> present_set;
    for (const Utterance* u : pool) present_set.insert(u->genre);
    std::vector<std::string> present(present_set.begin(), present_set.end());
    if (static_cast<int>(present.size()) < g_mtr + 1) continue;
    rng.shuffle(present);

    for (const auto& g_test : present) {
      std::vector<std::string> others;
      for (const auto& g : present) {
        if (g != g_test) others.push_back(g);
      }
      if (static_cast<int>(others.size()) < g_mtr) continue;
      others.resize(g_mtr);
      std::set<std::string> train_set(others.begin(), others.end());

      std::vector<const Utterance*> test_side, train_side;
      for (const Utterance* u : pool) {
        if (u->genre == g_test) {
          test_side.push_back(u);
        } else if (train_set.count(u->genre)) {
          train_side.push_back(u);
        }
      }
      if (!side_supports_trials(test_side) || !side_supports_trials(train_side)) {
        continue;
      }

      MetaTask task;
      task.train_genres = train_set;
      task.test_genres = {g_test};
      task.meta_train = sample_pairwise_trials(
          train_side, derive_seed(seed, "meta-train-trials", attempt), mix, -1,
          "mtr");
      task.meta_test = sample_pairwise_trials(
          test_side, derive_seed(seed, "meta-test-trials", attempt), mix, -1,
          "mte");
      return task;
    }
  }
  throw std::runtime_error(
      "sample_meta_task: could not assemble a meta-task; some genre has too "
      "few utterances to form trials");
}

std::vector<TrialPair> build_complex_eval(const ManifestIndex& eval_index,
                                          const EvalListConfig& cfg,
                                          double substitution_rate,
                                          uint64_t seed) {
  if (cfg.num_trials < 1) {
    throw std::invalid_argument("EvalListConfig.num_trials: must be >= 1");
  }
  if (cfg.enroll_size < 1) {
    throw std::invalid_argument("EvalListConfig.enroll_size: must be >= 1");
  }
  if (cfg.target_fraction < 0.0 || cfg.target_fraction > 1.0) {
    throw std::invalid_argument("EvalListConfig.target_fraction: must be in [0,1]");
  }
  if (substitution_rate < 0.0 || substitution_rate > 1.0) {
    throw std::invalid_argument("substitution_rate must be in [0,1]");
  }

  Rng rng(derive_seed(seed, "complex-eval"));

  struct EnrollSet {
    std::string speaker;
    std::string genre;
    std::vector<std::string> ids;
  };
  std::vector<EnrollSet> sets;
  std::set<std::string> enrolled;
  for (const auto& spk : eval_index.speakers()) {
    std::vector<std::string> candidates;
    for (const auto& g : eval_index.genres()) {
      if (eval_index.bona_cell(spk, g).size() >=
          static_cast<size_t>(cfg.enroll_size)) {
        candidates.push_back(g);
      }
    }
    if (candidates.empty()) continue;
    const std::string& genre = candidates[rng.index(candidates.size())];
    std::vector<const Utterance*> cell = eval_index.bona_cell(spk, genre);
    rng.shuffle(cell);
    EnrollSet es;
    es.speaker = spk;
    es.genre = genre;
    for (int i = 0; i < cfg.enroll_size; ++i) {
      es.ids.push_back(cell[i]->utt_id);
      enrolled.insert(cell[i]->utt_id);
    }
    sets.push_back(std::move(es));
  }
  if (sets.size() < 2) {
    throw std::runtime_error(
        "build_complex_eval: need enrollment sets for at least 2 speakers");
  }

  // Bona fide test pools, enrollment utterances excluded.
  std::vector<const Utterance*> pool;
  for (const auto& u : eval_index.manifest()) {
    if (!u.is_spoof && !enrolled.count(u.utt_id)) pool.push_back(&u);
  }
  std::map<std::string, std::vector<const Utterance*>> pool_same;
  for (const Utterance* u : pool) pool_same[u->speaker].push_back(u);
  std::map<std::string, std::vector<const Utterance*>> pool_other;
  for (const auto& es : sets) {
    auto& others = pool_other[es.speaker];
    if (!others.empty()) continue;
    for (const Utterance* u : pool) {
      if (u->speaker != es.speaker) others.push_back(u);
    }
  }

  std::vector<TrialPair> trials;
  trials.reserve(cfg.num_trials);
  for (int i = 0; i < cfg.num_trials; ++i) {
    const EnrollSet& es = sets[rng.index(sets.size())];
    bool want_target = rng.uniform() < cfg.target_fraction;
    const Utterance* test = nullptr;
    const auto& same = pool_same[es.speaker];
    const auto& other = pool_other[es.speaker];
    if (want_target && !same.empty()) {
      test = same[rng.index(same.size())];
    } else if (!other.empty()) {
      test = other[rng.index(other.size())];
    } else {
      test = same[rng.index(same.size())];
    }
    bool substitute = rng.uniform() < substitution_rate;
    if (substitute) {
      const Utterance* sp = eval_index.spoof_counterpart(test->utt_id);
      if (!sp) {
        throw std::runtime_error(
            "build_complex_eval: missing spoofed counterpart for " +
            test->utt_id);
      }
      test = sp;
    }
    TrialPair t;
    char id[32];
    std::snprintf(id, sizeof(id), "ev-%06d", i);
    t.trial_id = id;
    t.enroll_utts = es.ids;
    t.test_utt = test->utt_id;
    t.enroll_genre = es.genre;
    t.test_genre = test->genre;
    bool match = test->speaker == es.speaker;
    t.label = label_trial(!test->is_spoof, match);
    t.trial_kind = test->is_spoof
                       ? TrialKind::kSpoof
                       : (match ? TrialKind::kTarget : TrialKind::kNontarget);
    trials.push_back(std::move(t));
  }
  return trials;
}

std::pair<Manifest, Manifest> split_train_eval(const Manifest& manifest,
                                               double eval_fraction) {
  if (eval_fraction <= 0.0 || eval_fraction >= 1.0) {
    throw std::invalid_argument("split_train_eval: fraction must be in (0,1)");
  }
  std::map<std::pair<std::string, std::string>, std::vector<const Utterance*>>
      cells;
  for (const auto& u : manifest) {
    if (!u.is_spoof) cells[{u.speaker, u.genre}].push_back(&u);
  }
  std::set<std::string> eval_ids;
  for (auto& [key, utts] : cells) {
    size_t k = utts.size();
    size_t n_eval = static_cast<size_t>(std::ceil(eval_fraction * k));
    if (n_eval >= k) n_eval = k - 1;  // keep at least one training utterance
    for (size_t i = k - n_eval; i < k; ++i) eval_ids.insert(utts[i]->utt_id);
  }
  Manifest train, eval;
  for (const auto& u : manifest) {
    const std::string src = u.is_spoof ? strip_spoof_suffix(u.utt_id) : u.utt_id;
    if (eval_ids.count(src)) {
      eval.push_back(u);
    } else {
      train.push_back(u);
    }
  }
  return {std::move(train), std::move(eval)};
}

void write_trials(const std::string& path, const std::vector<TrialPair>& trials) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& t : trials) {
    out << t.trial_id << '\t';
    for (size_t i = 0; i < t.enroll_utts.size(); ++i) {
      if (i) out << ',';
      out << t.enroll_utts[i];
    }
    out << '\t' << t.test_utt << '\t' << (t.label ? 1 : 0) << '\t'
        << trial_kind_name(t.trial_kind) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<TrialPair> read_trials(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<TrialPair> trials;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string enrolls, label, kind;
    TrialPair t;
    if (!std::getline(ss, t.trial_id, '\t') || !std::getline(ss, enrolls, '\t') ||
        !std::getline(ss, t.test_utt, '\t') || !std::getline(ss, label, '\t') ||
        !std::getline(ss, kind)) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": malformed trial line");
    }
    std::istringstream es(enrolls);
    std::string id;
    while (std::getline(es, id, ',')) t.enroll_utts.push_back(id);
    if (t.enroll_utts.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": empty enrollment list");
    }
    if (label != "0" && label != "1") {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": label must be 0 or 1");
    }
    t.label = label == "1";
    t.trial_kind = trial_kind_from_name(kind);
    if (t.label != (t.trial_kind == TrialKind::kTarget)) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": label inconsistent with trial kind");
    }
    trials.push_back(std::move(t));
  }
  return trials;
}

void write_protocol(const std::string& path, const CgpProtocol& cgp) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "name\t" << cgp.name << '\n';
  out << "seen\t" << group_set_to_string(cgp.seen_groups) << '\n';
  out << "unseen\t" << group_set_to_string(cgp.unseen_groups) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

CgpProtocol read_protocol(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  CgpProtocol cgp;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key, value;
    std::getline(ss, key, '\t');
    std::getline(ss, value);
    std::set<int>* target = nullptr;
    if (key == "name") {
      cgp.name = value;
      continue;
    } else if (key == "seen") {
      target = &cgp.seen_groups;
    } else if (key == "unseen") {
      target = &cgp.unseen_groups;
    } else {
      throw std::runtime_error(path + ": unknown protocol key '" + key + "'");
    }
    std::istringstream vs(value);
    std::string item;
    while (std::getline(vs, item, ',')) target->insert(parse_group_name(item));
  }
  if (cgp.name.empty() || cgp.seen_groups.empty() || cgp.unseen_groups.empty()) {
    throw std::runtime_error(path + ": incomplete protocol file");
  }
  return cgp;
}

std::string group_set_to_string(const std::set<int>& ids) {
  std::string out;
  for (int id : ids) {
    if (!out.empty()) out += ',';
    out += group_name(id);
  }
  return out;
}

}  // namespace sasv
