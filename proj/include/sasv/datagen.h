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

#ifndef SASV_DATAGEN_H_
#define SASV_DATAGEN_H_

#include <string>
#include <vector>

#include "sasv/tensor.h"

namespace sasv {

// Suffix appended to an utterance id by spoofify().
inline constexpr const char* kSpoofSuffix = "-sp";

// The ten default genre tags.
std::vector<std::string> default_genres();

struct CorpusSpec {
  int num_speakers = 20;
  std::vector<std::string> genres = default_genres();
  int utterances_per_speaker_genre = 10;
  int frames = 20;
  int feature_dim = 24;
  double speaker_scale = 1.0;
  double genre_scale = 0.5;
  double noise_scale = 0.25;
  double spoof_scale = 0.6;
  uint64_t seed = 1;

  // Throws std::invalid_argument naming the violated field.
  void validate() const;
};

struct Utterance {
  std::string utt_id;
  std::string speaker;
  std::string genre;
  bool is_spoof = false;
  Mat features;  // frames x feature_dim
  // Absolute feature file location once loaded from disk; empty for
  // in-memory corpora.
  std::string feature_path;
};

using Manifest = std::vector<Utterance>;

// Generates the bona fide corpus: features are speaker vector + genre vector
// + per-frame noise, all deterministic functions of (spec, seed). Every
// (speaker, genre) cell holds exactly utterances_per_speaker_genre items.
// Feature values are rounded to float32 precision so the in-memory corpus
// matches what a save/load round trip produces.
Manifest synth_corpus(const CorpusSpec& spec);

// Simulates the re-vocoding channel: a fixed linear distortion plus an
// additive artifact vector, both scaled by spoof_scale and derived from the
// seed only, so a single "vocoder" is shared by the whole corpus. The
// speaker component direction is preserved. Throws if u is already spoofed.
Utterance spoofify(const Utterance& u, double spoof_scale, uint64_t seed);

// Bona fide corpus plus one spoofed counterpart per utterance.
Manifest synth_corpus_with_spoofs(const CorpusSpec& spec);

// ---- corpus files ----
// Manifest line: utt_id<TAB>speaker<TAB>genre<TAB>spoof(0|1)<TAB>feature_path
// Feature file: uint32 frames, uint32 dim, then float32 row-major, all LE.

void write_features(const std::string& path, const Mat& features);
Mat read_features(const std::string& path);

// Writes manifest.tsv plus one feature file per utterance under dir/feats/.
// dir must not exist yet; the caller stages and renames for atomicity.
void save_corpus(const Manifest& manifest, const std::string& dir);

// Loads a manifest and all referenced feature files. Paths in the manifest
// are resolved relative to the manifest's directory.
Manifest load_corpus(const std::string& manifest_path);

// Manifest rows only (no features); useful for tools that only need labels.
Manifest load_manifest_rows(const std::string& manifest_path);

}  // namespace sasv

#endif  // SASV_DATAGEN_H_
