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

#ifndef SASV_METRICS_H_
#define SASV_METRICS_H_

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sasv/protocol.h"

namespace sasv {

struct ScoreRecord {
  std::string trial_id;
  double asv_score = 0.0;   // cosine of e_asv embeddings
  double sasv_score = 0.0;  // back-end probability, in (0,1)
  bool label = false;
  TrialKind trial_kind = TrialKind::kNontarget;
  std::string enroll_genre;
  std::string test_genre;
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
  int num_positive = 0;
  int num_negative = 0;
};

// One operating point of the detection trade-off.
struct DetPoint {
  double threshold;
  double far;
  double frr;
};

// Operating points swept over all distinct score thresholds with
// strictly-greater acceptance, preceded by the accept-everything point.
std::vector<DetPoint> det_curve(const std::vector<std::pair<double, bool>>& scores);

// Equal error rate: the crossing of FRR and FAR along the threshold sweep,
// linearly interpolated between the bracketing operating points when the
// crossing falls between them. Throws on single-class input.
EerResult compute_eer(const std::vector<std::pair<double, bool>>& scores);

enum class EerMetric { kSv, kSasv };

// SV-EER: asv_score, target vs bona fide nontarget; spoof trials excluded.
EerResult sv_eer(const std::vector<ScoreRecord>& records);

// SASV-EER: sasv_score, label=true vs label=false (nontarget and spoof).
EerResult sasv_eer(const std::vector<ScoreRecord>& records);

// Per-(enroll_genre, test_genre) EER. Cells without both classes are absent.
struct GenreMatrix {
  std::vector<std::string> enroll_genres;  // sorted, present in the records
  std::vector<std::string> test_genres;
  std::map<std::pair<std::string, std::string>, std::optional<EerResult>> cells;
};

GenreMatrix genre_matrix(const std::vector<ScoreRecord>& records,
                         EerMetric metric);

// Per-test-genre EER (marginal over enrollment genres).
std::map<std::string, std::optional<EerResult>> genre_breakdown(
    const std::vector<ScoreRecord>& records, EerMetric metric);

// Signed per-cell difference baseline EER - system EER (positive means the
// system improves on the baseline). Throws if cell coverage differs,
// listing the mismatched cells.
struct DiffMatrix {
  std::vector<std::string> enroll_genres;
  std::vector<std::string> test_genres;
  std::map<std::pair<std::string, std::string>, std::optional<double>> cells;
};

DiffMatrix diff_report(const std::vector<ScoreRecord>& system,
                       const std::vector<ScoreRecord>& baseline,
                       EerMetric metric);

// ---- score files ----
// Line: trial_id<TAB>asv<TAB>sasv<TAB>label<TAB>kind<TAB>enroll_genre<TAB>test_genre
void write_scores(const std::string& path, const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> read_scores(const std::string& path);

// ---- report rendering ----

// Overall SV-EER/SASV-EER block. SASV-EER is reported as "-" on lists with
// no spoof trials, matching the usual convention for clean evaluation sets.
std::string render_overall(const std::vector<ScoreRecord>& records);
std::string render_genre_matrix(const GenreMatrix& m, const std::string& title);
std::string render_genre_breakdown(const std::vector<ScoreRecord>& records,
                                   EerMetric metric,
                                   const GenreGrouping& grouping);
std::string render_diff_matrix(const DiffMatrix& m, const std::string& title);

std::string csv_overall(const std::vector<ScoreRecord>& records);
std::string csv_genre_matrix(const GenreMatrix& m);
std::string csv_diff_matrix(const DiffMatrix& m);

}  // namespace sasv

#endif  // SASV_METRICS_H_
