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

#include "sasv/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sasv {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string fmt_pct(double eer) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", eer * 100.0);
  return buf;
}

std::string fmt_full(double x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::vector<std::pair<double, bool>> select_scores(
    const std::vector<ScoreRecord>& records, EerMetric metric) {
  std::vector<std::pair<double, bool>> scores;
  scores.reserve(records.size());
  for (const auto& r : records) {
    if (metric == EerMetric::kSv) {
      if (r.trial_kind == TrialKind::kSpoof) continue;
      scores.push_back({r.asv_score, r.trial_kind == TrialKind::kTarget});
    } else {
      scores.push_back({r.sasv_score, r.label});
    }
  }
  return scores;
}

bool has_both_classes(const std::vector<std::pair<double, bool>>& scores) {
  bool pos = false, neg = false;
  for (const auto& [s, l] : scores) {
    (l ? pos : neg) = true;
    if (pos && neg) return true;
  }
  return false;
}

}  // namespace

std::vector<DetPoint> det_curve(
    const std::vector<std::pair<double, bool>>& scores) {
  std::vector<double> pos, neg;
  for (const auto& [s, label] : scores) {
    (label ? pos : neg).push_back(s);
  }
  if (pos.empty() || neg.empty()) {
    throw std::invalid_argument("det_curve: need both classes");
  }
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  std::vector<double> thresholds;
  thresholds.reserve(scores.size());
  for (const auto& [s, label] : scores) thresholds.push_back(s);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  std::vector<DetPoint> points;
  points.reserve(thresholds.size() + 1);
  points.push_back({kNegInf, 1.0, 0.0});
  double np = static_cast<double>(pos.size());
  double nn = static_cast<double>(neg.size());
  for (double t : thresholds) {
    // Acceptance is strictly-greater, so a score equal to the threshold is
    // rejected.
    double n_pos_rejected = static_cast<double>(
        std::upper_bound(pos.begin(), pos.end(), t) - pos.begin());
    double n_neg_accepted =
        nn - static_cast<double>(std::upper_bound(neg.begin(), neg.end(), t) -
                                 neg.begin());
    points.push_back({t, n_neg_accepted / nn, n_pos_rejected / np});
  }
  return points;
}

EerResult compute_eer(const std::vector<std::pair<double, bool>>& scores) {
  int np = 0, nn = 0;
  for (const auto& [s, label] : scores) {
    if (!std::isfinite(s)) {
      throw std::invalid_argument("compute_eer: non-finite score");
    }
    (label ? np : nn)++;
  }
  if (np == 0 || nn == 0) {
    throw std::invalid_argument(
        "compute_eer: need at least one positive and one negative");
  }
  std::vector<DetPoint> points = det_curve(scores);
  EerResult res;
  res.num_positive = np;
  res.num_negative = nn;
  for (size_t i = 0; i < points.size(); ++i) {
    double diff = points[i].frr - points[i].far;
    if (diff < 0.0) continue;
    if (diff == 0.0) {
      res.eer = points[i].far;
      res.threshold = points[i].threshold;
      return res;
    }
    // The crossing lies between point i-1 (FRR < FAR) and point i.
    const DetPoint& a = points[i - 1];
    const DetPoint& b = points[i];
    double d1 = a.far - a.frr;  // > 0
    double d2 = b.frr - b.far;  // > 0
    double alpha = d1 / (d1 + d2);
    res.eer = a.far + alpha * (b.far - a.far);
    res.threshold = std::isinf(a.threshold)
                        ? b.threshold
                        : a.threshold + alpha * (b.threshold - a.threshold);
    return res;
  }
  // FRR reaches 1 and FAR reaches 0 at the top of the sweep, so a crossing
  // always exists; this line is unreachable on valid input.
  throw std::logic_error("compute_eer: no FAR/FRR crossing found");
}

EerResult sv_eer(const std::vector<ScoreRecord>& records) {
  auto scores = select_scores(records, EerMetric::kSv);
  if (!has_both_classes(scores)) {
    throw std::invalid_argument(
        "sv_eer: need target and bona fide nontarget trials");
  }
  return compute_eer(scores);
}

EerResult sasv_eer(const std::vector<ScoreRecord>& records) {
  auto scores = select_scores(records, EerMetric::kSasv);
  if (!has_both_classes(scores)) {
    throw std::invalid_argument("sasv_eer: need both positive and negative trials");
  }
  return compute_eer(scores);
}

GenreMatrix genre_matrix(const std::vector<ScoreRecord>& records,
                         EerMetric metric) {
  GenreMatrix m;
  std::set<std::string> enroll, test;
  std::map<std::pair<std::string, std::string>, std::vector<ScoreRecord>> groups;
  for (const auto& r : records) {
    enroll.insert(r.enroll_genre);
    test.insert(r.test_genre);
    groups[{r.enroll_genre, r.test_genre}].push_back(r);
  }
  m.enroll_genres.assign(enroll.begin(), enroll.end());
  m.test_genres.assign(test.begin(), test.end());
  for (const auto& eg : m.enroll_genres) {
    for (const auto& tg : m.test_genres) {
      auto it = groups.find({eg, tg});
      std::optional<EerResult> cell;
      if (it != groups.end()) {
        auto scores = select_scores(it->second, metric);
        if (has_both_classes(scores)) cell = compute_eer(scores);
      }
      m.cells[{eg, tg}] = cell;
    }
  }
  return m;
}

std::map<std::string, std::optional<EerResult>> genre_breakdown(
    const std::vector<ScoreRecord>& records, EerMetric metric) {
  std::map<std::string, std::vector<ScoreRecord>> by_genre;
  for (const auto& r : records) by_genre[r.test_genre].push_back(r);
  std::map<std::string, std::optional<EerResult>> out;
  for (const auto& [genre, recs] : by_genre) {
    auto scores = select_scores(recs, metric);
    out[genre] = has_both_classes(scores)
                     ? std::optional<EerResult>(compute_eer(scores))
                     : std::nullopt;
  }
  return out;
}

DiffMatrix diff_report(const std::vector<ScoreRecord>& system,
                       const std::vector<ScoreRecord>& baseline,
                       EerMetric metric) {
  GenreMatrix sys = genre_matrix(system, metric);
  GenreMatrix base = genre_matrix(baseline, metric);

  DiffMatrix d;
  std::set<std::string> enroll(sys.enroll_genres.begin(), sys.enroll_genres.end());
  enroll.insert(base.enroll_genres.begin(), base.enroll_genres.end());
  std::set<std::string> test(sys.test_genres.begin(), sys.test_genres.end());
  test.insert(base.test_genres.begin(), base.test_genres.end());
  d.enroll_genres.assign(enroll.begin(), enroll.end());
  d.test_genres.assign(test.begin(), test.end());

  std::vector<std::string> mismatched;
  for (const auto& eg : d.enroll_genres) {
    for (const auto& tg : d.test_genres) {
      auto si = sys.cells.find({eg, tg});
      auto bi = base.cells.find({eg, tg});
      bool s_has = si != sys.cells.end() && si->second.has_value();
      bool b_has = bi != base.cells.end() && bi->second.has_value();
      if (s_has != b_has) {
        mismatched.push_back("(" + eg + "," + tg + ")");
        continue;
      }
      if (s_has) {
        d.cells[{eg, tg}] = bi->second->eer - si->second->eer;
      } else {
        d.cells[{eg, tg}] = std::nullopt;
      }
    }
  }
  if (!mismatched.empty()) {
    std::string msg = "diff_report: trial coverage mismatch in cells:";
    for (const auto& c : mismatched) msg += " " + c;
    throw std::invalid_argument(msg);
  }
  return d;
}

void write_scores(const std::string& path,
                  const std::vector<ScoreRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& r : records) {
    out << r.trial_id << '\t' << fmt_full(r.asv_score) << '\t'
        << fmt_full(r.sasv_score) << '\t' << (r.label ? 1 : 0) << '\t'
        << trial_kind_name(r.trial_kind) << '\t' << r.enroll_genre << '\t'
        << r.test_genre << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<ScoreRecord> read_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<ScoreRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    ScoreRecord r;
    std::string asv, sasv, label, kind;
    if (!std::getline(ss, r.trial_id, '\t') || !std::getline(ss, asv, '\t') ||
        !std::getline(ss, sasv, '\t') || !std::getline(ss, label, '\t') ||
        !std::getline(ss, kind, '\t') ||
        !std::getline(ss, r.enroll_genre, '\t') ||
        !std::getline(ss, r.test_genre)) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": malformed score line");
    }
    r.asv_score = std::stod(asv);
    r.sasv_score = std::stod(sasv);
    r.label = label == "1";
    r.trial_kind = trial_kind_from_name(kind);
    records.push_back(std::move(r));
  }
  return records;
}

namespace {

bool any_spoof(const std::vector<ScoreRecord>& records) {
  for (const auto& r : records) {
    if (r.trial_kind == TrialKind::kSpoof) return true;
  }
  return false;
}

int count_kind(const std::vector<ScoreRecord>& records, TrialKind k) {
  int n = 0;
  for (const auto& r : records) n += r.trial_kind == k;
  return n;
}

}  // namespace

std::string render_overall(const std::vector<ScoreRecord>& records) {
  std::ostringstream out;
  out << "== Overall ==\n";
  out << "trials: " << records.size() << " (target "
      << count_kind(records, TrialKind::kTarget) << ", nontarget "
      << count_kind(records, TrialKind::kNontarget) << ", spoof "
      << count_kind(records, TrialKind::kSpoof) << ")\n";
  EerResult sv = sv_eer(records);
  out << "SV-EER:   " << fmt_pct(sv.eer) << "%\n";
  if (any_spoof(records)) {
    EerResult sasv = sasv_eer(records);
    out << "SASV-EER: " << fmt_pct(sasv.eer) << "%\n";
  } else {
    out << "SASV-EER: -\n";
  }
  return out.str();
}

std::string render_genre_matrix(const GenreMatrix& m, const std::string& title) {
  std::ostringstream out;
  out << "== " << title << " (rows: enroll genre, cols: test genre) ==\n";
  out << "      ";
  for (const auto& tg : m.test_genres) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%8s", tg.c_str());
    out << buf;
  }
  out << '\n';
  for (const auto& eg : m.enroll_genres) {
    char head[16];
    std::snprintf(head, sizeof(head), "%-6s", eg.c_str());
    out << head;
    for (const auto& tg : m.test_genres) {
      auto it = m.cells.find({eg, tg});
      std::string cell = "-";
      if (it != m.cells.end() && it->second.has_value()) {
        cell = fmt_pct(it->second->eer);
      }
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%8s", cell.c_str());
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::string render_genre_breakdown(const std::vector<ScoreRecord>& records,
                                   EerMetric metric,
                                   const GenreGrouping& grouping) {
  auto breakdown = genre_breakdown(records, metric);
  std::ostringstream out;
  out << "== EER by test genre ==\n";
  for (size_t gi = 0; gi < grouping.groups.size(); ++gi) {
    out << "Group " << group_set_to_string({static_cast<int>(gi) + 1}) << ":";
    for (const auto& genre : grouping.groups[gi]) {
      auto it = breakdown.find(genre);
      std::string cell = "-";
      if (it != breakdown.end() && it->second.has_value()) {
        cell = fmt_pct(it->second->eer);
      }
      out << ' ' << genre << '=' << cell;
    }
    out << '\n';
  }
  // Genres outside the grouping, if any.
  for (const auto& [genre, res] : breakdown) {
    if (grouping.group_of(genre) == 0) {
      out << genre << '=' << (res ? fmt_pct(res->eer) : std::string("-"))
          << '\n';
    }
  }
  return out.str();
}

std::string render_diff_matrix(const DiffMatrix& m, const std::string& title) {
  std::ostringstream out;
  out << "== " << title
      << " (baseline - system; positive favors the system) ==\n";
  out << "      ";
  for (const auto& tg : m.test_genres) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%8s", tg.c_str());
    out << buf;
  }
  out << '\n';
  for (const auto& eg : m.enroll_genres) {
    char head[16];
    std::snprintf(head, sizeof(head), "%-6s", eg.c_str());
    out << head;
    for (const auto& tg : m.test_genres) {
      auto it = m.cells.find({eg, tg});
      std::string cell = "-";
      if (it != m.cells.end() && it->second.has_value()) {
        char val[16];
        std::snprintf(val, sizeof(val), "%+.2f", *it->second * 100.0);
        cell = val;
      }
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%8s", cell.c_str());
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::string csv_overall(const std::vector<ScoreRecord>& records) {
  std::ostringstream out;
  out << "metric,eer_percent\n";
  EerResult sv = sv_eer(records);
  out << "sv_eer," << fmt_pct(sv.eer) << '\n';
  if (any_spoof(records)) {
    out << "sasv_eer," << fmt_pct(sasv_eer(records).eer) << '\n';
  } else {
    out << "sasv_eer,-\n";
  }
  return out.str();
}

std::string csv_genre_matrix(const GenreMatrix& m) {
  std::ostringstream out;
  out << "enroll_genre";
  for (const auto& tg : m.test_genres) out << ',' << tg;
  out << '\n';
  for (const auto& eg : m.enroll_genres) {
    out << eg;
    for (const auto& tg : m.test_genres) {
      auto it = m.cells.find({eg, tg});
      out << ',';
      if (it != m.cells.end() && it->second.has_value()) {
        out << fmt_pct(it->second->eer);
      } else {
        out << '-';
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string csv_diff_matrix(const DiffMatrix& m) {
  std::ostringstream out;
  out << "enroll_genre";
  for (const auto& tg : m.test_genres) out << ',' << tg;
  out << '\n';
  for (const auto& eg : m.enroll_genres) {
    out << eg;
    for (const auto& tg : m.test_genres) {
      auto it = m.cells.find({eg, tg});
      out << ',';
      if (it != m.cells.end() && it->second.has_value()) {
        char val[16];
        std::snprintf(val, sizeof(val), "%+.2f", *it->second * 100.0);
        out << val;
      } else {
        out << '-';
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace sasv
