#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "sasv/metrics.h"
#include "sasv/rng.h"
#include "test_util.h"

using namespace sasv;
using testutil::brute_force_eer;
namespace fs = std::filesystem;

namespace {

std::vector<std::pair<double, bool>> random_scores(Rng& rng, int n_pos,
                                                   int n_neg, double sep) {
  std::vector<std::pair<double, bool>> scores;
  for (int i = 0; i < n_pos; ++i) scores.push_back({sep + rng.gaussian(), true});
  for (int i = 0; i < n_neg; ++i) scores.push_back({rng.gaussian(), false});
  rng.shuffle(scores);
  return scores;
}

ScoreRecord rec(const std::string& id, double asv, double sasv, TrialKind kind,
                const std::string& eg = "dr", const std::string& tg = "vl") {
  ScoreRecord r;
  r.trial_id = id;
  r.asv_score = asv;
  r.sasv_score = sasv;
  r.trial_kind = kind;
  r.label = kind == TrialKind::kTarget;
  r.enroll_genre = eg;
  r.test_genre = tg;
  return r;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("perfectly separated scores give EER 0") {
  std::vector<std::pair<double, bool>> scores{
      {0.9, true}, {0.8, true}, {0.2, false}, {0.1, false}};
  EerResult r = compute_eer(scores);
  CHECK(r.eer == doctest::Approx(0.0));
  CHECK(r.num_positive == 2);
  CHECK(r.num_negative == 2);
}

TEST_CASE("inverted labels on separated scores give the degenerate EER 1") {
  std::vector<std::pair<double, bool>> scores{
      {0.9, false}, {0.8, false}, {0.2, true}, {0.1, true}};
  EerResult r = compute_eer(scores);
  CHECK(r.eer == doctest::Approx(1.0));
}

// Interleaved set {pos: 0.9, 0.4; neg: 0.6, 0.1}: one miss and one false
// alarm at the crossing, so FRR = FAR = 1/2 under the per-class convention.
// Frozen from the brute-force oracle.
TEST_CASE("interleaved four-score set matches the brute-force oracle") {
  std::vector<std::pair<double, bool>> scores{
      {0.9, true}, {0.4, true}, {0.6, false}, {0.1, false}};
  double oracle = brute_force_eer(scores);
  EerResult r = compute_eer(scores);
  CHECK(r.eer == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(r.eer == doctest::Approx(0.5));
}

TEST_CASE("compute_eer matches the brute-force oracle on random sets") {
  Rng rng(51);
  for (int trial = 0; trial < 60; ++trial) {
    int n_pos = 2 + static_cast<int>(rng.index(60));
    int n_neg = 2 + static_cast<int>(rng.index(60));
    double sep = rng.uniform() * 2.0;
    auto scores = random_scores(rng, n_pos, n_neg, sep);
    EerResult r = compute_eer(scores);
    CHECK(std::abs(r.eer - brute_force_eer(scores)) < 1e-9);
  }
}

TEST_CASE("EER is invariant under strictly increasing transforms") {
  Rng rng(52);
  auto scores = random_scores(rng, 40, 40, 0.8);
  double base = compute_eer(scores).eer;
  auto transformed = scores;
  for (auto& [s, l] : transformed) s = std::tanh(s) * 3.0 + 7.0;
  CHECK(compute_eer(transformed).eer == doctest::Approx(base).epsilon(1e-12));
  for (auto& [s, l] : transformed) s = std::exp(s * 0.1);
  CHECK(compute_eer(transformed).eer == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("EER is symmetric under label flip with score negation") {
  Rng rng(53);
  auto scores = random_scores(rng, 30, 50, 0.5);
  double base = compute_eer(scores).eer;
  auto flipped = scores;
  for (auto& [s, l] : flipped) {
    s = -s;
    l = !l;
  }
  CHECK(compute_eer(flipped).eer == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("compute_eer rejects single-class input") {
  std::vector<std::pair<double, bool>> only_pos{{0.5, true}, {0.7, true}};
  CHECK_THROWS_AS(compute_eer(only_pos), std::invalid_argument);
}

TEST_CASE("sv_eer ignores spoof trials entirely") {
  std::vector<ScoreRecord> records;
  Rng rng(54);
  for (int i = 0; i < 50; ++i) {
    records.push_back(rec("t" + std::to_string(i), 0.5 + 0.3 * rng.gaussian(),
                          0.5, TrialKind::kTarget));
    records.push_back(rec("n" + std::to_string(i), -0.1 + 0.3 * rng.gaussian(),
                          0.4, TrialKind::kNontarget));
  }
  EerResult base = sv_eer(records);

  auto with_spoofs = records;
  for (int i = 0; i < 30; ++i) {
    with_spoofs.push_back(
        rec("s" + std::to_string(i), 0.9, 0.9, TrialKind::kSpoof));
  }
  EerResult same = sv_eer(with_spoofs);
  CHECK(base.eer == same.eer);
  CHECK(base.num_negative == same.num_negative);

  // With no spoof trials sv_eer equals compute_eer over the asv scores.
  std::vector<std::pair<double, bool>> plain;
  for (const auto& r : records) {
    plain.push_back({r.asv_score, r.trial_kind == TrialKind::kTarget});
  }
  CHECK(sv_eer(records).eer == doctest::Approx(compute_eer(plain).eer));
}

TEST_CASE("sasv_eer counts spoofs as negatives and is rank-based") {
  std::vector<ScoreRecord> records;
  Rng rng(55);
  for (int i = 0; i < 60; ++i) {
    records.push_back(rec("t" + std::to_string(i), 0.8,
                          0.7 + 0.1 * rng.gaussian(), TrialKind::kTarget));
    records.push_back(rec("n" + std::to_string(i), 0.1,
                          0.3 + 0.1 * rng.gaussian(), TrialKind::kNontarget));
    records.push_back(rec("s" + std::to_string(i), 0.8,
                          0.35 + 0.1 * rng.gaussian(), TrialKind::kSpoof));
  }
  EerResult base = sasv_eer(records);
  CHECK(base.num_positive == 60);
  CHECK(base.num_negative == 120);

  // Strictly increasing transform leaves the EER unchanged.
  auto transformed = records;
  for (auto& r : transformed) {
    r.sasv_score = 1.0 / (1.0 + std::exp(-5.0 * r.sasv_score));
  }
  CHECK(sasv_eer(transformed).eer == doctest::Approx(base.eer).epsilon(1e-12));

  // Perfect separation: spoofs and nontargets below all targets.
  std::vector<ScoreRecord> separated;
  for (int i = 0; i < 10; ++i) {
    separated.push_back(rec("t" + std::to_string(i), 0.9, 0.9, TrialKind::kTarget));
    separated.push_back(
        rec("n" + std::to_string(i), 0.1, 0.2, TrialKind::kNontarget));
    separated.push_back(rec("s" + std::to_string(i), 0.9, 0.3, TrialKind::kSpoof));
  }
  CHECK(sasv_eer(separated).eer == doctest::Approx(0.0));

  // Matches the brute-force oracle on the mixed set.
  std::vector<std::pair<double, bool>> pairs;
  for (const auto& r : records) pairs.push_back({r.sasv_score, r.label});
  CHECK(sasv_eer(records).eer ==
        doctest::Approx(brute_force_eer(pairs)).epsilon(1e-9));
}

TEST_CASE("genre_matrix cells reproduce compute_eer on their subsets") {
  Rng rng(56);
  std::vector<ScoreRecord> records;
  std::vector<std::string> genres{"dr", "vl", "en"};
  int id = 0;
  for (const auto& eg : genres) {
    for (const auto& tg : genres) {
      if (eg == "en" && tg == "dr") continue;  // leave one cell empty
      for (int i = 0; i < 20; ++i) {
        records.push_back(rec("t" + std::to_string(id++),
                              0.6 + 0.3 * rng.gaussian(), 0.5,
                              TrialKind::kTarget, eg, tg));
        records.push_back(rec("n" + std::to_string(id++),
                              0.3 * rng.gaussian(), 0.5, TrialKind::kNontarget,
                              eg, tg));
      }
    }
  }
  GenreMatrix m = genre_matrix(records, EerMetric::kSv);
  CHECK(m.enroll_genres.size() == 3);
  CHECK_FALSE(m.cells.at({"en", "dr"}).has_value());

  for (const auto& eg : genres) {
    for (const auto& tg : genres) {
      if (eg == "en" && tg == "dr") continue;
      std::vector<std::pair<double, bool>> cell;
      for (const auto& r : records) {
        if (r.enroll_genre == eg && r.test_genre == tg &&
            r.trial_kind != TrialKind::kSpoof) {
          cell.push_back({r.asv_score, r.trial_kind == TrialKind::kTarget});
        }
      }
      CHECK(m.cells.at({eg, tg})->eer ==
            doctest::Approx(compute_eer(cell).eer).epsilon(1e-12));
    }
  }

  // A single-genre record set gives a 1x1 matrix equal to the overall EER.
  std::vector<ScoreRecord> single;
  for (int i = 0; i < 30; ++i) {
    single.push_back(rec("t" + std::to_string(i), 0.5 + 0.2 * rng.gaussian(),
                         0.5, TrialKind::kTarget, "dr", "dr"));
    single.push_back(rec("n" + std::to_string(i), 0.2 * rng.gaussian(), 0.5,
                         TrialKind::kNontarget, "dr", "dr"));
  }
  GenreMatrix sm = genre_matrix(single, EerMetric::kSv);
  CHECK(sm.enroll_genres.size() == 1);
  CHECK(sm.cells.at({"dr", "dr"})->eer ==
        doctest::Approx(sv_eer(single).eer).epsilon(1e-12));
}

TEST_CASE("diff_report is zero on itself, antisymmetric, and checks coverage") {
  Rng rng(57);
  std::vector<ScoreRecord> sys, base;
  int id = 0;
  for (const auto& eg : {"dr", "vl"}) {
    for (const auto& tg : {"dr", "vl"}) {
      for (int i = 0; i < 15; ++i) {
        sys.push_back(rec("t" + std::to_string(id), 0.7 + 0.2 * rng.gaussian(),
                          0.5, TrialKind::kTarget, eg, tg));
        sys.push_back(rec("n" + std::to_string(id),
                          0.2 * rng.gaussian(), 0.5, TrialKind::kNontarget, eg,
                          tg));
        base.push_back(rec("bt" + std::to_string(id),
                           0.4 + 0.3 * rng.gaussian(), 0.5, TrialKind::kTarget,
                           eg, tg));
        base.push_back(rec("bn" + std::to_string(id),
                           0.3 * rng.gaussian(), 0.5, TrialKind::kNontarget, eg,
                           tg));
        ++id;
      }
    }
  }
  DiffMatrix self = diff_report(sys, sys, EerMetric::kSv);
  for (const auto& [key, v] : self.cells) {
    CHECK(*v == doctest::Approx(0.0));
  }
  DiffMatrix d1 = diff_report(sys, base, EerMetric::kSv);
  DiffMatrix d2 = diff_report(base, sys, EerMetric::kSv);
  for (const auto& [key, v] : d1.cells) {
    CHECK(*v == doctest::Approx(-*d2.cells.at(key)).epsilon(1e-12));
  }
  // Hand-computed cells.
  GenreMatrix ms = genre_matrix(sys, EerMetric::kSv);
  GenreMatrix mb = genre_matrix(base, EerMetric::kSv);
  for (const auto& [key, v] : d1.cells) {
    CHECK(*v == doctest::Approx(mb.cells.at(key)->eer - ms.cells.at(key)->eer));
  }

  // Coverage mismatch raises and names the missing cell.
  auto partial = base;
  partial.erase(std::remove_if(partial.begin(), partial.end(),
                               [](const ScoreRecord& r) {
                                 return r.enroll_genre == "vl" &&
                                        r.test_genre == "dr";
                               }),
                partial.end());
  CHECK_THROWS_WITH_AS(diff_report(sys, partial, EerMetric::kSv),
                       doctest::Contains("(vl,dr)"), std::invalid_argument);
}

TEST_CASE("score files round-trip exactly") {
  Rng rng(58);
  std::vector<ScoreRecord> records;
  for (int i = 0; i < 50; ++i) {
    records.push_back(rec("t" + std::to_string(i), rng.gaussian(),
                          rng.uniform(), i % 3 == 0 ? TrialKind::kTarget
                          : i % 3 == 1              ? TrialKind::kNontarget
                                                    : TrialKind::kSpoof));
  }
  fs::path path = fs::temp_directory_path() / "sasv_scores_rt.tsv";
  write_scores(path.string(), records);
  auto loaded = read_scores(path.string());
  REQUIRE(loaded.size() == records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded[i].trial_id == records[i].trial_id);
    CHECK(loaded[i].asv_score == records[i].asv_score);
    CHECK(loaded[i].sasv_score == records[i].sasv_score);
    CHECK(loaded[i].label == records[i].label);
    CHECK(loaded[i].trial_kind == records[i].trial_kind);
  }
  fs::remove(path);
}

TEST_CASE("overall report marks SASV-EER absent without spoof trials") {
  Rng rng(59);
  std::vector<ScoreRecord> clean;
  for (int i = 0; i < 20; ++i) {
    clean.push_back(rec("t" + std::to_string(i), 0.6 + 0.1 * rng.gaussian(),
                        0.8, TrialKind::kTarget));
    clean.push_back(rec("n" + std::to_string(i), 0.1 * rng.gaussian(), 0.2,
                        TrialKind::kNontarget));
  }
  std::string report = render_overall(clean);
  CHECK(report.find("SASV-EER: -") != std::string::npos);

  clean.push_back(rec("s0", 0.5, 0.5, TrialKind::kSpoof));
  report = render_overall(clean);
  CHECK(report.find("SASV-EER: -") == std::string::npos);
  CHECK(report.find("SASV-EER:") != std::string::npos);
}

TEST_CASE("det_curve endpoints cover the full trade-off") {
  Rng rng(60);
  auto scores = random_scores(rng, 20, 20, 1.0);
  auto points = det_curve(scores);
  CHECK(points.front().far == 1.0);
  CHECK(points.front().frr == 0.0);
  CHECK(points.back().far == 0.0);
  CHECK(points.back().frr == 1.0);
  for (size_t i = 1; i < points.size(); ++i) {
    CHECK(points[i].far <= points[i - 1].far);
    CHECK(points[i].frr >= points[i - 1].frr);
  }
}

}  // TEST_SUITE
