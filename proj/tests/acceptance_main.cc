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

// Acceptance suite: one criterion per function, one PASS/FAIL line each.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "sasv/cli.h"
#include "sasv/eval.h"
#include "sasv/metrics.h"
#include "sasv/rng.h"
#include "sasv/trainer.h"
#include "test_util.h"

namespace sasv::acceptance {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Criterion {
  std::string name;
  std::function<void(std::string&)> run;  // throws or appends detail on pass
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void check(bool ok, const std::string& what) {
  if (!ok) throw std::runtime_error(what);
}

// ---------------------------------------------------------------------------
// C1: compute_eer vs an independent brute-force sweep; monotone invariance.
void metric_oracle(std::string& detail) {
  auto start = Clock::now();
  Rng rng(101);
  double worst = 0.0;
  for (int set = 0; set < 200; ++set) {
    // Sizes log-uniform in [10, 10^4].
    double exponent = 1.0 + 3.0 * rng.uniform();
    int n = static_cast<int>(std::pow(10.0, exponent));
    int n_pos = std::max(1, static_cast<int>(n * (0.2 + 0.6 * rng.uniform())));
    int n_neg = std::max(1, n - n_pos);
    double sep = 2.5 * rng.uniform();
    std::vector<std::pair<double, bool>> scores;
    scores.reserve(n_pos + n_neg);
    for (int i = 0; i < n_pos; ++i) scores.push_back({sep + rng.gaussian(), true});
    for (int i = 0; i < n_neg; ++i) scores.push_back({rng.gaussian(), false});
    double fast = compute_eer(scores).eer;
    double oracle = testutil::brute_force_eer(scores);
    worst = std::max(worst, std::abs(fast - oracle));
    check(std::abs(fast - oracle) < 1e-9,
          "implementation deviates from the brute-force sweep by " +
              std::to_string(std::abs(fast - oracle)));
  }

  // 20 random strictly increasing maps leave the EER unchanged.
  std::vector<std::pair<double, bool>> scores;
  for (int i = 0; i < 400; ++i) scores.push_back({0.8 + rng.gaussian(), true});
  for (int i = 0; i < 600; ++i) scores.push_back({rng.gaussian(), false});
  double base = compute_eer(scores).eer;
  for (int m = 0; m < 20; ++m) {
    double a = 0.1 + 3.0 * rng.uniform();
    double b = rng.gaussian();
    double c = 0.05 + 0.5 * rng.uniform();
    auto mapped = scores;
    for (auto& [s, l] : mapped) {
      s = a * s + b + c * std::tanh(s) + 0.01 * s * s * s;
    }
    check(std::abs(compute_eer(mapped).eer - base) < 1e-12,
          "EER changed under a strictly increasing transform");
  }

  double elapsed = seconds_since(start);
  check(elapsed < 30.0, "runtime " + std::to_string(elapsed) + "s >= 30s");
  char buf[128];
  std::snprintf(buf, sizeof(buf), "max |impl - oracle| %.2e, %.1fs", worst,
                elapsed);
  detail = buf;
}

// ---------------------------------------------------------------------------
// C2: label_trial truth table and label consistency of a 10^4-trial list.
void labeling_rule(std::string& detail) {
  check(label_trial(true, true) == true, "(genuine, match) must be true");
  check(label_trial(true, false) == false, "(genuine, mismatch) must be false");
  check(label_trial(false, true) == false, "(spoof, match) must be false");
  check(label_trial(false, false) == false, "(spoof, mismatch) must be false");

  CorpusSpec spec;
  spec.num_speakers = 12;
  spec.utterances_per_speaker_genre = 6;
  spec.frames = 4;
  spec.feature_dim = 6;
  spec.seed = 2024;
  Manifest m = synth_corpus_with_spoofs(spec);
  ManifestIndex index(m);
  EvalListConfig cfg;
  cfg.num_trials = 10000;
  auto trials = build_complex_eval(index, cfg, 0.3, 9);
  check(trials.size() == 10000, "expected 10^4 trials");
  int consistent = 0;
  for (const auto& t : trials) {
    const Utterance& test = index.require(t.test_utt);
    const Utterance& enroll = index.require(t.enroll_utts.front());
    bool expected = label_trial(!test.is_spoof, test.speaker == enroll.speaker);
    consistent += expected == t.label;
  }
  check(consistent == 10000,
        std::to_string(10000 - consistent) + " inconsistent labels");
  detail = "4/4 truth table, 10000/10000 labels consistent";
}

// ---------------------------------------------------------------------------
// C3: CGP table exactness and meta-task genre disjointness over 10^3 draws.
void protocol_exactness(std::string& detail) {
  GenreGrouping g = GenreGrouping::default_grouping();
  struct Expect {
    const char* name;
    std::set<int> seen;
    int unseen;
  } table[] = {
      {"CGP I", {1, 2, 3}, 4},
      {"CGP II", {1, 2, 4}, 3},
      {"CGP III", {1, 3, 4}, 2},
      {"CGP IV", {2, 3, 4}, 1},
  };
  for (const auto& e : table) {
    CgpProtocol cgp = build_cgp(g, e.name);
    check(cgp.seen_groups == e.seen,
          std::string(e.name) + ": wrong seen groups");
    check(cgp.unseen_groups == std::set<int>{e.unseen},
          std::string(e.name) + ": wrong unseen group");
  }

  CorpusSpec spec;
  spec.num_speakers = 10;
  spec.utterances_per_speaker_genre = 4;
  spec.frames = 4;
  spec.feature_dim = 6;
  spec.seed = 31;
  Manifest m = synth_corpus_with_spoofs(spec);
  ManifestIndex index(m);
  for (uint64_t seed = 0; seed < 1000; ++seed) {
    MetaTask task = sample_meta_task(index, 48, -1, seed);
    for (const auto& genre : task.test_genres) {
      check(task.train_genres.count(genre) == 0,
            "meta-task genres overlap at seed " + std::to_string(seed));
    }
  }
  detail = "4/4 CGP rows, 1000/1000 disjoint meta-tasks";
}

// ---------------------------------------------------------------------------
// C4: end-to-end gradients vs central finite differences.
void gradient_correctness(std::string& detail) {
  auto start = Clock::now();
  ModelConfig cfg;
  cfg.num_blocks = 2;
  cfg.model_dim = 32;
  cfg.attention_heads = 4;
  cfg.embedding_dim = 32;
  cfg.feature_dim = 12;
  cfg.num_speakers = 4;

  CorpusSpec cspec;
  cspec.num_speakers = 4;
  cspec.genres = {"dr", "vl", "sp"};
  cspec.utterances_per_speaker_genre = 2;
  cspec.frames = 10;
  cspec.feature_dim = cfg.feature_dim;
  cspec.seed = 77;
  Manifest m = synth_corpus_with_spoofs(cspec);
  ManifestIndex index(m);
  std::vector<const Utterance*> pool;
  for (const auto& u : m) pool.push_back(&u);
  // 4 trials covering target, nontarget and spoof kinds.
  auto trials = sample_pairwise_trials(pool, 5, TrialMix{0.5, 0.25, 0.25}, 4);
  auto batch = trials_to_batch(trials, index, index.speakers());

  ParamStore params = init_params(cfg, 55);
  TrainConfig tc;
  BatchLoss loss = make_batch_loss(batch, cfg, tc);
  std::vector<Mat> analytic;
  loss(params, &analytic);
  auto eval = [&](const ParamStore& p) { return loss(p, nullptr).total; };

  Rng rng(56);
  double worst =
      testutil::max_param_grad_rel_err(eval, params, analytic, 6, rng, 1e-5);
  double elapsed = seconds_since(start);
  check(worst < 1e-3, "worst relative error " + std::to_string(worst));
  check(elapsed < 120.0, "runtime " + std::to_string(elapsed) + "s >= 2min");
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "%zu tensors, worst rel. err %.2e, %.1fs",
                params.size(), worst, elapsed);
  detail = buf;
}

// ---------------------------------------------------------------------------
// C5: bilevel asymmetry probe and k=0 bit-identity.
void bilevel_asymmetry(std::string& detail) {
  // Two-parameter probe: inner bowl moves theta, outer bowl's gradient
  // rotates between theta and theta*.
  ParamStore theta;
  {
    Mat t0(1, 2);
    t0 << 1.0, 0.0;
    theta.add("theta", t0);
  }
  auto bowl = [](double cx, double cy, double kx, double ky) -> BatchLoss {
    return [=](const ParamStore& p, std::vector<Mat>* grads) {
      const Mat& th = p.at("theta");
      double dx = th(0, 0) - cx, dy = th(0, 1) - cy;
      LossBreakdown lb;
      lb.total = 0.5 * (kx * dx * dx + ky * dy * dy);
      if (grads) {
        Mat g(1, 2);
        g << kx * dx, ky * dy;
        *grads = {g};
      }
      return lb;
    };
  };
  BatchLoss inner = bowl(0.0, 1.0, 1.0, 1.0);
  BatchLoss outer = bowl(0.0, 0.5, 1.0, 4.0);
  ParamStore theta_star = inner_adapt(theta, inner, 1, 0.5);
  OuterEval ev = outer_gradient(theta, theta_star, inner, outer);

  std::vector<Mat> g_out_theta, g_in_theta;
  outer(theta, &g_out_theta);
  inner(theta, &g_in_theta);
  Mat wrong = g_out_theta[0] + g_in_theta[0];
  const Mat& right = ev.grad[0];
  double cosv = (right.array() * wrong.array()).sum() /
                (std::sqrt(right.squaredNorm()) * std::sqrt(wrong.squaredNorm()));
  double angle = std::acos(std::min(1.0, std::max(-1.0, cosv))) * 180.0 / M_PI;
  check(angle > 10.0,
        "gradient angle " + std::to_string(angle) + " deg <= 10 deg");

  // k = 0 trajectory equals the supervised baseline bit for bit.
  CorpusSpec spec;
  spec.num_speakers = 5;
  spec.genres = {"dr", "vl", "sp", "en"};
  spec.utterances_per_speaker_genre = 4;
  spec.frames = 5;
  spec.feature_dim = 6;
  spec.seed = 61;
  Manifest m = synth_corpus_with_spoofs(spec);
  ModelConfig mc;
  mc.num_blocks = 1;
  mc.model_dim = 8;
  mc.attention_heads = 2;
  mc.embedding_dim = 6;
  mc.se_bottleneck = 4;
  mc.backend_hidden = 8;
  TrainConfig a;
  a.epochs = 1;
  a.steps_per_epoch = 6;
  a.batch_size = 18;
  a.warmup_steps = 2;
  a.peak_lr = 0.01;
  a.decay_rate = 0.999;
  a.seed = 17;
  a.inner_steps = 0;
  a.meta = true;
  TrainConfig b = a;
  b.inner_steps = 3;
  b.meta = false;  // supervised baseline ignores inner_steps
  TrainResult ra = train(m, mc, a);
  TrainResult rb = train(m, mc, b);
  for (size_t i = 0; i < ra.checkpoint.params.size(); ++i) {
    check(ra.checkpoint.params.at(static_cast<int>(i)) ==
              rb.checkpoint.params.at(static_cast<int>(i)),
          "k=0 and supervised checkpoints differ at tensor " +
              ra.checkpoint.params.name_of(static_cast<int>(i)));
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "probe angle %.1f deg, k=0 bit-identical",
                angle);
  detail = buf;
}

// ---------------------------------------------------------------------------
// C6: spoofing scenario. Full model vs speaker-only ablation on the complex
// evaluation list.
void spoofing_directional(std::string& detail) {
  auto start = Clock::now();
  CorpusSpec spec;
  spec.num_speakers = 50;
  spec.utterances_per_speaker_genre = 10;  // ~5000 bona fide utterances
  spec.frames = 12;
  spec.feature_dim = 20;
  spec.speaker_scale = 1.0;
  spec.genre_scale = 1.3;
  spec.noise_scale = 0.8;
  spec.spoof_scale = 0.6;
  spec.seed = 71;
  Manifest corpus = synth_corpus_with_spoofs(spec);

  auto [train_all, eval] = split_train_eval(corpus, 0.4);
  GenreGrouping grouping = GenreGrouping::default_grouping();
  CgpProtocol cgp = build_cgp(grouping, "CGP I");
  Manifest train_manifest = filter_training(train_all, grouping, cgp);

  ManifestIndex eval_index(eval);
  EvalListConfig ecfg;
  ecfg.num_trials = 4000;
  ecfg.enroll_size = 3;
  ecfg.target_fraction = 0.75;
  auto trials = build_complex_eval(eval_index, ecfg, 0.3, 5);

  ModelConfig mc;
  mc.num_blocks = 2;
  mc.model_dim = 24;
  mc.attention_heads = 4;
  mc.embedding_dim = 24;
  mc.se_bottleneck = 8;
  mc.backend_hidden = 16;

  TrainConfig full_cfg;
  full_cfg.epochs = 18;
  full_cfg.batch_size = 64;
  full_cfg.warmup_steps = 100;
  full_cfg.peak_lr = 0.01;
  full_cfg.decay_rate = 0.9995;
  full_cfg.seed = 19;

  auto t_train = Clock::now();
  TrainResult full = train(train_manifest, mc, full_cfg);
  double train_time = seconds_since(t_train);
  check(train_time < 600.0,
        "full-model training took " + std::to_string(train_time) + "s");

  TrainConfig abl_cfg = full_cfg;
  abl_cfg.w_spoof = 0.0;
  abl_cfg.w_sasv = 0.0;
  abl_cfg.meta = false;
  TrainResult ablation = train(train_manifest, mc, abl_cfg);

  auto full_scores =
      score_trials(eval_index, trials, full.checkpoint, ScoringMode::kFull);
  auto abl_scores = score_trials(eval_index, trials, ablation.checkpoint,
                                 ScoringMode::kCosineOnly);
  double full_eer = sasv_eer(full_scores).eer;
  double abl_eer = sasv_eer(abl_scores).eer;
  double elapsed = seconds_since(start);

  check(full_eer <= 0.15, "full model SASV-EER " +
                              std::to_string(full_eer * 100) + "% > 15%");
  check(abl_eer >= 0.30, "ablation SASV-EER " +
                             std::to_string(abl_eer * 100) + "% < 30%");
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "full %.2f%% <= 15%%, ablation %.2f%% >= 30%% (%.0fs total)",
                full_eer * 100, abl_eer * 100, elapsed);
  detail = buf;
}

// ---------------------------------------------------------------------------
// C7: domain mismatch. Meta-trained vs supervised baseline, 3 seeds.
void domain_directional(std::string& detail) {
  CorpusSpec spec;
  spec.num_speakers = 24;
  spec.utterances_per_speaker_genre = 6;
  spec.frames = 10;
  spec.feature_dim = 16;
  spec.speaker_scale = 1.0;
  spec.genre_scale = 1.1;
  spec.noise_scale = 0.5;
  spec.spoof_scale = 0.6;
  spec.seed = 83;
  Manifest corpus = synth_corpus_with_spoofs(spec);

  auto [train_all, eval] = split_train_eval(corpus, 0.4);
  GenreGrouping grouping = GenreGrouping::default_grouping();
  CgpProtocol cgp = build_cgp(grouping, "CGP I");
  Manifest train_manifest = filter_training(train_all, grouping, cgp);
  std::set<std::string> unseen_genres;
  for (const auto& g : grouping.genres_of_groups(cgp.unseen_groups)) {
    unseen_genres.insert(g);
  }

  ManifestIndex eval_index(eval);
  EvalListConfig ecfg;
  ecfg.num_trials = 3000;
  ecfg.enroll_size = 3;
  auto trials = build_complex_eval(eval_index, ecfg, 0.0, 7);

  ModelConfig mc;
  mc.num_blocks = 2;
  mc.model_dim = 24;
  mc.attention_heads = 4;
  mc.embedding_dim = 24;
  mc.se_bottleneck = 8;
  mc.backend_hidden = 16;

  double meta_overall = 0.0, base_overall = 0.0;
  double meta_unseen = 0.0, base_unseen = 0.0;
  auto unseen_eer = [&](const std::vector<ScoreRecord>& records) {
    std::vector<ScoreRecord> subset;
    for (const auto& r : records) {
      if (unseen_genres.count(r.test_genre)) subset.push_back(r);
    }
    return sv_eer(subset).eer;
  };

  for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    TrainConfig meta_cfg;
    meta_cfg.epochs = 10;
    meta_cfg.batch_size = 64;
    meta_cfg.warmup_steps = 50;
    meta_cfg.peak_lr = 0.008;
    meta_cfg.decay_rate = 0.9995;
    meta_cfg.inner_steps = 1;
    meta_cfg.inner_lr = 0.1;
    meta_cfg.seed = seed;

    TrainConfig base_cfg = meta_cfg;
    base_cfg.meta = false;

    TrainResult meta = train(train_manifest, mc, meta_cfg);
    TrainResult base = train(train_manifest, mc, base_cfg);
    auto meta_scores =
        score_trials(eval_index, trials, meta.checkpoint, ScoringMode::kFull);
    auto base_scores =
        score_trials(eval_index, trials, base.checkpoint, ScoringMode::kFull);
    meta_overall += sv_eer(meta_scores).eer;
    base_overall += sv_eer(base_scores).eer;
    meta_unseen += unseen_eer(meta_scores);
    base_unseen += unseen_eer(base_scores);
  }
  meta_overall /= 3.0;
  base_overall /= 3.0;
  meta_unseen /= 3.0;
  base_unseen /= 3.0;

  check(meta_overall < base_overall,
        "meta overall EER " + std::to_string(meta_overall * 100) +
            "% not below baseline " + std::to_string(base_overall * 100) + "%");
  check(meta_unseen < base_unseen,
        "meta unseen-group EER " + std::to_string(meta_unseen * 100) +
            "% not below baseline " + std::to_string(base_unseen * 100) + "%");
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "overall %.2f%% < %.2f%%, unseen %.2f%% < %.2f%% (3 seeds)",
                meta_overall * 100, base_overall * 100, meta_unseen * 100,
                base_unseen * 100);
  detail = buf;
}

// ---------------------------------------------------------------------------
// C8: byte-identical end-to-end determinism via the CLI pipeline.
void determinism(std::string& detail) {
  fs::path root = fs::temp_directory_path() / "sasv_acceptance_det";
  fs::remove_all(root);
  fs::create_directory(root);
  auto path = [&](const std::string& name) { return (root / name).string(); };

  auto run_pipeline = [&](const std::string& tag) -> std::string {
    GenerateOptions gen;
    gen.out_dir = path("corpus_" + tag);
    gen.spec.num_speakers = 6;
    gen.spec.utterances_per_speaker_genre = 4;
    gen.spec.frames = 5;
    gen.spec.feature_dim = 8;
    gen.spec.seed = 99;
    check(cmd_generate(gen) == kExitOk, "generate failed");

    ProtocolOptions proto;
    proto.corpus_manifest = gen.out_dir + "/manifest.tsv";
    proto.out_dir = path("proto_" + tag);
    proto.cgp = 2;
    proto.eval_fraction = 0.5;
    proto.eval_list.num_trials = 400;
    proto.eval_list.enroll_size = 2;
    proto.substitution_rate = 0.3;
    proto.seed = 11;
    check(cmd_protocol(proto) == kExitOk, "protocol failed");

    TrainOptions tr;
    tr.train_manifest = proto.out_dir + "/train.tsv";
    tr.checkpoint_out = path("model_" + tag + ".bin");
    tr.quiet = true;
    tr.model.num_blocks = 1;
    tr.model.model_dim = 8;
    tr.model.attention_heads = 2;
    tr.model.embedding_dim = 6;
    tr.model.se_bottleneck = 4;
    tr.model.backend_hidden = 8;
    tr.train.epochs = 1;
    tr.train.steps_per_epoch = 8;
    tr.train.batch_size = 18;
    tr.train.warmup_steps = 3;
    tr.train.peak_lr = 0.01;
    tr.train.decay_rate = 0.999;
    tr.train.seed = 23;
    check(cmd_train(tr) == kExitOk, "train failed");

    EvaluateOptions ev;
    ev.manifest = proto.out_dir + "/eval.tsv";
    ev.trials = proto.out_dir + "/trials.tsv";
    ev.checkpoint = tr.checkpoint_out;
    ev.scores_out = path("scores_" + tag + ".tsv");
    check(cmd_evaluate(ev) == kExitOk, "evaluate failed");

    std::ifstream in(ev.scores_out, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  std::string first = run_pipeline("a");
  std::string second = run_pipeline("b");
  check(!first.empty(), "empty score file");
  check(first == second, "score files differ between identical runs");
  fs::remove_all(root);
  detail = "two pipeline runs, byte-identical score files";
}

}  // namespace
}  // namespace sasv::acceptance

int main() {
  using sasv::acceptance::Criterion;
  std::vector<Criterion> criteria = {
      {"C1 metric-oracle", sasv::acceptance::metric_oracle},
      {"C2 labeling-truth-table", sasv::acceptance::labeling_rule},
      {"C3 protocol-exactness", sasv::acceptance::protocol_exactness},
      {"C4 gradient-correctness", sasv::acceptance::gradient_correctness},
      {"C5 bilevel-asymmetry", sasv::acceptance::bilevel_asymmetry},
      {"C6 spoofing-directional", sasv::acceptance::spoofing_directional},
      {"C7 domain-directional", sasv::acceptance::domain_directional},
      {"C8 determinism", sasv::acceptance::determinism},
  };
  int failures = 0;
  for (auto& c : criteria) {
    std::string detail;
    try {
      c.run(detail);
      std::cout << "[PASS] " << c.name;
      if (!detail.empty()) std::cout << " — " << detail;
      std::cout << std::endl;
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "[FAIL] " << c.name << " — " << e.what() << std::endl;
    }
  }
  if (failures) {
    std::cout << failures << " criterion(s) failed" << std::endl;
  } else {
    std::cout << "all acceptance criteria passed" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
