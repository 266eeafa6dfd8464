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

#include "sasv/trainer.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "sasv/rng.h"

namespace sasv {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("TrainConfig: ") + what);
}

double finite_or_throw(double x, const char* component, int step = -1) {
  if (!std::isfinite(x)) {
    std::string msg = std::string("non-finite ") + component + " loss";
    if (step >= 0) msg += " at step " + std::to_string(step);
    throw std::runtime_error(msg);
  }
  return x;
}

}  // namespace

void TrainConfig::validate() const {
  require(epochs >= 1, "epochs must be >= 1");
  require(batch_size >= 2, "batch_size must be >= 2");
  require(inner_steps >= 0, "inner_steps must be >= 0");
  require(inner_lr > 0.0, "inner_lr must be > 0");
  require(w_asv >= 0.0 && w_spoof >= 0.0 && w_sasv >= 0.0,
          "loss weights must be >= 0");
  require(w_asv + w_spoof + w_sasv > 0.0, "loss weights must not all be zero");
  require(warmup_steps >= 0, "warmup_steps must be >= 0");
  require(peak_lr > 0.0, "peak_lr must be > 0");
  require(decay_rate > 0.0 && decay_rate < 1.0, "decay_rate must be in (0,1)");
  require(beta1 >= 0.0 && beta1 < 1.0, "beta1 must be in [0,1)");
  require(beta2 >= 0.0 && beta2 < 1.0, "beta2 must be in [0,1)");
}

double lr_schedule(int step, const TrainConfig& cfg) {
  if (step < 0) throw std::invalid_argument("lr_schedule: step must be >= 0");
  if (cfg.warmup_steps > 0 && step < cfg.warmup_steps) {
    return cfg.peak_lr * static_cast<double>(step) /
           static_cast<double>(cfg.warmup_steps);
  }
  return cfg.peak_lr * std::pow(cfg.decay_rate, step - cfg.warmup_steps);
}

AdamState::AdamState(const ParamStore& params, double beta1, double beta2,
                     double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& [name, value] : params.tensors()) {
    m_.push_back(Mat::Zero(value.rows(), value.cols()));
    v_.push_back(Mat::Zero(value.rows(), value.cols()));
  }
}

void AdamState::step(ParamStore& params, const std::vector<Mat>& grads,
                     double lr) {
  if (grads.size() != m_.size()) {
    throw std::invalid_argument("AdamState::step: gradient layout mismatch");
  }
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, t_);
  double bc2 = 1.0 - std::pow(beta2_, t_);
  for (size_t i = 0; i < grads.size(); ++i) {
    const Mat& g = grads[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = (beta2_ * v_[i].array() + (1.0 - beta2_) * g.array().square())
                .matrix();
    Mat mhat = m_[i] / bc1;
    Mat vhat = v_[i] / bc2;
    params.at(static_cast<int>(i)) -=
        (lr * mhat.array() / (vhat.array().sqrt() + eps_)).matrix();
  }
}

LossVars total_loss(Tape& t, const ModelForward& fwd,
                    const std::vector<TrialFeatures>& batch,
                    const TrainConfig& cfg) {
  LossVars out;
  std::vector<Var> weighted;
  if (cfg.w_asv > 0.0) {
    std::vector<Var> probs;
    std::vector<int> labels;
    probs.reserve(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
      probs.push_back(t.softmax_rows(fwd.asv_logit_rows[i]));
      labels.push_back(batch[i].speaker_label);
    }
    out.asv = asv_loss(t, probs, labels);
    finite_or_throw(t.val(out.asv)(0, 0), "asv");
    weighted.push_back(t.scale(out.asv, cfg.w_asv));
  }
  if (cfg.w_spoof > 0.0) {
    std::vector<int> y_bona;
    y_bona.reserve(batch.size());
    for (const auto& tr : batch) y_bona.push_back(tr.test_bona ? 1 : 0);
    out.spoof = spoof_loss(t, fwd.spoof_probs, y_bona);
    finite_or_throw(t.val(out.spoof)(0, 0), "spoof");
    weighted.push_back(t.scale(out.spoof, cfg.w_spoof));
  }
  if (cfg.w_sasv > 0.0) {
    std::vector<int> labels;
    labels.reserve(batch.size());
    for (const auto& tr : batch) labels.push_back(tr.label ? 1 : 0);
    out.sasv = bce_loss(t, fwd.sasv_scores, labels, 1e-7);
    finite_or_throw(t.val(out.sasv)(0, 0), "sasv");
    weighted.push_back(t.scale(out.sasv, cfg.w_sasv));
  }
  out.total = t.add_n(weighted);
  finite_or_throw(t.val(out.total)(0, 0), "total");
  return out;
}

std::vector<TrialFeatures> trials_to_batch(
    const std::vector<TrialPair>& trials, const ManifestIndex& index,
    const std::vector<std::string>& speakers) {
  std::vector<TrialFeatures> batch;
  batch.reserve(trials.size());
  for (const auto& trial : trials) {
    TrialFeatures tf;
    for (const auto& id : trial.enroll_utts) {
      tf.enroll.push_back(&index.require(id));
    }
    tf.test = &index.require(trial.test_utt);
    tf.test_bona = !tf.test->is_spoof;
    tf.label = trial.label;
    auto it = std::find(speakers.begin(), speakers.end(), tf.test->speaker);
    if (it == speakers.end()) {
      throw std::runtime_error("trials_to_batch: speaker " + tf.test->speaker +
                               " missing from the speaker table");
    }
    tf.speaker_label = static_cast<int>(it - speakers.begin());
    batch.push_back(std::move(tf));
  }
  return batch;
}

BatchLoss make_batch_loss(std::vector<TrialFeatures> batch,
                          const ModelConfig& model_cfg, const TrainConfig& cfg) {
  PathMask mask;
  mask.spoof = cfg.w_spoof > 0.0;
  mask.sasv = cfg.w_sasv > 0.0;
  return [batch = std::move(batch), model_cfg, cfg, mask](
             const ParamStore& params, std::vector<Mat>* grads) {
    Tape tape;
    BoundParams bp = bind_params(tape, params, grads != nullptr);
    ModelForward fwd = model_forward(tape, batch, bp, model_cfg, mask);
    LossVars loss = total_loss(tape, fwd, batch, cfg);
    LossBreakdown breakdown;
    breakdown.total = tape.val(loss.total)(0, 0);
    if (loss.asv.valid()) breakdown.asv = tape.val(loss.asv)(0, 0);
    if (loss.spoof.valid()) breakdown.spoof = tape.val(loss.spoof)(0, 0);
    if (loss.sasv.valid()) breakdown.sasv = tape.val(loss.sasv)(0, 0);
    if (grads) {
      tape.backward(loss.total);
      *grads = collect_grads(tape, bp);
    }
    return breakdown;
  };
}

ParamStore inner_adapt(const ParamStore& theta, const BatchLoss& loss, int k,
                       double inner_lr) {
  if (k < 0) throw std::invalid_argument("inner_adapt: k must be >= 0");
  ParamStore adapted = theta;
  for (int step = 0; step < k; ++step) {
    std::vector<Mat> grads;
    LossBreakdown lb = loss(adapted, &grads);
    finite_or_throw(lb.total, "inner");
    for (size_t i = 0; i < grads.size(); ++i) {
      if (!grads[i].allFinite()) {
        throw std::runtime_error("inner_adapt: non-finite gradient for " +
                                 adapted.name_of(static_cast<int>(i)));
      }
      adapted.at(static_cast<int>(i)) -= inner_lr * grads[i];
    }
  }
  return adapted;
}

OuterEval outer_gradient(const ParamStore& theta, const ParamStore& theta_star,
                         const BatchLoss& train_loss,
                         const BatchLoss& test_loss) {
  OuterEval ev;
  std::vector<Mat> g_test;
  ev.test_loss = test_loss(theta_star, &g_test);
  std::vector<Mat> g_train;
  ev.train_loss = train_loss(theta, &g_train);
  ev.grad = std::move(g_test);
  for (size_t i = 0; i < ev.grad.size(); ++i) {
    ev.grad[i] += g_train[i];
    if (!ev.grad[i].allFinite()) {
      throw std::runtime_error("outer_gradient: non-finite gradient for " +
                               theta.name_of(static_cast<int>(i)));
    }
  }
  return ev;
}

OuterEval outer_update(ParamStore& theta, const ParamStore& theta_star,
                       const BatchLoss& train_loss, const BatchLoss& test_loss,
                       AdamState& opt, double lr) {
  OuterEval ev = outer_gradient(theta, theta_star, train_loss, test_loss);
  opt.step(theta, ev.grad, lr);
  return ev;
}

TrainResult train(const Manifest& train_manifest, ModelConfig model_cfg,
                  const TrainConfig& cfg,
                  const std::function<void(const StepRecord&)>& on_step) {
  cfg.validate();
  if (train_manifest.empty()) {
    throw std::invalid_argument("train: empty training manifest");
  }
  ManifestIndex index(train_manifest);

  std::set<std::string> spk_set;
  for (const auto& u : train_manifest) spk_set.insert(u.speaker);
  std::vector<std::string> speakers(spk_set.begin(), spk_set.end());

  model_cfg.num_speakers = static_cast<int>(speakers.size());
  model_cfg.feature_dim = static_cast<int>(train_manifest.front().features.cols());
  model_cfg.validate();

  ParamStore params = init_params(model_cfg, derive_seed(cfg.seed, "init"));
  AdamState opt(params, cfg.beta1, cfg.beta2);

  int steps_per_epoch =
      cfg.steps_per_epoch > 0
          ? cfg.steps_per_epoch
          : std::max<int>(1, static_cast<int>(train_manifest.size()) /
                                 cfg.batch_size);
  int inner_k = cfg.meta ? cfg.inner_steps : 0;

  TrainResult result;
  int global_step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int s = 0; s < steps_per_epoch; ++s, ++global_step) {
      MetaTask task =
          sample_meta_task(index, cfg.batch_size, cfg.g_mtr,
                           derive_seed(cfg.seed, "meta-task", global_step),
                           cfg.mix);
      BatchLoss train_loss = make_batch_loss(
          trials_to_batch(task.meta_train, index, speakers), model_cfg, cfg);
      BatchLoss test_loss = make_batch_loss(
          trials_to_batch(task.meta_test, index, speakers), model_cfg, cfg);

      ParamStore theta_star = inner_adapt(params, train_loss, inner_k,
                                          cfg.inner_lr);
      double lr = lr_schedule(global_step, cfg);
      OuterEval ev;
      try {
        ev = outer_update(params, theta_star, train_loss, test_loss, opt, lr);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string(e.what()) + " at step " +
                                 std::to_string(global_step));
      }

      StepRecord rec;
      rec.step = global_step;
      rec.inner_loss = finite_or_throw(ev.train_loss.total, "inner", global_step);
      rec.outer_loss = finite_or_throw(ev.test_loss.total, "outer", global_step);
      rec.lr = lr;
      rec.asv_loss = ev.train_loss.asv + ev.test_loss.asv;
      rec.spoof_loss = ev.train_loss.spoof + ev.test_loss.spoof;
      rec.sasv_loss = ev.train_loss.sasv + ev.test_loss.sasv;
      result.log.push_back(rec);
      if (on_step) on_step(rec);
    }
  }

  result.checkpoint.config = model_cfg;
  result.checkpoint.params = std::move(params);
  result.checkpoint.speakers = std::move(speakers);
  return result;
}

void write_telemetry(const std::string& path,
                     const std::vector<StepRecord>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "step,inner_loss,outer_loss,lr,asv_loss,spoof_loss,sasv_loss\n";
  char line[256];
  for (const auto& r : log) {
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.step, r.inner_loss, r.outer_loss, r.lr, r.asv_loss,
                  r.spoof_loss, r.sasv_loss);
    out << line;
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace sasv
