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

#ifndef SASV_TRAINER_H_
#define SASV_TRAINER_H_

#include <functional>
#include <string>
#include <vector>

#include "sasv/model.h"
#include "sasv/protocol.h"

namespace sasv {

struct TrainConfig {
  int epochs = 80;
  int batch_size = 64;
  int inner_steps = 1;
  double inner_lr = 0.01;
  double w_asv = 1.0;
  double w_spoof = 1.0;
  double w_sasv = 1.0;
  int warmup_steps = 5000;
  double peak_lr = 0.001;
  double decay_rate = 0.9999;
  double beta1 = 0.9;
  double beta2 = 0.98;
  uint64_t seed = 1;
  int g_mtr = -1;    // -1 -> G - 2
  bool meta = true;  // false -> supervised baseline (same path as k = 0)
  TrialMix mix;
  int steps_per_epoch = -1;  // -1 -> #train utterances / batch_size

  void validate() const;
};

// Linear warm-up from 0 to peak_lr over warmup_steps, then per-step
// exponential decay. Continuous at the boundary.
double lr_schedule(int step, const TrainConfig& cfg);

// Adam with bias correction; moments are laid out per parameter tensor.
class AdamState {
 public:
  AdamState(const ParamStore& params, double beta1, double beta2,
            double eps = 1e-8);
  void step(ParamStore& params, const std::vector<Mat>& grads, double lr);
  int steps_taken() const { return t_; }

 private:
  std::vector<Mat> m_, v_;
  double beta1_, beta2_, eps_;
  int t_ = 0;
};

struct LossBreakdown {
  double total = 0.0;
  double asv = 0.0;
  double spoof = 0.0;
  double sasv = 0.0;
};

// Differentiable objective evaluated at arbitrary parameters. When grads is
// non-null it receives d(total)/d(params) in store order. The bilevel
// machinery below is generic over this interface, which is what lets the
// analytic probe in the tests drive it directly.
using BatchLoss =
    std::function<LossBreakdown(const ParamStore&, std::vector<Mat>*)>;

struct LossVars {
  Var total;
  Var asv, spoof, sasv;  // invalid when the corresponding weight is 0
};

// Weighted multi-task loss over a forward batch: speaker CE + spoof BCE +
// SASV BCE against the trial labels. Throws naming the offending component
// if any value is non-finite.
LossVars total_loss(Tape& t, const ModelForward& fwd,
                    const std::vector<TrialFeatures>& batch,
                    const TrainConfig& cfg);

// Converts sampled trials into a forward batch against the manifest.
std::vector<TrialFeatures> trials_to_batch(
    const std::vector<TrialPair>& trials, const ManifestIndex& index,
    const std::vector<std::string>& speakers);

// Objective over a fixed trial batch; the path mask mirrors the nonzero
// loss weights.
BatchLoss make_batch_loss(std::vector<TrialFeatures> batch,
                          const ModelConfig& model_cfg, const TrainConfig& cfg);

// k plain gradient-descent steps on loss starting from theta; k = 0 returns
// theta unchanged and evaluates nothing.
ParamStore inner_adapt(const ParamStore& theta, const BatchLoss& loss, int k,
                       double inner_lr);

struct OuterEval {
  std::vector<Mat> grad;     // d[test_loss(theta*) + train_loss(theta)]/dtheta
  LossBreakdown test_loss;   // evaluated at theta*
  LossBreakdown train_loss;  // evaluated at theta
};

// First-order meta-gradient: the meta-test term is differentiated at the
// adapted parameters theta* (gradient through the adaptation is dropped),
// the meta-train term at theta.
OuterEval outer_gradient(const ParamStore& theta, const ParamStore& theta_star,
                         const BatchLoss& train_loss, const BatchLoss& test_loss);

// One Adam step on the outer gradient. Returns the evaluated losses.
OuterEval outer_update(ParamStore& theta, const ParamStore& theta_star,
                       const BatchLoss& train_loss, const BatchLoss& test_loss,
                       AdamState& opt, double lr);

struct StepRecord {
  int step = 0;
  double inner_loss = 0.0;  // meta-train loss at theta
  double outer_loss = 0.0;  // meta-test loss at theta*
  double lr = 0.0;
  double asv_loss = 0.0;
  double spoof_loss = 0.0;
  double sasv_loss = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepRecord> log;
};

// Full training loop: per step sample_meta_task -> inner_adapt ->
// outer_update. With cfg.meta == false (or inner_steps == 0) the trajectory
// is the plain supervised multi-task one, bit for bit.
TrainResult train(const Manifest& train_manifest, ModelConfig model_cfg,
                  const TrainConfig& cfg,
                  const std::function<void(const StepRecord&)>& on_step = {});

void write_telemetry(const std::string& path, const std::vector<StepRecord>& log);

}  // namespace sasv

#endif  // SASV_TRAINER_H_
