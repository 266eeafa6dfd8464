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

#ifndef SASV_MODEL_H_
#define SASV_MODEL_H_

#include <string>
#include <vector>

#include "sasv/datagen.h"
#include "sasv/tensor.h"

namespace sasv {

struct ModelConfig {
  int num_blocks = 2;
  int model_dim = 32;
  int attention_heads = 4;
  int conv_kernel = 3;
  int num_speakers = 0;  // filled in from the training data
  int embedding_dim = 32;
  int feature_dim = 0;  // filled in from the training data
  int se_bottleneck = 8;
  int backend_hidden = 16;
  int conv_dilation = 2;  // right-branch dilated convolution

  void validate() const;
};

// Which heads of the model a forward pass should build. The speaker (right)
// path is always computed; the spoof path needs the left branch and the SASV
// path needs both plus the per-block fusion. With both flags off the encoder
// reduces to the plain residual speaker encoder used by the ablation, and the
// right-path activations are identical either way.
struct PathMask {
  bool spoof = true;
  bool sasv = true;
  bool need_left() const { return spoof || sasv; }
};

// Per-block activations; vars are invalid where the mask skipped a path.
struct BlockActivations {
  Var h_left, h_right, h_fuse, h_final;
};

struct EncodeOut {
  std::vector<BlockActivations> blocks;
  Var h_spoof, h_asv;  // branch aggregates (arithmetic means)
  Var h_fuse_sum;      // layer norm of summed per-block outputs
  Var e_spoof, e_asv, e_fuse;
};

// Fresh parameters for a model configuration, deterministically seeded.
ParamStore init_params(const ModelConfig& cfg, uint64_t seed);

// One dual-path block: multi-head self-attention branch, squeeze-excitation
// residual branch, fused output, and the conv/residual tail. x is
// frames x model_dim. Blocks are parallel: each reads the shared input.
BlockActivations block_forward(Tape& t, Var x, const BoundParams& bp,
                               int block_index, const ModelConfig& cfg,
                               PathMask mask = PathMask{});

// Arithmetic mean of same-shaped block outputs.
Var aggregate_branch(Tape& t, const std::vector<Var>& h_list);

// 1-D convolution over time followed by mean pooling over frames -> 1 x emb.
// head is one of "spoof", "asv", "fuse".
Var embed(Tape& t, Var h, const BoundParams& bp, const std::string& head,
          const ModelConfig& cfg);

// P(bona fide) = sigmoid(e . theta).
Var spoof_prob(Tape& t, Var e_spoof, Var theta_spoof);

// Binary cross-entropy with probability clamping; labels use 1 = positive.
Var bce_loss(Tape& t, const std::vector<Var>& probs,
             const std::vector<int>& labels, double eps = 1e-7);

// Mean BCE of P(bona fide) against y_spoof (bona fide = 1).
Var spoof_loss(Tape& t, const std::vector<Var>& probs,
               const std::vector<int>& y_bona);

// Per-speaker logits h(e_asv); theta_asv has one row per speaker.
Var asv_logits(Tape& t, Var e_asv, Var theta_asv);
// Softmax over the per-speaker logits (max-subtracted).
Var asv_softmax(Tape& t, Var e_asv, Var theta_asv);
// Mean negative log-probability of the true speaker.
Var asv_loss(Tape& t, const std::vector<Var>& prob_rows,
             const std::vector<int>& labels);

// LN of the summed per-block outputs, then the fuse-head embedding.
Var fuse_embedding(Tape& t, const std::vector<Var>& h_final_list,
                   const BoundParams& bp, const ModelConfig& cfg);

// SASV back-end: attention pooling over the enrollment embeddings, cosine and
// element-wise-product features against the test embedding plus the test
// embedding itself, then a two-layer classifier with a terminal sigmoid.
// Invariant under permutation of the enrollment set.
Var sasv_score(Tape& t, const std::vector<Var>& enroll_e_fuse, Var test_e_fuse,
               const BoundParams& bp, const ModelConfig& cfg);

// Full utterance encoding: input projection, N parallel blocks, branch
// aggregation and embeddings, under the given mask.
EncodeOut encode(Tape& t, Var features, const BoundParams& bp,
                 const ModelConfig& cfg, PathMask mask = PathMask{});

// One trial in a forward batch. Pointers refer into a manifest that outlives
// the batch; speaker_label indexes the training speaker table.
struct TrialFeatures {
  std::vector<const Utterance*> enroll;
  const Utterance* test = nullptr;
  int speaker_label = -1;
  bool test_bona = true;
  bool label = false;
};

struct ModelForward {
  std::vector<Var> asv_logit_rows;  // per trial, 1 x S (test utterance)
  std::vector<Var> spoof_probs;     // per trial, P(bona fide) of the test side
  std::vector<Var> sasv_scores;     // per trial
  std::vector<Var> test_e_asv;      // per trial, exposed for cosine scoring
};

// Runs the encoder once per unique utterance in the batch and all requested
// heads per trial.
ModelForward model_forward(Tape& t, const std::vector<TrialFeatures>& batch,
                           const BoundParams& bp, const ModelConfig& cfg,
                           PathMask mask = PathMask{});

// ---- checkpointing ----

struct Checkpoint {
  ModelConfig config;
  ParamStore params;
  std::vector<std::string> speakers;  // index -> speaker id
};

// Binary container; round-trips parameters bit-exactly.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sasv

#endif  // SASV_MODEL_H_
