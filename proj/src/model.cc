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

#include "sasv/model.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "sasv/rng.h"

namespace sasv {

namespace {

void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("ModelConfig: ") + what);
}

Mat gauss_matrix(Rng& rng, int rows, int cols, double sd) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = sd * rng.gaussian();
  }
  return m;
}

void add_linear(ParamStore& p, Rng& rng, const std::string& prefix, int in,
                int out) {
  p.add(prefix + ".w", gauss_matrix(rng, in, out, 1.0 / std::sqrt(in)));
  p.add(prefix + ".b", Mat::Zero(1, out));
}

void add_conv(ParamStore& p, Rng& rng, const std::string& prefix, int kernel,
              int din, int dout) {
  double sd = 1.0 / std::sqrt(static_cast<double>(kernel) * din);
  p.add(prefix + ".w", gauss_matrix(rng, kernel * din, dout, sd));
  p.add(prefix + ".b", Mat::Zero(1, dout));
}

void add_layer_norm(ParamStore& p, const std::string& prefix, int dim) {
  p.add(prefix + ".g", Mat::Ones(1, dim));
  p.add(prefix + ".b", Mat::Zero(1, dim));
}

std::string block_prefix(int n) { return "block" + std::to_string(n); }

}  // namespace

void ModelConfig::validate() const {
  check(num_blocks >= 1, "num_blocks must be >= 1");
  check(model_dim >= 1, "model_dim must be >= 1");
  check(attention_heads >= 1, "attention_heads must be >= 1");
  check(model_dim % attention_heads == 0,
        "model_dim must be divisible by attention_heads");
  check(conv_kernel >= 1 && conv_kernel % 2 == 1,
        "conv_kernel must be odd and positive");
  check(embedding_dim >= 1, "embedding_dim must be >= 1");
  check(feature_dim >= 1, "feature_dim must be >= 1");
  check(num_speakers >= 1, "num_speakers must be >= 1");
  check(se_bottleneck >= 1, "se_bottleneck must be >= 1");
  check(backend_hidden >= 1, "backend_hidden must be >= 1");
  check(conv_dilation >= 1, "conv_dilation must be >= 1");
}

ParamStore init_params(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  ParamStore p;
  Rng rng(derive_seed(seed, "model-init"));
  int d = cfg.model_dim;
  int emb = cfg.embedding_dim;

  add_linear(p, rng, "input.proj", cfg.feature_dim, d);
  for (int n = 0; n < cfg.num_blocks; ++n) {
    const std::string b = block_prefix(n);
    add_layer_norm(p, b + ".attn.ln", d);
    for (const char* part : {"wq", "wk", "wv", "wo"}) {
      p.add(b + ".attn." + part,
            gauss_matrix(rng, d, d, 1.0 / std::sqrt(d)));
    }
    for (const char* part : {"bq", "bk", "bv", "bo"}) {
      p.add(b + ".attn." + part, Mat::Zero(1, d));
    }
    add_conv(p, rng, b + ".se.conv", cfg.conv_kernel, d, d);
    add_linear(p, rng, b + ".se.fc1", d, cfg.se_bottleneck);
    add_linear(p, rng, b + ".se.fc2", cfg.se_bottleneck, d);
    add_layer_norm(p, b + ".fuse.ln", d);
    add_conv(p, rng, b + ".conv", cfg.conv_kernel, d, d);
    add_layer_norm(p, b + ".final.ln", d);
  }

  add_conv(p, rng, "spoof.conv", cfg.conv_kernel, d, emb);
  p.add("spoof.theta", gauss_matrix(rng, emb, 1, 1.0 / std::sqrt(emb)));
  add_conv(p, rng, "asv.conv", cfg.conv_kernel, d, emb);
  p.add("asv.head.w",
        gauss_matrix(rng, cfg.num_speakers, emb, 1.0 / std::sqrt(emb)));
  add_layer_norm(p, "fuse.agg_ln", d);
  add_conv(p, rng, "fuse.conv", cfg.conv_kernel, d, emb);
  p.add("backend.att.w", gauss_matrix(rng, emb, 1, 1.0 / std::sqrt(emb)));
  add_linear(p, rng, "backend.fc1", 1 + 2 * emb, cfg.backend_hidden);
  add_linear(p, rng, "backend.fc2", cfg.backend_hidden, 1);
  return p;
}

namespace {

// Pre-LN multi-head self-attention with residual connection.
Var attention_branch(Tape& t, Var x, const BoundParams& bp,
                     const std::string& b, const ModelConfig& cfg) {
  Var z = t.layer_norm(x, bp.of(b + ".attn.ln.g"), bp.of(b + ".attn.ln.b"));
  Var q = t.add_row(t.matmul(z, bp.of(b + ".attn.wq")), bp.of(b + ".attn.bq"));
  Var k = t.add_row(t.matmul(z, bp.of(b + ".attn.wk")), bp.of(b + ".attn.bk"));
  Var v = t.add_row(t.matmul(z, bp.of(b + ".attn.wv")), bp.of(b + ".attn.bv"));
  int dh = cfg.model_dim / cfg.attention_heads;
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> heads;
  heads.reserve(cfg.attention_heads);
  for (int h = 0; h < cfg.attention_heads; ++h) {
    Var qh = t.slice_cols(q, h * dh, dh);
    Var kh = t.slice_cols(k, h * dh, dh);
    Var vh = t.slice_cols(v, h * dh, dh);
    Var scores = t.scale(t.matmul(qh, t.transpose(kh)), inv_sqrt);
    Var attn = t.softmax_rows(scores);
    heads.push_back(t.matmul(attn, vh));
  }
  Var o = t.concat_cols(heads);
  Var proj =
      t.add_row(t.matmul(o, bp.of(b + ".attn.wo")), bp.of(b + ".attn.bo"));
  return t.add(x, proj);
}

// Squeeze-excitation residual branch with a dilated convolution.
Var se_branch(Tape& t, Var x, const BoundParams& bp, const std::string& b,
              const ModelConfig& cfg) {
  Var c = t.relu(t.conv1d(x, bp.of(b + ".se.conv.w"), bp.of(b + ".se.conv.b"),
                          cfg.conv_kernel, cfg.conv_dilation));
  Var squeeze = t.mean_rows(c);
  Var z = t.relu(
      t.add_row(t.matmul(squeeze, bp.of(b + ".se.fc1.w")), bp.of(b + ".se.fc1.b")));
  Var gate = t.sigmoid(
      t.add_row(t.matmul(z, bp.of(b + ".se.fc2.w")), bp.of(b + ".se.fc2.b")));
  Var scaled = t.row_broadcast_mul(c, gate);
  return t.add(x, scaled);
}

}  // namespace

BlockActivations block_forward(Tape& t, Var x, const BoundParams& bp,
                               int block_index, const ModelConfig& cfg,
                               PathMask mask) {
  if (!t.val(x).allFinite()) {
    throw std::invalid_argument("block_forward: non-finite input");
  }
  if (t.val(x).cols() != cfg.model_dim) {
    throw std::invalid_argument("block_forward: input must be frames x model_dim");
  }
  const std::string b = block_prefix(block_index);
  BlockActivations out;
  out.h_right = se_branch(t, x, bp, b, cfg);
  if (mask.need_left()) {
    out.h_left = attention_branch(t, x, bp, b, cfg);
  }
  if (mask.sasv) {
    Var fused = t.add(out.h_left, out.h_right);
    out.h_fuse =
        t.layer_norm(fused, bp.of(b + ".fuse.ln.g"), bp.of(b + ".fuse.ln.b"));
    Var conv = t.relu(t.conv1d(out.h_fuse, bp.of(b + ".conv.w"),
                               bp.of(b + ".conv.b"), cfg.conv_kernel, 1));
    out.h_final = t.layer_norm(t.add(conv, out.h_fuse),
                               bp.of(b + ".final.ln.g"),
                               bp.of(b + ".final.ln.b"));
  }
  return out;
}

Var aggregate_branch(Tape& t, const std::vector<Var>& h_list) {
  if (h_list.empty()) {
    throw std::invalid_argument("aggregate_branch: empty list");
  }
  return t.scale(t.add_n(h_list), 1.0 / static_cast<double>(h_list.size()));
}

Var embed(Tape& t, Var h, const BoundParams& bp, const std::string& head,
          const ModelConfig& cfg) {
  Var conv = t.conv1d(h, bp.of(head + ".conv.w"), bp.of(head + ".conv.b"),
                      cfg.conv_kernel, 1);
  return t.mean_rows(conv);
}

Var spoof_prob(Tape& t, Var e_spoof, Var theta_spoof) {
  return t.sigmoid(t.matmul(e_spoof, theta_spoof));
}

Var bce_loss(Tape& t, const std::vector<Var>& probs,
             const std::vector<int>& labels, double eps) {
  if (probs.empty() || probs.size() != labels.size()) {
    throw std::invalid_argument("bce_loss: probs/labels mismatch");
  }
  std::vector<Var> terms;
  terms.reserve(probs.size());
  for (size_t i = 0; i < probs.size(); ++i) {
    Var p = t.clamp(probs[i], eps, 1.0 - eps);
    Var term = labels[i] == 1
                   ? t.log_m(p)
                   : t.log_m(t.add_scalar(t.neg(p), 1.0));  // log(1 - p)
    terms.push_back(term);
  }
  return t.scale(t.add_n(terms), -1.0 / static_cast<double>(terms.size()));
}

Var spoof_loss(Tape& t, const std::vector<Var>& probs,
               const std::vector<int>& y_bona) {
  return bce_loss(t, probs, y_bona, 1e-7);
}

Var asv_logits(Tape& t, Var e_asv, Var theta_asv) {
  return t.matmul(e_asv, t.transpose(theta_asv));
}

Var asv_softmax(Tape& t, Var e_asv, Var theta_asv) {
  return t.softmax_rows(asv_logits(t, e_asv, theta_asv));
}

Var asv_loss(Tape& t, const std::vector<Var>& prob_rows,
             const std::vector<int>& labels) {
  if (prob_rows.empty() || prob_rows.size() != labels.size()) {
    throw std::invalid_argument("asv_loss: probs/labels mismatch");
  }
  std::vector<Var> terms;
  terms.reserve(prob_rows.size());
  for (size_t i = 0; i < prob_rows.size(); ++i) {
    int label = labels[i];
    if (label < 0 || label >= t.val(prob_rows[i]).cols()) {
      throw std::invalid_argument("asv_loss: label out of range");
    }
    // Guard against log(0) from exponent underflow; the clamp never binds at
    // sane logit ranges.
    Var p = t.clamp(t.pick(prob_rows[i], 0, label), 1e-300, 2.0);
    terms.push_back(t.log_m(p));
  }
  return t.scale(t.add_n(terms), -1.0 / static_cast<double>(terms.size()));
}

Var fuse_embedding(Tape& t, const std::vector<Var>& h_final_list,
                   const BoundParams& bp, const ModelConfig& cfg) {
  if (h_final_list.empty()) {
    throw std::invalid_argument("fuse_embedding: empty list");
  }
  Var summed = t.add_n(h_final_list);
  Var normed =
      t.layer_norm(summed, bp.of("fuse.agg_ln.g"), bp.of("fuse.agg_ln.b"));
  return embed(t, normed, bp, "fuse", cfg);
}

Var sasv_score(Tape& t, const std::vector<Var>& enroll_e_fuse, Var test_e_fuse,
               const BoundParams& bp, const ModelConfig& cfg) {
  if (enroll_e_fuse.empty()) {
    throw std::invalid_argument("sasv_score: empty enrollment set");
  }
  Var stacked = t.concat_rows(enroll_e_fuse);
  Var scores = t.matmul(stacked, bp.of("backend.att.w"));  // n x 1
  Var weights = t.softmax_rows(t.transpose(scores));       // 1 x n
  Var pooled = t.matmul(weights, stacked);                 // 1 x emb
  Var cos = cosine_rows(t, pooled, test_e_fuse);
  Var prod = t.mul(pooled, test_e_fuse);
  Var feat = t.concat_cols({cos, prod, test_e_fuse});
  Var h = t.relu(
      t.add_row(t.matmul(feat, bp.of("backend.fc1.w")), bp.of("backend.fc1.b")));
  Var logit =
      t.add_row(t.matmul(h, bp.of("backend.fc2.w")), bp.of("backend.fc2.b"));
  (void)cfg;
  return t.sigmoid(logit);
}

EncodeOut encode(Tape& t, Var features, const BoundParams& bp,
                 const ModelConfig& cfg, PathMask mask) {
  Var x = t.add_row(t.matmul(features, bp.of("input.proj.w")),
                    bp.of("input.proj.b"));
  EncodeOut out;
  std::vector<Var> lefts, rights, finals;
  for (int n = 0; n < cfg.num_blocks; ++n) {
    BlockActivations acts = block_forward(t, x, bp, n, cfg, mask);
    if (mask.need_left()) lefts.push_back(acts.h_left);
    rights.push_back(acts.h_right);
    if (mask.sasv) finals.push_back(acts.h_final);
    out.blocks.push_back(acts);
  }
  out.h_asv = aggregate_branch(t, rights);
  out.e_asv = embed(t, out.h_asv, bp, "asv", cfg);
  if (mask.spoof) {
    out.h_spoof = aggregate_branch(t, lefts);
    out.e_spoof = embed(t, out.h_spoof, bp, "spoof", cfg);
  }
  if (mask.sasv) {
    Var summed = t.add_n(finals);
    out.h_fuse_sum =
        t.layer_norm(summed, bp.of("fuse.agg_ln.g"), bp.of("fuse.agg_ln.b"));
    out.e_fuse = embed(t, out.h_fuse_sum, bp, "fuse", cfg);
  }
  return out;
}

ModelForward model_forward(Tape& t, const std::vector<TrialFeatures>& batch,
                           const BoundParams& bp, const ModelConfig& cfg,
                           PathMask mask) {
  ModelForward out;
  std::unordered_map<const Utterance*, EncodeOut> cache;
  auto encode_cached = [&](const Utterance* u) -> const EncodeOut& {
    auto it = cache.find(u);
    if (it != cache.end()) return it->second;
    Var x = t.input(u->features, false);
    return cache.emplace(u, encode(t, x, bp, cfg, mask)).first->second;
  };

  Var theta_asv = bp.of("asv.head.w");
  Var theta_spoof = bp.of("spoof.theta");
  for (const auto& trial : batch) {
    if (!trial.test || trial.enroll.empty()) {
      throw std::invalid_argument("model_forward: malformed trial");
    }
    const EncodeOut& test_enc = encode_cached(trial.test);
    out.asv_logit_rows.push_back(asv_logits(t, test_enc.e_asv, theta_asv));
    out.test_e_asv.push_back(test_enc.e_asv);
    if (mask.spoof) {
      out.spoof_probs.push_back(spoof_prob(t, test_enc.e_spoof, theta_spoof));
    }
    if (mask.sasv) {
      std::vector<Var> enroll_embs;
      enroll_embs.reserve(trial.enroll.size());
      for (const Utterance* e : trial.enroll) {
        enroll_embs.push_back(encode_cached(e).e_fuse);
      }
      out.sasv_scores.push_back(
          sasv_score(t, enroll_embs, test_enc.e_fuse, bp, cfg));
    }
  }
  return out;
}

// ---- checkpoint format ----

namespace {

constexpr char kMagic[8] = {'S', 'A', 'S', 'V', 'C', 'K', 'P', '1'};

void put_u32(std::ostream& out, uint32_t x) {
  unsigned char b[4] = {static_cast<unsigned char>(x & 0xff),
                        static_cast<unsigned char>((x >> 8) & 0xff),
                        static_cast<unsigned char>((x >> 16) & 0xff),
                        static_cast<unsigned char>((x >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("checkpoint: truncated");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  uint32_t n = get_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, 1);  // version
  const ModelConfig& c = ckpt.config;
  for (int v : {c.num_blocks, c.model_dim, c.attention_heads, c.conv_kernel,
                c.num_speakers, c.embedding_dim, c.feature_dim, c.se_bottleneck,
                c.backend_hidden, c.conv_dilation}) {
    put_u32(out, static_cast<uint32_t>(v));
  }
  put_u32(out, static_cast<uint32_t>(ckpt.speakers.size()));
  for (const auto& s : ckpt.speakers) put_string(out, s);
  put_u32(out, static_cast<uint32_t>(ckpt.params.size()));
  for (const auto& [name, m] : ckpt.params.tensors()) {
    put_string(out, name);
    put_u32(out, static_cast<uint32_t>(m.rows()));
    put_u32(out, static_cast<uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        double d = m(i, j);
        out.write(reinterpret_cast<const char*>(&d), sizeof(double));
      }
    }
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path + ": not a checkpoint file");
  }
  uint32_t version = get_u32(in);
  if (version != 1) {
    throw std::runtime_error(path + ": unsupported checkpoint version " +
                             std::to_string(version));
  }
  Checkpoint ckpt;
  ModelConfig& c = ckpt.config;
  int* fields[] = {&c.num_blocks,    &c.model_dim,   &c.attention_heads,
                   &c.conv_kernel,   &c.num_speakers, &c.embedding_dim,
                   &c.feature_dim,   &c.se_bottleneck, &c.backend_hidden,
                   &c.conv_dilation};
  for (int* f : fields) *f = static_cast<int>(get_u32(in));
  uint32_t n_speakers = get_u32(in);
  for (uint32_t i = 0; i < n_speakers; ++i) {
    ckpt.speakers.push_back(get_string(in));
  }
  uint32_t n_tensors = get_u32(in);
  for (uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = get_string(in);
    uint32_t rows = get_u32(in);
    uint32_t cols = get_u32(in);
    Mat m(rows, cols);
    for (uint32_t r = 0; r < rows; ++r) {
      for (uint32_t cc = 0; cc < cols; ++cc) {
        double d;
        in.read(reinterpret_cast<char*>(&d), sizeof(double));
        if (!in) throw std::runtime_error(path + ": truncated tensor data");
        m(r, cc) = d;
      }
    }
    ckpt.params.add(name, std::move(m));
  }
  return ckpt;
}

}  // namespace sasv
