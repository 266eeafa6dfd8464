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

#include "sasv/datagen.h"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "sasv/rng.h"

namespace fs = std::filesystem;

namespace sasv {

namespace {

double to_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

Mat round_f32(const Mat& m) {
  return m.unaryExpr([](double x) { return to_f32(x); });
}

Mat factor_vector(uint64_t seed, const std::string& tag, uint64_t index,
                  int dim, double scale) {
  Rng rng(derive_seed(seed, tag, index));
  Mat v(1, dim);
  for (int i = 0; i < dim; ++i) v(0, i) = scale * rng.gaussian();
  return v;
}

// Fixed spoof channel derived from the seed: a mild linear distortion
// I + s*P and an additive artifact direction.
struct SpoofChannel {
  Mat distortion;  // dim x dim
  Mat artifact;    // 1 x dim
};

SpoofChannel make_spoof_channel(uint64_t seed, int dim, double spoof_scale) {
  SpoofChannel ch;
  Rng rng(derive_seed(seed, "spoof-channel"));
  Mat p(dim, dim);
  double sd = 0.08 / std::sqrt(static_cast<double>(dim));
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) p(i, j) = sd * rng.gaussian();
  }
  ch.distortion = Mat::Identity(dim, dim) + spoof_scale * p;
  ch.artifact = Mat(1, dim);
  for (int j = 0; j < dim; ++j) ch.artifact(0, j) = 0.25 * rng.gaussian();
  ch.artifact *= spoof_scale;
  return ch;
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) {
    throw std::invalid_argument("CorpusSpec." + field + ": " + what);
  }
}

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("feature file: truncated header");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

void write_u32(std::ostream& out, uint32_t x) {
  unsigned char b[4] = {static_cast<unsigned char>(x & 0xff),
                        static_cast<unsigned char>((x >> 8) & 0xff),
                        static_cast<unsigned char>((x >> 16) & 0xff),
                        static_cast<unsigned char>((x >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

std::vector<std::string> default_genres() {
  return {"dr", "vl", "sp", "en", "in", "pl", "lb", "mo", "si", "re"};
}

void CorpusSpec::validate() const {
  require(num_speakers >= 2, "num_speakers", "must be >= 2");
  require(!genres.empty(), "genres", "must be nonempty");
  std::set<std::string> uniq(genres.begin(), genres.end());
  require(uniq.size() == genres.size(), "genres", "must be unique");
  require(utterances_per_speaker_genre >= 1, "utterances_per_speaker_genre",
          "must be >= 1");
  require(frames >= 1, "frames", "must be >= 1");
  require(feature_dim >= 2, "feature_dim", "must be >= 2");
  require(speaker_scale >= 0.0, "speaker_scale", "must be >= 0");
  require(genre_scale >= 0.0, "genre_scale", "must be >= 0");
  require(noise_scale >= 0.0, "noise_scale", "must be >= 0");
  require(spoof_scale >= 0.0, "spoof_scale", "must be >= 0");
}

Manifest synth_corpus(const CorpusSpec& spec) {
  spec.validate();
  Manifest manifest;
  manifest.reserve(static_cast<size_t>(spec.num_speakers) *
                   spec.genres.size() * spec.utterances_per_speaker_genre);
  for (int s = 0; s < spec.num_speakers; ++s) {
    char spk[32];
    std::snprintf(spk, sizeof(spk), "spk%04d", s);
    Mat spk_vec = factor_vector(spec.seed, "speaker", s, spec.feature_dim,
                                spec.speaker_scale);
    for (size_t gi = 0; gi < spec.genres.size(); ++gi) {
      const std::string& genre = spec.genres[gi];
      Mat gen_vec = factor_vector(spec.seed, "genre-" + genre, 0,
                                  spec.feature_dim, spec.genre_scale);
      for (int u = 0; u < spec.utterances_per_speaker_genre; ++u) {
        Utterance utt;
        char id[64];
        std::snprintf(id, sizeof(id), "%s-%s-%03d", spk, genre.c_str(), u);
        utt.utt_id = id;
        utt.speaker = spk;
        utt.genre = genre;
        utt.is_spoof = false;
        uint64_t useed = derive_seed(
            spec.seed, "utt-" + std::string(spk) + "-" + genre, u);
        Rng rng(useed);
        Mat feats(spec.frames, spec.feature_dim);
        for (int t = 0; t < spec.frames; ++t) {
          for (int j = 0; j < spec.feature_dim; ++j) {
            feats(t, j) =
                spk_vec(0, j) + gen_vec(0, j) + spec.noise_scale * rng.gaussian();
          }
        }
        utt.features = round_f32(feats);
        manifest.push_back(std::move(utt));
      }
    }
  }
  return manifest;
}

Utterance spoofify(const Utterance& u, double spoof_scale, uint64_t seed) {
  if (u.is_spoof) {
    throw std::invalid_argument("spoofify: input " + u.utt_id +
                                " is already spoofed");
  }
  SpoofChannel ch =
      make_spoof_channel(seed, static_cast<int>(u.features.cols()), spoof_scale);
  Utterance out;
  out.utt_id = u.utt_id + kSpoofSuffix;
  out.speaker = u.speaker;
  out.genre = u.genre;
  out.is_spoof = true;
  // Re-synthesis suppresses frame-level detail: blend each frame toward the
  // utterance mean (a linear map in time), then apply the channel distortion
  // and additive artifact. At spoof_scale 0 the whole transform is identity.
  double beta = spoof_scale / (spoof_scale + 0.2);
  Mat mean = u.features.colwise().mean();
  Mat smoothed = (1.0 - beta) * u.features;
  smoothed.rowwise() += beta * mean.row(0);
  Mat feats = smoothed * ch.distortion.transpose();
  feats.rowwise() += ch.artifact.row(0);
  out.features = round_f32(feats);
  return out;
}

Manifest synth_corpus_with_spoofs(const CorpusSpec& spec) {
  Manifest bona = synth_corpus(spec);
  Manifest all;
  all.reserve(bona.size() * 2);
  for (auto& u : bona) {
    Utterance sp = spoofify(u, spec.spoof_scale, spec.seed);
    all.push_back(std::move(u));
    all.push_back(std::move(sp));
  }
  return all;
}

void write_features(const std::string& path, const Mat& features) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_u32(out, static_cast<uint32_t>(features.rows()));
  write_u32(out, static_cast<uint32_t>(features.cols()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
      float f = static_cast<float>(features(i, j));
      static_assert(sizeof(float) == 4);
      out.write(reinterpret_cast<const char*>(&f), 4);
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Mat read_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  uint32_t frames = read_u32(in);
  uint32_t dim = read_u32(in);
  Mat m(frames, dim);
  for (uint32_t i = 0; i < frames; ++i) {
    for (uint32_t j = 0; j < dim; ++j) {
      float f;
      in.read(reinterpret_cast<char*>(&f), 4);
      if (!in) throw std::runtime_error("feature file truncated: " + path);
      m(i, j) = static_cast<double>(f);
    }
  }
  return m;
}

void save_corpus(const Manifest& manifest, const std::string& dir) {
  fs::create_directory(dir);
  fs::create_directory(fs::path(dir) / "feats");
  std::ofstream mf(fs::path(dir) / "manifest.tsv");
  if (!mf) throw std::runtime_error("cannot write manifest in " + dir);
  for (const auto& u : manifest) {
    std::string rel = "feats/" + u.utt_id + ".bin";
    write_features((fs::path(dir) / rel).string(), u.features);
    mf << u.utt_id << '\t' << u.speaker << '\t' << u.genre << '\t'
       << (u.is_spoof ? 1 : 0) << '\t' << rel << '\n';
  }
  if (!mf) throw std::runtime_error("manifest write failed in " + dir);
}

namespace {

Manifest load_manifest_impl(const std::string& manifest_path, bool with_feats) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot read " + manifest_path);
  fs::path base = fs::path(manifest_path).parent_path();
  Manifest manifest;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    Utterance u;
    std::string spoof_flag, feat_path;
    if (!std::getline(ss, u.utt_id, '\t') || !std::getline(ss, u.speaker, '\t') ||
        !std::getline(ss, u.genre, '\t') || !std::getline(ss, spoof_flag, '\t') ||
        !std::getline(ss, feat_path)) {
      throw std::runtime_error(manifest_path + ":" + std::to_string(lineno) +
                               ": malformed manifest line");
    }
    if (spoof_flag != "0" && spoof_flag != "1") {
      throw std::runtime_error(manifest_path + ":" + std::to_string(lineno) +
                               ": spoof flag must be 0 or 1");
    }
    u.is_spoof = spoof_flag == "1";
    fs::path full = fs::path(feat_path).is_absolute()
                        ? fs::path(feat_path)
                        : base / feat_path;
    u.feature_path = fs::absolute(full).lexically_normal().string();
    if (with_feats) {
      u.features = read_features(u.feature_path);
      if (!u.features.allFinite()) {
        throw std::runtime_error("non-finite features in " + feat_path);
      }
    }
    manifest.push_back(std::move(u));
  }
  return manifest;
}

}  // namespace

Manifest load_corpus(const std::string& manifest_path) {
  return load_manifest_impl(manifest_path, true);
}

Manifest load_manifest_rows(const std::string& manifest_path) {
  return load_manifest_impl(manifest_path, false);
}

}  // namespace sasv
