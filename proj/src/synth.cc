// Copyright 2026 The msmcr Authors
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

#include "msmcr/synth.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "msmcr/corpus_io.h"

namespace msmcr {
namespace synth {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

double UniformUnit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

size_t UniformIndex(std::mt19937_64& rng, size_t n) {
  const size_t i = static_cast<size_t>(UniformUnit(rng) * static_cast<double>(n));
  return std::min(i, n - 1);
}

// Box-Muller; self-contained so draws are identical on every platform.
double Gaussian(std::mt19937_64& rng) {
  double u1 = UniformUnit(rng);
  while (u1 <= 0.0) u1 = UniformUnit(rng);
  const double u2 = UniformUnit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

std::vector<double> GaussianVector(std::mt19937_64& rng, int dim,
                                   double scale) {
  std::vector<double> v(dim);
  for (double& x : v) x = scale * Gaussian(rng);
  return v;
}

// A synthetic speaker: a Gaussian mixture over feature space.
struct Speaker {
  std::vector<std::vector<double>> component_means;
};

Speaker MakeSpeaker(std::mt19937_64& rng, const SynthConfig& cfg,
                    double offset) {
  Speaker spk;
  spk.component_means.reserve(cfg.components);
  for (int c = 0; c < cfg.components; ++c) {
    std::vector<double> mean =
        GaussianVector(rng, cfg.feature_dim, cfg.component_scale);
    for (double& x : mean) x += offset;
    spk.component_means.push_back(std::move(mean));
  }
  return spk;
}

Speaker JitterSpeaker(std::mt19937_64& rng, const Speaker& base,
                      const SynthConfig& cfg) {
  Speaker spk = base;
  for (auto& mean : spk.component_means) {
    for (double& x : mean) x += cfg.matched_jitter * Gaussian(rng);
  }
  return spk;
}

FeatureSequence SampleUtterance(std::mt19937_64& rng, const Speaker& spk,
                                const SynthConfig& cfg) {
  FeatureSequence f(cfg.frames_per_utt, cfg.feature_dim);
  for (int t = 0; t < cfg.frames_per_utt; ++t) {
    const auto& mean =
        spk.component_means[UniformIndex(rng, spk.component_means.size())];
    float* row = f.row(t);
    for (int d = 0; d < cfg.feature_dim; ++d) {
      row[d] =
          static_cast<float>(mean[d] + cfg.within_sigma * Gaussian(rng));
    }
  }
  return f;
}

std::vector<double> UnitVector(std::mt19937_64& rng, int dim) {
  std::vector<double> v = GaussianVector(rng, dim, 1.0);
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

std::vector<double> PerturbedUnit(std::mt19937_64& rng,
                                  const std::vector<double>& base,
                                  double noise) {
  std::vector<double> v = base;
  for (double& x : v) x += noise * Gaussian(rng);
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

std::string Id(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%03d", prefix, i);
  return buf;
}

void WriteSplit(const std::vector<SynthUtterance>& utts,
                const std::string& fingerprint, const std::string& dir) {
  fs::create_directories(dir);
  Manifest manifest;
  for (const SynthUtterance& u : utts) {
    const std::string file = u.id + ".mel.feat";
    WriteFeatures((fs::path(dir) / file).string(), u.features, fingerprint);
    manifest.rows.push_back({u.id, file, u.speaker_id, u.language});
  }
  WriteManifest(manifest, (fs::path(dir) / "manifest.tsv").string());
}

}  // namespace

SynthCorpus MakeCorpus(const SynthConfig& cfg) {
  if (cfg.feature_dim <= 0 || cfg.frames_per_utt <= 0 || cfg.components <= 0) {
    throw Error("invalid synthetic corpus configuration");
  }
  std::mt19937_64 rng(cfg.seed);
  SynthCorpus corpus;
  corpus.fingerprint = "synth:v1;d=" + std::to_string(cfg.feature_dim);

  const Speaker target = MakeSpeaker(rng, cfg, 0.0);
  // Mismatched speakers share a base mixture far from the target's, jittered
  // per speaker, just like matched speakers jitter the target's mixture.
  const Speaker mismatch_base = MakeSpeaker(rng, cfg, cfg.mismatch_offset);
  const std::vector<double> target_emb = UnitVector(rng, cfg.embedding_dim);

  for (int i = 0; i < cfg.n_target; ++i) {
    const std::string id = Id("tgt", i);
    corpus.target.push_back(
        {id, "spk_target", "l1", SampleUtterance(rng, target, cfg)});
    corpus.target_embeddings.push_back(
        {id, "spk_target", "l1",
         PerturbedUnit(rng, target_emb, cfg.target_emb_noise)});
  }
  for (int i = 0; i < cfg.n_target_test; ++i) {
    corpus.target_test.push_back(
        {Id("tst", i), "spk_target", "l1", SampleUtterance(rng, target, cfg)});
  }

  for (int i = 0; i < cfg.n_matched + cfg.n_mismatched; ++i) {
    const std::string id = Id("cand", i);
    const bool matched = i < cfg.n_matched;
    const std::string speaker = Id(matched ? "spk_m" : "spk_x", i);
    Speaker spk = matched ? JitterSpeaker(rng, target, cfg)
                          : JitterSpeaker(rng, mismatch_base, cfg);
    std::vector<double> emb =
        matched ? PerturbedUnit(rng, target_emb, cfg.matched_emb_noise)
                : UnitVector(rng, cfg.embedding_dim);
    corpus.candidates.push_back(
        {id, speaker, "l2", SampleUtterance(rng, spk, cfg)});
    corpus.candidate_embeddings.push_back({id, speaker, "l2", std::move(emb)});
    if (matched) corpus.matched_ids.push_back(id);
  }
  return corpus;
}

void WriteCorpus(const SynthCorpus& corpus, const std::string& out_dir) {
  WriteSplit(corpus.target, corpus.fingerprint,
             (fs::path(out_dir) / "target").string());
  WriteSplit(corpus.target_test, corpus.fingerprint,
             (fs::path(out_dir) / "target_test").string());
  WriteSplit(corpus.candidates, corpus.fingerprint,
             (fs::path(out_dir) / "candidates").string());
  const fs::path emb_dir = fs::path(out_dir) / "embeddings";
  fs::create_directories(emb_dir);
  WriteEmbeddings(corpus.target_embeddings, (emb_dir / "target.emb").string());
  WriteEmbeddings(corpus.candidate_embeddings,
                  (emb_dir / "candidates.emb").string());
}

}  // namespace synth
}  // namespace msmcr
