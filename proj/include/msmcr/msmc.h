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

#ifndef MSMCR_MSMC_H_
#define MSMCR_MSMC_H_

#include <string>
#include <vector>

#include "msmcr/types.h"
#include "msmcr/vq.h"

namespace msmcr {

// One level of the multi-stage hierarchy. Stage s runs at 1/downsample_rate
// of the frame rate; rates are strictly increasing, stage 1 has rate 1, and
// each rate divides the next.
struct StageConfig {
  int downsample_rate = 1;
  int heads = 4;
  int codewords = 64;
};

// How a lower stage couples to the prediction from the stage above.
//   kDirect:   z(s) = Q_s(h(s))
//   kResidual: z(s) = zhat(s) + Q_s(h(s) - zhat(s))
enum class CouplingMode { kDirect, kResidual };

const char* CouplingModeName(CouplingMode mode);
CouplingMode CouplingModeFromName(const std::string& name);

struct LossWeights {
  double lambda_f = 1.0;
  double lambda_q = 1.0;
  double lambda_e = 1.0;
  double lambda_w = 0.0;  // waveform term, fixed to zero in this system
};

struct TrainingMeta {
  long long iterations = 0;
  std::string corpus_hash;
  uint64_t seed = 0;
};

// Full model: stage hierarchy, codebooks, loss weights, the front-end
// fingerprint the features were extracted with, and training metadata.
struct MSMCModel {
  int feature_dim = 0;
  CouplingMode coupling = CouplingMode::kDirect;
  LossWeights weights;
  std::string dsp_fingerprint;
  std::vector<StageConfig> stage_configs;
  std::vector<Codebook> codebooks;  // parallel to stage_configs
  TrainingMeta meta;

  int num_stages() const { return static_cast<int>(stage_configs.size()); }

  // Throws Error on any structural inconsistency (rates, dims, table sizes).
  void Validate() const;
};

// The compact representation of one utterance: per stage, the token matrix
// (frames x heads) and the quantized sequence (frames x feature_dim). The
// tokens alone determine the quantized sequences exactly.
struct MSMCRStage {
  int frames = 0;
  std::vector<int> indices;  // frames * heads, row-major
  FeatureSequence quantized;
};

struct MSMCR {
  std::vector<MSMCRStage> stages;
};

struct LossReport {
  double l_f = 0.0;
  std::vector<double> l_q_stage;  // per stage
  double l_q = 0.0;               // sum over stages
  std::vector<double> l_e_pair;   // per adjacent pair (s, s+1)
  double l_e = 0.0;               // sum over pairs
  double weighted_total = 0.0;
};

// Strided mean pooling: output length ceil(T/rate), each output frame the
// mean of its window (the final window may be partial). rate 1 is identity.
FeatureSequence Downsample(const FeatureSequence& seq, int rate);

// Frame repetition truncated to target_len. Requires
// ceil(target_len / rate) == seq.rows.
FeatureSequence Upsample(const FeatureSequence& seq, int rate, int target_len);

// Hierarchical encode: downsample chain h(1)..h(S), then quantize top stage
// first; lower stages see the upsampled prediction from above (used as input
// offset in residual mode). Deterministic.
MSMCR Encode(const FeatureSequence& features, const MSMCModel& model);

// Reconstruction from tokens only; stage-1 quantized sequence comes back as
// the feature-domain output. Bit-identical to the sequences stored during
// Encode.
FeatureSequence Decode(const MSMCR& repr, const MSMCModel& model);

// Eq-style loss terms over one utterance:
//   l_f      frame MSE between input and reconstruction
//   l_q(s)   MSE between each quantizer's input and output
//   l_e(s)   MSE between z(s) and the higher stage's prediction zhat(s)
// weighted_total = lf*l_f + lq*l_q + le*l_e (waveform term identically 0).
LossReport ComputeLosses(const FeatureSequence& features,
                         const MSMCModel& model);

}  // namespace msmcr

#endif  // MSMCR_MSMC_H_
