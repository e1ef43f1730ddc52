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

#ifndef MSMCR_SYNTH_H_
#define MSMCR_SYNTH_H_

#include <string>
#include <vector>

#include "msmcr/selection.h"
#include "msmcr/types.h"

namespace msmcr {
namespace synth {

// Seeded Gaussian-mixture corpus generator. Every "speaker" is a mixture of
// `components` Gaussians over feature space; frames sample a component and
// add within-component noise.
//
// The candidate pool is half matched (component means jittered from the
// target speaker's, embeddings close to the target embedding) and half
// mismatched (means offset far away, embeddings random), so selection by
// embedding similarity aligns with feature-space usefulness.
struct SynthConfig {
  uint64_t seed = 1;
  int feature_dim = 80;
  int frames_per_utt = 50;
  int n_target = 5;
  int n_target_test = 20;
  int n_matched = 25;
  int n_mismatched = 25;
  int components = 16;
  double component_scale = 2.0;   // spread of component means
  double within_sigma = 0.5;      // frame noise inside a component
  double matched_jitter = 0.15;   // matched speakers' mean perturbation
  double mismatch_offset = 8.0;   // constant added to mismatched means
  int embedding_dim = 32;
  double target_emb_noise = 0.02;
  double matched_emb_noise = 0.05;
};

// One named utterance of synthetic features.
struct SynthUtterance {
  std::string id;
  std::string speaker_id;
  std::string language;
  FeatureSequence features;
};

struct SynthCorpus {
  std::vector<SynthUtterance> target;
  std::vector<SynthUtterance> target_test;
  std::vector<SynthUtterance> candidates;
  std::vector<EmbeddingRecord> target_embeddings;
  std::vector<EmbeddingRecord> candidate_embeddings;
  std::vector<std::string> matched_ids;  // ground truth, for tests
  std::string fingerprint;
};

SynthCorpus MakeCorpus(const SynthConfig& cfg);

// Layout under out_dir:
//   target/manifest.tsv        + <id>.mel.feat
//   target_test/manifest.tsv   + <id>.mel.feat
//   candidates/manifest.tsv    + <id>.mel.feat
//   embeddings/target.emb, embeddings/candidates.emb
void WriteCorpus(const SynthCorpus& corpus, const std::string& out_dir);

}  // namespace synth
}  // namespace msmcr

#endif  // MSMCR_SYNTH_H_
