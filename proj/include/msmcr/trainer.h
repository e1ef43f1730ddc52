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

#ifndef MSMCR_TRAINER_H_
#define MSMCR_TRAINER_H_

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "msmcr/corpus_io.h"
#include "msmcr/metrics.h"
#include "msmcr/msmc.h"
#include "msmcr/types.h"
#include "msmcr/vq.h"

namespace msmcr {

struct TrainConfig {
  long long iterations = 200;
  int batch_utterances = 16;
  uint64_t seed = 0;
  EmaConfig ema;
  LossWeights weights;
  std::vector<StageConfig> stages = {{1, 4, 64}, {4, 4, 64}};
  CouplingMode coupling = CouplingMode::kDirect;
  std::string init_model_path;  // fine-tune from this model when non-empty
  long long log_interval = 10;
  int workers = 1;
  long long init_pool_max_frames = 10000;  // codebook seeding pool cap
  // When non-empty, the corpus fingerprint must match this value exactly;
  // guards a run configuration against stale feature files.
  std::string expected_fingerprint;
};

struct TrainStep {
  long long iteration = 0;
  double l_f = 0.0;
  double l_q = 0.0;
  double l_e = 0.0;
  std::vector<double> ppl_per_stage;  // mean over heads
};

struct TrainHistory {
  std::vector<TrainStep> steps;
};

// A corpus loaded into memory: ids, feature sequences, and optional F0
// tracks found next to each feature file (<stem>.f0.feat holds the
// reference track, <stem>.f0hyp.feat a hypothesis track to score against
// it). content_hash identifies the corpus bytes independent of paths.
struct LoadedCorpus {
  std::vector<std::string> ids;
  std::vector<FeatureSequence> features;
  std::vector<std::optional<F0Track>> f0_ref;
  std::vector<std::optional<F0Track>> f0_hyp;
  std::string fingerprint;
  int dim = 0;
  std::string content_hash;
};

LoadedCorpus LoadCorpus(const Manifest& manifest);

// EMA codebook training. From scratch: k-means++ seeding over a frame pool,
// then cfg.iterations rounds of {sample batch, quantize, merge stats, EMA
// update per stage, top stage first}. With init_model_path set, codebooks
// are loaded and fine-tuned instead. Deterministic given the seed and
// independent of cfg.workers. Progress lines go to `progress` when given:
//   iter=<n> l_f=<x> l_q=<x> l_e=<x> ppl=<csv>
std::pair<MSMCModel, TrainHistory> Train(const LoadedCorpus& corpus,
                                         const TrainConfig& cfg,
                                         std::ostream* progress = nullptr);

// Analysis-by-synthesis over a corpus: per-utterance and corpus-mean MCD
// and frame MSE; F0 metrics for utterances carrying both a reference and a
// hypothesis track.
MetricsReport EvaluateReconstruction(
    const LoadedCorpus& corpus, const MSMCModel& model,
    std::vector<std::pair<std::string, MetricsReport>>* per_utterance =
        nullptr);

}  // namespace msmcr

#endif  // MSMCR_TRAINER_H_
