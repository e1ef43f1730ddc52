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

#ifndef MSMCR_SELECTION_H_
#define MSMCR_SELECTION_H_

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msmcr/corpus_io.h"
#include "msmcr/types.h"

namespace msmcr {

// A precomputed speaker embedding for one utterance, unit-normalized at
// load time.
struct EmbeddingRecord {
  std::string utterance_id;
  std::string speaker_id;
  std::string language;
  std::vector<double> embedding;
};

// UTF-8, one record per line:
//   utterance_id<TAB>speaker_id<TAB>language<TAB>v1,v2,...,vD
// Rejects ragged dimensions, duplicate ids and zero-norm vectors.
std::vector<EmbeddingRecord> ReadEmbeddings(const std::string& path);
void WriteEmbeddings(const std::vector<EmbeddingRecord>& records,
                     const std::string& path);

// L2-normalized mean of the target speaker's utterance embeddings.
std::vector<double> TargetCentroid(const std::vector<EmbeddingRecord>& records);

struct RankedCandidate {
  std::string utterance_id;
  double cosine_similarity = 0.0;
};

// Candidates sorted by cosine similarity to the centroid, non-increasing,
// ties broken by utterance_id ascending. chosen_k / acd_at_k are filled in
// by the callers that request them.
struct SelectionReport {
  std::vector<RankedCandidate> ranked;
  int chosen_k = 0;
  std::vector<std::pair<int, double>> acd_at_k;
};

SelectionReport RankCandidates(const std::vector<EmbeddingRecord>& candidates,
                               std::span<const double> centroid);

struct TopKSelection {
  std::vector<std::string> ids;  // first k of the ranking
  std::optional<double> acd;     // mean of (1 - cos); absent when k == 0
};

TopKSelection SelectTopK(const SelectionReport& report, int k);

// Concatenates target rows (first, in order) with the selected candidate
// rows in candidate-manifest order. Errors on unknown or duplicate ids.
Manifest EmitAugmentedManifest(const Manifest& target,
                               const Manifest& candidates,
                               const std::vector<std::string>& selected_ids);

}  // namespace msmcr

#endif  // MSMCR_SELECTION_H_
