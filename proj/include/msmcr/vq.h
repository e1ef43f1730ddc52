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

#ifndef MSMCR_VQ_H_
#define MSMCR_VQ_H_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "msmcr/types.h"

namespace msmcr {

// Exponential-moving-average training parameters for a codebook.
struct EmaConfig {
  double decay = 0.99;        // gamma in (0, 1)
  double laplace_eps = 1e-5;  // count smoothing
};

// Multi-head (product) vector quantizer state. An input vector of dimension
// D = heads * sub_dim is split into `heads` sub-vectors, each quantized
// against its own table of `codewords` entries.
//
// EMA state: table[h][k] tracks ema_sums[h][k] / (Laplace-smoothed count).
// dead_streak counts consecutive updates a codeword's smoothed count stayed
// below the reseed threshold.
struct Codebook {
  int heads = 0;
  int codewords = 0;
  int sub_dim = 0;
  std::vector<double> table;       // heads * codewords * sub_dim
  std::vector<double> ema_counts;  // heads * codewords
  std::vector<double> ema_sums;    // heads * codewords * sub_dim
  std::vector<int> dead_streak;    // heads * codewords

  int dim() const { return heads * sub_dim; }
  double* Codeword(int h, int k) {
    return table.data() + (static_cast<size_t>(h) * codewords + k) * sub_dim;
  }
  const double* Codeword(int h, int k) const {
    return table.data() + (static_cast<size_t>(h) * codewords + k) * sub_dim;
  }
};

// Result of quantizing one D-dim vector: per-head codeword indices, the
// concatenated codeword vector, and the total squared error.
struct QuantResult {
  std::vector<int> indices;       // heads
  std::vector<double> quantized;  // dim
  double sq_error = 0.0;
};

// Per-head, per-codeword assignment counts and assigned sub-vector sums
// accumulated over a batch. Merging is plain addition, so partial stats
// from parallel workers combine in any fixed order.
struct AssignStats {
  int heads = 0;
  int codewords = 0;
  int sub_dim = 0;
  std::vector<double> counts;  // heads * codewords
  std::vector<double> sums;    // heads * codewords * sub_dim

  AssignStats() = default;
  AssignStats(int h, int k, int d)
      : heads(h),
        codewords(k),
        sub_dim(d),
        counts(static_cast<size_t>(h) * k, 0.0),
        sums(static_cast<size_t>(h) * k * d, 0.0) {}

  void Merge(const AssignStats& other);
};

struct BatchQuant {
  std::vector<QuantResult> results;
  AssignStats stats;
};

// k-means++ seeding per head over that head's sub-vectors. Deterministic
// given the seed. ema_counts start at 1 and ema_sums at the codewords so
// that table == sums / count holds from the start.
Codebook InitCodebook(const FeatureSequence& frames, int heads, int codewords,
                      uint64_t seed);

// Nearest codeword per head (exhaustive, ties toward the smallest index).
QuantResult Quantize(std::span<const double> vec, const Codebook& cb);
QuantResult Quantize(std::span<const float> vec, const Codebook& cb);

// Row-wise Quantize plus accumulated AssignStats for the whole batch.
BatchQuant QuantizeBatch(const FeatureSequence& frames, const Codebook& cb);

// EMA codebook update:
//   counts <- g*counts + (1-g)*batch_count
//   sums   <- g*sums   + (1-g)*batch_sum
//   table  <- sums / (Laplace-smoothed counts)
// Codewords with no batch assignments keep an unchanged sums/counts ratio.
// When `reseed_pool` and `rng` are given, a codeword whose smoothed count
// stays below 1e-3 for 10 consecutive updates is reseeded to a random pool
// frame's sub-vector.
void EmaUpdate(Codebook& cb, const AssignStats& stats, const EmaConfig& cfg,
               const FeatureSequence* reseed_pool = nullptr,
               std::mt19937_64* rng = nullptr);

// exp(entropy) of each head's normalized assignment histogram; in [1, K].
// Errors if a head has zero total count.
std::vector<double> Perplexity(const AssignStats& stats);

}  // namespace msmcr

#endif  // MSMCR_VQ_H_
