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

#include "msmcr/vq.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace msmcr {

namespace {

constexpr double kDeadCountThreshold = 1e-3;
constexpr int kDeadRounds = 10;

// Hand-rolled draws so results do not depend on the standard library's
// distribution implementations.
double UniformUnit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

size_t UniformIndex(std::mt19937_64& rng, size_t n) {
  const size_t i = static_cast<size_t>(UniformUnit(rng) * static_cast<double>(n));
  return std::min(i, n - 1);
}

double SubDistSq(const float* frame, int offset, const double* codeword,
                 int sub_dim) {
  double d = 0.0;
  for (int j = 0; j < sub_dim; ++j) {
    const double diff = static_cast<double>(frame[offset + j]) - codeword[j];
    d += diff * diff;
  }
  return d;
}

}  // namespace

void AssignStats::Merge(const AssignStats& other) {
  if (heads != other.heads || codewords != other.codewords ||
      sub_dim != other.sub_dim) {
    throw Error("assign stats shape mismatch");
  }
  for (size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  for (size_t i = 0; i < sums.size(); ++i) sums[i] += other.sums[i];
}

Codebook InitCodebook(const FeatureSequence& frames, int heads, int codewords,
                      uint64_t seed) {
  if (heads <= 0 || codewords <= 0) throw Error("invalid codebook shape");
  if (frames.cols % heads != 0) {
    throw Error("feature dim not divisible by head count");
  }
  if (frames.rows < codewords) {
    throw Error("insufficient data for initialization");
  }

  const int sub_dim = frames.cols / heads;
  Codebook cb;
  cb.heads = heads;
  cb.codewords = codewords;
  cb.sub_dim = sub_dim;
  cb.table.assign(static_cast<size_t>(heads) * codewords * sub_dim, 0.0);
  cb.ema_counts.assign(static_cast<size_t>(heads) * codewords, 1.0);
  cb.ema_sums.assign(cb.table.size(), 0.0);
  cb.dead_streak.assign(cb.ema_counts.size(), 0);

  std::mt19937_64 rng(seed);
  const size_t n = static_cast<size_t>(frames.rows);
  std::vector<double> min_dist(n);
  for (int h = 0; h < heads; ++h) {
    const int offset = h * sub_dim;

    // k-means++ seeding over this head's sub-vectors.
    size_t first = UniformIndex(rng, n);
    double* cw0 = cb.Codeword(h, 0);
    for (int j = 0; j < sub_dim; ++j) {
      cw0[j] = frames.row(static_cast<int>(first))[offset + j];
    }
    for (size_t i = 0; i < n; ++i) {
      min_dist[i] = SubDistSq(frames.row(static_cast<int>(i)), offset, cw0,
                              sub_dim);
    }

    for (int k = 1; k < codewords; ++k) {
      double total = 0.0;
      for (size_t i = 0; i < n; ++i) total += min_dist[i];
      size_t pick;
      if (total <= 0.0) {
        // All remaining sub-vectors coincide with chosen codewords.
        pick = UniformIndex(rng, n);
      } else {
        const double target = UniformUnit(rng) * total;
        double cum = 0.0;
        pick = n - 1;
        for (size_t i = 0; i < n; ++i) {
          cum += min_dist[i];
          if (cum >= target) {
            pick = i;
            break;
          }
        }
      }
      double* cw = cb.Codeword(h, k);
      for (int j = 0; j < sub_dim; ++j) {
        cw[j] = frames.row(static_cast<int>(pick))[offset + j];
      }
      for (size_t i = 0; i < n; ++i) {
        const double d = SubDistSq(frames.row(static_cast<int>(i)), offset,
                                   cw, sub_dim);
        min_dist[i] = std::min(min_dist[i], d);
      }
    }
  }
  // counts start at 1 and sums at the codewords: table == sums / count.
  cb.ema_sums = cb.table;
  return cb;
}

QuantResult Quantize(std::span<const double> vec, const Codebook& cb) {
  if (static_cast<int>(vec.size()) != cb.dim()) {
    throw Error("vector dimension does not match codebook");
  }
  QuantResult res;
  res.indices.resize(cb.heads);
  res.quantized.resize(vec.size());
  for (int h = 0; h < cb.heads; ++h) {
    const int offset = h * cb.sub_dim;
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < cb.codewords; ++k) {
      const double* cw = cb.Codeword(h, k);
      double d = 0.0;
      for (int j = 0; j < cb.sub_dim; ++j) {
        const double diff = vec[offset + j] - cw[j];
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    res.indices[h] = best;
    res.sq_error += best_d;
    const double* cw = cb.Codeword(h, best);
    std::copy(cw, cw + cb.sub_dim, res.quantized.begin() + offset);
  }
  return res;
}

QuantResult Quantize(std::span<const float> vec, const Codebook& cb) {
  std::vector<double> v(vec.begin(), vec.end());
  return Quantize(std::span<const double>(v), cb);
}

BatchQuant QuantizeBatch(const FeatureSequence& frames, const Codebook& cb) {
  BatchQuant out;
  out.stats = AssignStats(cb.heads, cb.codewords, cb.sub_dim);
  out.results.reserve(frames.rows);
  for (int t = 0; t < frames.rows; ++t) {
    QuantResult r = Quantize(
        std::span<const float>(frames.row(t), static_cast<size_t>(frames.cols)),
        cb);
    for (int h = 0; h < cb.heads; ++h) {
      const size_t cell = static_cast<size_t>(h) * cb.codewords + r.indices[h];
      out.stats.counts[cell] += 1.0;
      double* sum = out.stats.sums.data() + cell * cb.sub_dim;
      const float* frame = frames.row(t);
      for (int j = 0; j < cb.sub_dim; ++j) {
        sum[j] += static_cast<double>(frame[h * cb.sub_dim + j]);
      }
    }
    out.results.push_back(std::move(r));
  }
  return out;
}

void EmaUpdate(Codebook& cb, const AssignStats& stats, const EmaConfig& cfg,
               const FeatureSequence* reseed_pool, std::mt19937_64* rng) {
  if (stats.heads != cb.heads || stats.codewords != cb.codewords ||
      stats.sub_dim != cb.sub_dim) {
    throw Error("assign stats shape does not match codebook");
  }
  if (!(cfg.decay > 0.0 && cfg.decay < 1.0) || !(cfg.laplace_eps > 0.0)) {
    throw Error("invalid EMA config");
  }
  const double g = cfg.decay;
  for (size_t i = 0; i < cb.ema_counts.size(); ++i) {
    cb.ema_counts[i] = g * cb.ema_counts[i] + (1.0 - g) * stats.counts[i];
  }
  for (size_t i = 0; i < cb.ema_sums.size(); ++i) {
    cb.ema_sums[i] = g * cb.ema_sums[i] + (1.0 - g) * stats.sums[i];
  }

  for (int h = 0; h < cb.heads; ++h) {
    double head_total = 0.0;
    for (int k = 0; k < cb.codewords; ++k) {
      head_total += cb.ema_counts[static_cast<size_t>(h) * cb.codewords + k];
    }
    if (head_total <= 0.0) continue;
    for (int k = 0; k < cb.codewords; ++k) {
      const size_t cell = static_cast<size_t>(h) * cb.codewords + k;
      const double smoothed =
          (cb.ema_counts[cell] + cfg.laplace_eps) /
          (head_total + cb.codewords * cfg.laplace_eps) * head_total;

      if (smoothed < kDeadCountThreshold) {
        cb.dead_streak[cell] += 1;
      } else {
        cb.dead_streak[cell] = 0;
      }
      if (cb.dead_streak[cell] >= kDeadRounds && reseed_pool != nullptr &&
          rng != nullptr && reseed_pool->rows > 0 &&
          reseed_pool->cols == cb.dim()) {
        const size_t pick =
            UniformIndex(*rng, static_cast<size_t>(reseed_pool->rows));
        const float* frame = reseed_pool->row(static_cast<int>(pick));
        cb.ema_counts[cell] = 1.0;
        double* sum = cb.ema_sums.data() + cell * cb.sub_dim;
        for (int j = 0; j < cb.sub_dim; ++j) {
          sum[j] = static_cast<double>(frame[h * cb.sub_dim + j]);
        }
        cb.dead_streak[cell] = 0;
        // Table entry falls out of the sums/smoothed-count division below
        // on the next pass; recompute the head total first.
        head_total = 0.0;
        for (int k2 = 0; k2 < cb.codewords; ++k2) {
          head_total += cb.ema_counts[static_cast<size_t>(h) * cb.codewords + k2];
        }
      }
    }
    for (int k = 0; k < cb.codewords; ++k) {
      const size_t cell = static_cast<size_t>(h) * cb.codewords + k;
      const double smoothed =
          (cb.ema_counts[cell] + cfg.laplace_eps) /
          (head_total + cb.codewords * cfg.laplace_eps) * head_total;
      double* cw = cb.table.data() + cell * cb.sub_dim;
      const double* sum = cb.ema_sums.data() + cell * cb.sub_dim;
      for (int j = 0; j < cb.sub_dim; ++j) cw[j] = sum[j] / smoothed;
    }
  }
}

std::vector<double> Perplexity(const AssignStats& stats) {
  std::vector<double> out(stats.heads, 0.0);
  for (int h = 0; h < stats.heads; ++h) {
    double total = 0.0;
    for (int k = 0; k < stats.codewords; ++k) {
      total += stats.counts[static_cast<size_t>(h) * stats.codewords + k];
    }
    if (total <= 0.0) throw Error("perplexity of empty assignment histogram");
    double entropy = 0.0;
    for (int k = 0; k < stats.codewords; ++k) {
      const double c = stats.counts[static_cast<size_t>(h) * stats.codewords + k];
      if (c <= 0.0) continue;
      const double p = c / total;
      entropy -= p * std::log(p);
    }
    out[h] = std::exp(entropy);
  }
  return out;
}

}  // namespace msmcr
