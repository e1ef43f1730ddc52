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

#ifndef MSMCR_TYPES_H_
#define MSMCR_TYPES_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace msmcr {

// Thrown for all data-level failures (bad files, dimension mismatches,
// violated preconditions). The CLI maps it to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Time-major matrix of frames: Mel spectrograms, latent sequences and
// quantized sequences all use this one container. Row-major float32,
// matching the on-disk feature format.
struct FeatureSequence {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;  // rows * cols, row-major

  FeatureSequence() = default;
  FeatureSequence(int r, int c)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0f) {}

  float* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const float* row(int r) const {
    return data.data() + static_cast<size_t>(r) * cols;
  }
  float& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  float at(int r, int c) const {
    return data[static_cast<size_t>(r) * cols + c];
  }
  bool empty() const { return rows == 0; }
};

// Mono audio, samples in [-1, 1].
struct Pcm {
  std::vector<float> samples;
  int sample_rate = 0;
};

// Per-frame pitch track at the feature frame rate. voiced[t] == 0 implies
// f0_hz[t] == 0; voiced frames carry f0 in [50, 600] Hz.
struct F0Track {
  std::vector<float> f0_hz;
  std::vector<uint8_t> voiced;

  int frames() const { return static_cast<int>(f0_hz.size()); }
};

// FNV-1a, used for corpus content hashes and determinism checks.
inline uint64_t Fnv1a64(const void* data, size_t n,
                        uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t Fnv1a64(const std::string& s,
                        uint64_t h = 1469598103934665603ull) {
  return Fnv1a64(s.data(), s.size(), h);
}

}  // namespace msmcr

#endif  // MSMCR_TYPES_H_
