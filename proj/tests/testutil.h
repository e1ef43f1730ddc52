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
//
// Shared helpers for the test binaries: scratch directories, WAV fixtures,
// deterministic random data.

#ifndef MSMCR_TESTS_TESTUTIL_H_
#define MSMCR_TESTS_TESTUTIL_H_

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "msmcr/types.h"

namespace msmcr {
namespace test {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("msmcr_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string Sub(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

inline double UniformUnit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

inline double Gaussian(std::mt19937_64& rng) {
  double u1 = UniformUnit(rng);
  while (u1 <= 0.0) u1 = UniformUnit(rng);
  const double u2 = UniformUnit(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

inline FeatureSequence RandomFeatures(std::mt19937_64& rng, int rows, int cols,
                                      double scale = 1.0) {
  FeatureSequence f(rows, cols);
  for (float& v : f.data) v = static_cast<float>(scale * Gaussian(rng));
  return f;
}

inline Pcm Sine(double freq_hz, int sample_rate, double seconds,
                double amplitude) {
  Pcm pcm;
  pcm.sample_rate = sample_rate;
  const int n = static_cast<int>(sample_rate * seconds);
  pcm.samples.resize(n);
  for (int i = 0; i < n; ++i) {
    pcm.samples[i] = static_cast<float>(
        amplitude *
        std::sin(2.0 * 3.14159265358979323846 * freq_hz * i / sample_rate));
  }
  return pcm;
}

inline Pcm WhiteNoise(int sample_rate, double seconds, double amplitude,
                      uint64_t seed) {
  std::mt19937_64 rng(seed);
  Pcm pcm;
  pcm.sample_rate = sample_rate;
  const int n = static_cast<int>(sample_rate * seconds);
  pcm.samples.resize(n);
  for (int i = 0; i < n; ++i) {
    pcm.samples[i] =
        static_cast<float>(amplitude * (2.0 * UniformUnit(rng) - 1.0));
  }
  return pcm;
}

inline void AppendU32Le(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

inline void AppendU16Le(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

// Minimal PCM16 mono WAV encoder for fixtures.
inline std::string WavBytesPcm16(const std::vector<int16_t>& samples,
                                 int sample_rate) {
  std::string data;
  for (int16_t s : samples) {
    AppendU16Le(data, static_cast<uint16_t>(s));
  }
  std::string out;
  out += "RIFF";
  AppendU32Le(out, static_cast<uint32_t>(36 + data.size()));
  out += "WAVEfmt ";
  AppendU32Le(out, 16);
  AppendU16Le(out, 1);  // PCM
  AppendU16Le(out, 1);  // mono
  AppendU32Le(out, static_cast<uint32_t>(sample_rate));
  AppendU32Le(out, static_cast<uint32_t>(sample_rate * 2));
  AppendU16Le(out, 2);
  AppendU16Le(out, 16);
  out += "data";
  AppendU32Le(out, static_cast<uint32_t>(data.size()));
  out += data;
  return out;
}

inline void WriteFile(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline uint64_t HashFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return Fnv1a64(bytes.data(), bytes.size());
}

}  // namespace test
}  // namespace msmcr

#endif  // MSMCR_TESTS_TESTUTIL_H_
