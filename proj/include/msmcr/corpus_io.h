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

#ifndef MSMCR_CORPUS_IO_H_
#define MSMCR_CORPUS_IO_H_

#include <string>
#include <vector>

#include "msmcr/msmc.h"
#include "msmcr/types.h"

namespace msmcr {

// One corpus entry. `path` is stored as written in the manifest; relative
// paths resolve against the manifest's own directory.
struct ManifestRow {
  std::string utterance_id;
  std::string path;
  std::string speaker_id;
  std::string language;
};

struct Manifest {
  std::vector<ManifestRow> rows;
  std::string base_dir;  // directory of the manifest file, for resolution

  std::string ResolvePath(const ManifestRow& row) const;
};

// UTF-8 TSV `utterance_id<TAB>path<TAB>speaker_id<TAB>language`; lines
// starting with '#' are comments. Duplicate ids are rejected by name.
Manifest ReadManifest(const std::string& path);
void WriteManifest(const Manifest& manifest, const std::string& path);

// RIFF/WAVE reader: PCM 16-bit or IEEE float 32-bit, mono. int16 samples
// are scaled by 1/32768.
Pcm ReadWav(const std::string& path);

// Binary feature container:
//   magic "MSMCFEAT", version u32=1, rows u32, cols u32,
//   fingerprint (u32 length + UTF-8 bytes),
//   rows*cols float32 little-endian, row-major.
// Writes are atomic (temp file + rename). Round trips are bit-exact.
void WriteFeatures(const std::string& path, const FeatureSequence& features,
                   const std::string& fingerprint);

struct FeatureFile {
  FeatureSequence features;
  std::string fingerprint;
};

FeatureFile ReadFeatures(const std::string& path);

// F0 tracks ride in the same container as a frames x 2 matrix (f0_hz,
// voiced flag).
void WriteF0(const std::string& path, const F0Track& track,
             const std::string& fingerprint);
F0Track ReadF0(const std::string& path, std::string* fingerprint = nullptr);

// Versioned JSON model file. Doubles are emitted as shortest round-trip
// decimals, so load(save(m)) behaves bit-identically to m.
void SaveModel(const MSMCModel& model, const std::string& path);
MSMCModel LoadModel(const std::string& path);

// Writes bytes to path atomically via a sibling temp file + rename.
void AtomicWriteFile(const std::string& path, const std::string& bytes);
std::string ReadFileBytes(const std::string& path);

}  // namespace msmcr

#endif  // MSMCR_CORPUS_IO_H_
