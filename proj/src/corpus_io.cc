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

#include "msmcr/corpus_io.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace msmcr {

namespace fs = std::filesystem;

namespace {

constexpr char kFeatureMagic[8] = {'M', 'S', 'M', 'C', 'F', 'E', 'A', 'T'};
constexpr uint32_t kFeatureVersion = 1;
constexpr int kModelVersion = 1;

void AppendU32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t ReadU32(const std::string& bytes, size_t& pos) {
  if (pos + 4 > bytes.size()) throw Error("truncated file");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  }
  pos += 4;
  return v;
}

uint16_t ReadU16(const std::string& bytes, size_t& pos) {
  if (pos + 2 > bytes.size()) throw Error("truncated file");
  uint16_t v = static_cast<uint16_t>(
      static_cast<unsigned char>(bytes[pos]) |
      (static_cast<unsigned char>(bytes[pos + 1]) << 8));
  pos += 2;
  return v;
}

std::vector<std::string> SplitTabs(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    const size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

nlohmann::json CodebookJson(const Codebook& cb, const StageConfig& sc) {
  nlohmann::json j;
  j["downsample_rate"] = sc.downsample_rate;
  j["heads"] = cb.heads;
  j["codewords"] = cb.codewords;
  j["sub_dim"] = cb.sub_dim;
  j["table"] = cb.table;
  j["ema_counts"] = cb.ema_counts;
  j["ema_sums"] = cb.ema_sums;
  j["dead_streak"] = cb.dead_streak;
  return j;
}

template <typename T>
std::vector<T> NumberArray(const nlohmann::json& j, const char* key,
                           size_t expected) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw Error(std::string("model file missing array field: ") + key);
  }
  std::vector<T> out = j[key].get<std::vector<T>>();
  if (out.size() != expected) {
    throw Error(std::string("model file field has wrong size: ") + key);
  }
  return out;
}

}  // namespace

std::string Manifest::ResolvePath(const ManifestRow& row) const {
  fs::path p(row.path);
  if (p.is_absolute() || base_dir.empty()) return row.path;
  return (fs::path(base_dir) / p).string();
}

Manifest ReadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest: " + path);
  Manifest m;
  m.base_dir = fs::path(path).parent_path().string();
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto fields = SplitTabs(line);
    if (fields.size() != 4) {
      throw Error("manifest line " + std::to_string(lineno) +
                  ": expected 4 tab-separated fields");
    }
    if (!seen.insert(fields[0]).second) {
      throw Error("duplicate utterance id in manifest: " + fields[0]);
    }
    m.rows.push_back({fields[0], fields[1], fields[2], fields[3]});
  }
  return m;
}

void WriteManifest(const Manifest& manifest, const std::string& path) {
  std::string out;
  for (const ManifestRow& r : manifest.rows) {
    out += r.utterance_id;
    out += '\t';
    out += r.path;
    out += '\t';
    out += r.speaker_id;
    out += '\t';
    out += r.language;
    out += '\n';
  }
  AtomicWriteFile(path, out);
}

Pcm ReadWav(const std::string& path) {
  const std::string bytes = ReadFileBytes(path);
  size_t pos = 0;
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 ||
      bytes.compare(8, 4, "WAVE") != 0) {
    throw Error("not a RIFF/WAVE file: " + path);
  }
  pos = 12;

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  bool have_fmt = false;
  size_t data_pos = 0, data_len = 0;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    pos += 4;
    const uint32_t chunk_len = ReadU32(bytes, pos);
    if (id == "fmt ") {
      size_t p = pos;
      format = ReadU16(bytes, p);
      channels = ReadU16(bytes, p);
      sample_rate = ReadU32(bytes, p);
      p += 6;  // byte rate + block align
      bits = ReadU16(bytes, p);
      have_fmt = true;
    } else if (id == "data") {
      data_pos = pos;
      data_len = chunk_len;
    }
    pos += chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }
  if (!have_fmt || data_pos == 0) throw Error("truncated WAV file: " + path);
  if (channels != 1) throw Error("only mono WAV input is supported");
  if (data_pos + data_len > bytes.size()) throw Error("truncated WAV data chunk");

  Pcm pcm;
  pcm.sample_rate = static_cast<int>(sample_rate);
  if (format == 1 && bits == 16) {
    const size_t count = data_len / 2;
    pcm.samples.resize(count);
    for (size_t i = 0; i < count; ++i) {
      const int16_t v = static_cast<int16_t>(
          static_cast<unsigned char>(bytes[data_pos + 2 * i]) |
          (static_cast<unsigned char>(bytes[data_pos + 2 * i + 1]) << 8));
      pcm.samples[i] = static_cast<float>(v) / 32768.0f;
    }
  } else if (format == 3 && bits == 32) {
    const size_t count = data_len / 4;
    pcm.samples.resize(count);
    for (size_t i = 0; i < count; ++i) {
      uint32_t u = 0;
      for (int b = 0; b < 4; ++b) {
        u |= static_cast<uint32_t>(
                 static_cast<unsigned char>(bytes[data_pos + 4 * i + b]))
             << (8 * b);
      }
      float f;
      std::memcpy(&f, &u, sizeof(f));
      if (!std::isfinite(f)) throw Error("non-finite sample in WAV file");
      pcm.samples[i] = f;
    }
  } else {
    throw Error("unsupported WAV codec (need PCM16 or float32 mono)");
  }
  return pcm;
}

void WriteFeatures(const std::string& path, const FeatureSequence& features,
                   const std::string& fingerprint) {
  std::string out;
  out.append(kFeatureMagic, sizeof(kFeatureMagic));
  AppendU32(out, kFeatureVersion);
  AppendU32(out, static_cast<uint32_t>(features.rows));
  AppendU32(out, static_cast<uint32_t>(features.cols));
  AppendU32(out, static_cast<uint32_t>(fingerprint.size()));
  out += fingerprint;
  for (float v : features.data) {
    uint32_t u;
    std::memcpy(&u, &v, sizeof(u));
    AppendU32(out, u);
  }
  AtomicWriteFile(path, out);
}

FeatureFile ReadFeatures(const std::string& path) {
  const std::string bytes = ReadFileBytes(path);
  if (bytes.size() < sizeof(kFeatureMagic) ||
      std::memcmp(bytes.data(), kFeatureMagic, sizeof(kFeatureMagic)) != 0) {
    throw Error("bad magic in feature file: " + path);
  }
  size_t pos = sizeof(kFeatureMagic);
  const uint32_t version = ReadU32(bytes, pos);
  if (version != kFeatureVersion) {
    throw Error("unsupported feature file version: " + std::to_string(version));
  }
  const uint32_t rows = ReadU32(bytes, pos);
  const uint32_t cols = ReadU32(bytes, pos);
  const uint32_t fp_len = ReadU32(bytes, pos);
  if (pos + fp_len > bytes.size()) throw Error("truncated file");
  FeatureFile f;
  f.fingerprint = bytes.substr(pos, fp_len);
  pos += fp_len;

  const size_t count = static_cast<size_t>(rows) * cols;
  const size_t avail = bytes.size() - pos;
  if (avail % 4 != 0 || avail / 4 != count) {
    throw Error("feature payload size inconsistent with header");
  }
  f.features = FeatureSequence(static_cast<int>(rows), static_cast<int>(cols));
  for (size_t i = 0; i < count; ++i) {
    const uint32_t u = ReadU32(bytes, pos);
    std::memcpy(&f.features.data[i], &u, sizeof(float));
  }
  return f;
}

void WriteF0(const std::string& path, const F0Track& track,
             const std::string& fingerprint) {
  FeatureSequence seq(track.frames(), 2);
  for (int t = 0; t < track.frames(); ++t) {
    seq.at(t, 0) = track.f0_hz[t];
    seq.at(t, 1) = track.voiced[t] ? 1.0f : 0.0f;
  }
  WriteFeatures(path, seq, fingerprint);
}

F0Track ReadF0(const std::string& path, std::string* fingerprint) {
  FeatureFile f = ReadFeatures(path);
  if (f.features.cols != 2) throw Error("F0 file must have 2 columns: " + path);
  F0Track track;
  track.f0_hz.resize(f.features.rows);
  track.voiced.resize(f.features.rows);
  for (int t = 0; t < f.features.rows; ++t) {
    track.f0_hz[t] = f.features.at(t, 0);
    track.voiced[t] = f.features.at(t, 1) != 0.0f ? 1 : 0;
  }
  if (fingerprint != nullptr) *fingerprint = f.fingerprint;
  return track;
}

void SaveModel(const MSMCModel& model, const std::string& path) {
  model.Validate();
  nlohmann::json j;
  j["format"] = "msmcr-model";
  j["version"] = kModelVersion;
  j["feature_dim"] = model.feature_dim;
  j["coupling_mode"] = CouplingModeName(model.coupling);
  j["loss_weights"] = {{"lambda_f", model.weights.lambda_f},
                       {"lambda_q", model.weights.lambda_q},
                       {"lambda_e", model.weights.lambda_e},
                       {"lambda_w", model.weights.lambda_w}};
  j["dsp_fingerprint"] = model.dsp_fingerprint;
  nlohmann::json stages = nlohmann::json::array();
  for (int s = 0; s < model.num_stages(); ++s) {
    stages.push_back(CodebookJson(model.codebooks[s], model.stage_configs[s]));
  }
  j["stages"] = std::move(stages);
  j["training"] = {{"iterations", model.meta.iterations},
                   {"corpus_hash", model.meta.corpus_hash},
                   {"seed", model.meta.seed}};
  AtomicWriteFile(path, j.dump(2) + "\n");
}

MSMCModel LoadModel(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ReadFileBytes(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("cannot parse model file: " + std::string(e.what()));
  }
  try {
    if (j.value("format", "") != "msmcr-model") {
      throw Error("not a model file: " + path);
    }
    if (j.value("version", -1) != kModelVersion) {
      throw Error("unsupported model version");
    }
    MSMCModel m;
    m.feature_dim = j.at("feature_dim").get<int>();
    m.coupling = CouplingModeFromName(j.at("coupling_mode").get<std::string>());
    const auto& w = j.at("loss_weights");
    m.weights.lambda_f = w.at("lambda_f").get<double>();
    m.weights.lambda_q = w.at("lambda_q").get<double>();
    m.weights.lambda_e = w.at("lambda_e").get<double>();
    m.weights.lambda_w = w.at("lambda_w").get<double>();
    m.dsp_fingerprint = j.at("dsp_fingerprint").get<std::string>();
    for (const auto& js : j.at("stages")) {
      StageConfig sc;
      sc.downsample_rate = js.at("downsample_rate").get<int>();
      sc.heads = js.at("heads").get<int>();
      sc.codewords = js.at("codewords").get<int>();
      Codebook cb;
      cb.heads = sc.heads;
      cb.codewords = sc.codewords;
      cb.sub_dim = js.at("sub_dim").get<int>();
      const size_t cells = static_cast<size_t>(cb.heads) * cb.codewords;
      cb.table = NumberArray<double>(js, "table", cells * cb.sub_dim);
      cb.ema_counts = NumberArray<double>(js, "ema_counts", cells);
      cb.ema_sums = NumberArray<double>(js, "ema_sums", cells * cb.sub_dim);
      cb.dead_streak = NumberArray<int>(js, "dead_streak", cells);
      m.stage_configs.push_back(sc);
      m.codebooks.push_back(std::move(cb));
    }
    const auto& t = j.at("training");
    m.meta.iterations = t.at("iterations").get<long long>();
    m.meta.corpus_hash = t.at("corpus_hash").get<std::string>();
    m.meta.seed = t.at("seed").get<uint64_t>();
    m.Validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed model file: " + std::string(e.what()));
  }
}

void AtomicWriteFile(const std::string& path, const std::string& bytes) {
  const fs::path target(path);
  if (!target.parent_path().empty()) {
    fs::create_directories(target.parent_path());
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write file: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + path);
  }
  fs::rename(tmp, target);
}

std::string ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace msmcr
