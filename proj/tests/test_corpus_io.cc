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

#include "doctest.h"
#include "testutil.h"

using namespace msmcr;

namespace {

MSMCModel SmallModel(uint64_t seed) {
  std::mt19937_64 rng(seed);
  MSMCModel model;
  model.feature_dim = 8;
  model.coupling = CouplingMode::kResidual;
  model.dsp_fingerprint = "test:v1";
  model.stage_configs = {{1, 2, 4}, {4, 2, 4}};
  for (int s = 0; s < 2; ++s) {
    Codebook cb;
    cb.heads = 2;
    cb.codewords = 4;
    cb.sub_dim = 4;
    cb.table.resize(32);
    for (double& v : cb.table) v = test::Gaussian(rng);
    cb.ema_counts.assign(8, 1.0);
    cb.ema_sums = cb.table;
    cb.dead_streak.assign(8, 0);
    model.codebooks.push_back(std::move(cb));
  }
  return model;
}

}  // namespace

TEST_CASE("wav: all-zero PCM16 decodes to zero samples") {
  test::TempDir tmp;
  test::WriteFile(tmp.Sub("z.wav"),
                  test::WavBytesPcm16(std::vector<int16_t>(100, 0), 24000));
  const Pcm pcm = ReadWav(tmp.Sub("z.wav"));
  CHECK(pcm.sample_rate == 24000);
  REQUIRE(pcm.samples.size() == 100);
  for (float s : pcm.samples) CHECK(s == 0.0f);
}

TEST_CASE("wav: int16 extremes scale exactly") {
  test::TempDir tmp;
  test::WriteFile(tmp.Sub("x.wav"),
                  test::WavBytesPcm16({-32768, 32767, 16384, 0}, 48000));
  const Pcm pcm = ReadWav(tmp.Sub("x.wav"));
  CHECK(pcm.samples[0] == -1.0f);
  CHECK(pcm.samples[1] == doctest::Approx(32767.0 / 32768.0).epsilon(1e-9));
  CHECK(pcm.samples[2] == 0.5f);
  CHECK(pcm.samples[3] == 0.0f);
}

TEST_CASE("wav: known 10-sample fixture decodes exactly") {
  test::TempDir tmp;
  std::vector<int16_t> samples;
  for (int i = 0; i < 10; ++i) samples.push_back(static_cast<int16_t>(i * 1000));
  test::WriteFile(tmp.Sub("f.wav"), test::WavBytesPcm16(samples, 24000));
  const Pcm pcm = ReadWav(tmp.Sub("f.wav"));
  REQUIRE(pcm.samples.size() == 10);
  for (int i = 0; i < 10; ++i) {
    CHECK(pcm.samples[i] == static_cast<float>(i * 1000) / 32768.0f);
  }
}

TEST_CASE("wav: malformed inputs produce structured errors") {
  test::TempDir tmp;
  test::WriteFile(tmp.Sub("junk.wav"), "this is not audio");
  CHECK_THROWS_AS(ReadWav(tmp.Sub("junk.wav")), Error);

  // Stereo header.
  std::string wav = test::WavBytesPcm16({0, 0, 0, 0}, 24000);
  wav[22] = 2;  // channel count
  test::WriteFile(tmp.Sub("stereo.wav"), wav);
  CHECK_THROWS_AS(ReadWav(tmp.Sub("stereo.wav")), Error);

  // Unsupported codec id.
  wav = test::WavBytesPcm16({0, 0}, 24000);
  wav[20] = 7;  // mu-law
  test::WriteFile(tmp.Sub("mulaw.wav"), wav);
  CHECK_THROWS_AS(ReadWav(tmp.Sub("mulaw.wav")), Error);

  CHECK_THROWS_AS(ReadWav(tmp.Sub("missing.wav")), Error);
}

TEST_CASE("features: empty sequence round-trips") {
  test::TempDir tmp;
  const FeatureSequence empty(0, 80);
  WriteFeatures(tmp.Sub("e.feat"), empty, "fp:v1");
  const FeatureFile f = ReadFeatures(tmp.Sub("e.feat"));
  CHECK(f.features.rows == 0);
  CHECK(f.features.cols == 80);
  CHECK(f.fingerprint == "fp:v1");
}

TEST_CASE("features: random matrix round-trips bit-exactly") {
  test::TempDir tmp;
  std::mt19937_64 rng(1);
  const FeatureSequence x = test::RandomFeatures(rng, 33, 80);
  WriteFeatures(tmp.Sub("x.feat"), x, "fp:v2");
  const FeatureFile f = ReadFeatures(tmp.Sub("x.feat"));
  CHECK(f.features.rows == 33);
  CHECK(f.features.cols == 80);
  CHECK(f.features.data == x.data);
  CHECK(f.fingerprint == "fp:v2");
}

TEST_CASE("features: corrupted magic and truncation are rejected") {
  test::TempDir tmp;
  std::mt19937_64 rng(2);
  const FeatureSequence x = test::RandomFeatures(rng, 3, 4);
  WriteFeatures(tmp.Sub("x.feat"), x, "fp");
  std::string bytes = ReadFileBytes(tmp.Sub("x.feat"));

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  test::WriteFile(tmp.Sub("bad.feat"), bad_magic);
  CHECK_THROWS_WITH_AS(ReadFeatures(tmp.Sub("bad.feat")),
                       ("bad magic in feature file: " + tmp.Sub("bad.feat")).c_str(),
                       Error);

  test::WriteFile(tmp.Sub("trunc.feat"), bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(ReadFeatures(tmp.Sub("trunc.feat")), Error);

  std::string bad_version = bytes;
  bad_version[8] = 9;
  test::WriteFile(tmp.Sub("v9.feat"), bad_version);
  CHECK_THROWS_AS(ReadFeatures(tmp.Sub("v9.feat")), Error);
}

TEST_CASE("f0 tracks ride the feature container") {
  test::TempDir tmp;
  F0Track t;
  t.f0_hz = {100.0f, 0.0f, 250.5f};
  t.voiced = {1, 0, 1};
  WriteF0(tmp.Sub("t.f0.feat"), t, "fp");
  const F0Track back = ReadF0(tmp.Sub("t.f0.feat"));
  CHECK(back.f0_hz == t.f0_hz);
  CHECK(back.voiced == t.voiced);
}

TEST_CASE("model: behavioral round trip on seeded inputs") {
  test::TempDir tmp;
  const MSMCModel model = SmallModel(3);
  SaveModel(model, tmp.Sub("m.json"));
  const MSMCModel loaded = LoadModel(tmp.Sub("m.json"));

  std::mt19937_64 rng(4);
  for (int i = 0; i < 5; ++i) {
    const FeatureSequence mel = test::RandomFeatures(rng, 11 + i, 8);
    const MSMCR a = Encode(mel, model);
    const MSMCR b = Encode(mel, loaded);
    REQUIRE(a.stages.size() == b.stages.size());
    for (size_t s = 0; s < a.stages.size(); ++s) {
      CHECK(a.stages[s].indices == b.stages[s].indices);
      CHECK(a.stages[s].quantized.data == b.stages[s].quantized.data);
    }
    CHECK(Decode(a, model).data == Decode(b, loaded).data);
  }
}

TEST_CASE("model: metadata and EMA state are preserved") {
  test::TempDir tmp;
  MSMCModel model = SmallModel(5);
  model.meta.iterations = 0;
  model.meta.corpus_hash = "fnv1a:cafe";
  model.meta.seed = 99;
  model.codebooks[0].ema_counts[3] = 0.125;
  model.codebooks[0].dead_streak[3] = 7;
  SaveModel(model, tmp.Sub("m.json"));
  const MSMCModel loaded = LoadModel(tmp.Sub("m.json"));
  CHECK(loaded.meta.iterations == 0);
  CHECK(loaded.meta.corpus_hash == "fnv1a:cafe");
  CHECK(loaded.meta.seed == 99);
  CHECK(loaded.codebooks[0].ema_counts == model.codebooks[0].ema_counts);
  CHECK(loaded.codebooks[0].ema_sums == model.codebooks[0].ema_sums);
  CHECK(loaded.codebooks[0].dead_streak == model.codebooks[0].dead_streak);
  CHECK(loaded.weights.lambda_f == model.weights.lambda_f);
  CHECK(loaded.coupling == model.coupling);
}

TEST_CASE("model: hand-edited dimension inconsistency fails to load") {
  test::TempDir tmp;
  const MSMCModel model = SmallModel(6);
  SaveModel(model, tmp.Sub("m.json"));
  std::string text = ReadFileBytes(tmp.Sub("m.json"));
  const std::string needle = "\"feature_dim\": 8";
  const size_t pos = text.find(needle);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, needle.size(), "\"feature_dim\": 12");
  test::WriteFile(tmp.Sub("bad.json"), text);
  CHECK_THROWS_AS(LoadModel(tmp.Sub("bad.json")), Error);

  test::WriteFile(tmp.Sub("notjson.json"), "{nope");
  CHECK_THROWS_AS(LoadModel(tmp.Sub("notjson.json")), Error);
}

TEST_CASE("manifest: comments, blanks, and relative path resolution") {
  test::TempDir tmp;
  test::WriteFile(tmp.Sub("m.tsv"),
                  "# corpus\n"
                  "\n"
                  "u1\tfeats/u1.feat\tspk\tl1\n"
                  "u2\t/abs/u2.feat\tspk\tl1\n");
  const Manifest m = ReadManifest(tmp.Sub("m.tsv"));
  REQUIRE(m.rows.size() == 2);
  CHECK(m.ResolvePath(m.rows[0]) == tmp.Sub("feats/u1.feat"));
  CHECK(m.ResolvePath(m.rows[1]) == "/abs/u2.feat");
}

TEST_CASE("manifest: duplicate ids are rejected by name") {
  test::TempDir tmp;
  test::WriteFile(tmp.Sub("d.tsv"),
                  "u1\ta.feat\tspk\tl1\nu1\tb.feat\tspk\tl1\n");
  CHECK_THROWS_WITH_AS(ReadManifest(tmp.Sub("d.tsv")),
                       "duplicate utterance id in manifest: u1", Error);

  test::WriteFile(tmp.Sub("short.tsv"), "u1\ta.feat\tspk\n");
  CHECK_THROWS_AS(ReadManifest(tmp.Sub("short.tsv")), Error);
}

TEST_CASE("manifest round trip preserves rows") {
  test::TempDir tmp;
  Manifest m;
  m.rows = {{"a", "x.feat", "s1", "l1"}, {"b", "y.feat", "s2", "l2"}};
  WriteManifest(m, tmp.Sub("out.tsv"));
  const Manifest back = ReadManifest(tmp.Sub("out.tsv"));
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[0].utterance_id == "a");
  CHECK(back.rows[1].language == "l2");
}
