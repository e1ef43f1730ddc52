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
// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
// the process exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "msmcr/corpus_io.h"
#include "msmcr/dsp.h"
#include "msmcr/metrics.h"
#include "msmcr/msmc.h"
#include "msmcr/selection.h"
#include "msmcr/synth.h"
#include "msmcr/trainer.h"
#include "testutil.h"

using namespace msmcr;

namespace {

int g_failures = 0;

void RunCriterion(int number, const std::string& name,
                  const std::function<void()>& body) {
  const auto start = std::chrono::steady_clock::now();
  std::string failure;
  try {
    body();
  } catch (const std::exception& e) {
    failure = e.what();
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  if (failure.empty()) {
    std::printf("criterion %2d (%s): PASS (%.2f s)\n", number, name.c_str(),
                seconds);
  } else {
    std::printf("criterion %2d (%s): FAIL (%.2f s) -- %s\n", number,
                name.c_str(), seconds, failure.c_str());
    ++g_failures;
  }
}

void Require(bool cond, const std::string& what) {
  if (!cond) throw std::runtime_error(what);
}

// ---------------------------------------------------------------------------
// Criterion 1: quantizer vs exhaustive product-set search.

void QuantizerOracle() {
  std::mt19937_64 rng(1001);
  Codebook cb;
  cb.heads = 2;
  cb.codewords = 8;
  cb.sub_dim = 4;
  cb.table.resize(64);
  for (double& v : cb.table) v = test::Gaussian(rng);
  cb.ema_counts.assign(16, 1.0);
  cb.ema_sums = cb.table;
  cb.dead_streak.assign(16, 0);

  for (int i = 0; i < 1000; ++i) {
    std::vector<double> vec(8);
    for (double& v : vec) v = test::Gaussian(rng);
    const QuantResult got = Quantize(std::span<const double>(vec), cb);

    // Exhaustive search over all 64 concatenated codeword pairs.
    double best = 1e300;
    int best_a = -1, best_b = -1;
    for (int a = 0; a < 8; ++a) {
      for (int b = 0; b < 8; ++b) {
        double dist = 0.0;
        for (int j = 0; j < 4; ++j) {
          const double d0 = vec[j] - cb.Codeword(0, a)[j];
          const double d1 = vec[4 + j] - cb.Codeword(1, b)[j];
          dist += d0 * d0 + d1 * d1;
        }
        if (dist < best) {
          best = dist;
          best_a = a;
          best_b = b;
        }
      }
    }
    Require(got.indices[0] == best_a && got.indices[1] == best_b,
            "index mismatch vs product-set search at vector " +
                std::to_string(i));
    Require(std::abs(got.sq_error - best) <= 1e-12 * (1.0 + best),
            "error mismatch vs product-set search");
  }
}

// ---------------------------------------------------------------------------
// Criterion 2: EMA training on a seeded 64-cluster set.

void EmaConvergence() {
  std::mt19937_64 rng(1);
  const int d = 8;
  const double sigma = 0.25;
  std::vector<std::vector<double>> means(64, std::vector<double>(d));
  for (int k = 0; k < 64; ++k) {
    for (int j = 0; j < d; ++j) {
      means[k][j] =
          (((k >> (j % 6)) & 1) ? 1.25 : -1.25) + (j == 7 ? 0.05 * k : 0.0);
    }
  }
  FeatureSequence frames(6400, d);
  for (int t = 0; t < 6400; ++t) {
    const auto& m = means[t % 64];
    for (int j = 0; j < d; ++j) {
      frames.at(t, j) = static_cast<float>(m[j] + sigma * test::Gaussian(rng));
    }
  }
  Codebook cb = InitCodebook(frames, 1, 64, 1017);
  const EmaConfig cfg;
  for (int it = 0; it < 200; ++it) {
    EmaUpdate(cb, QuantizeBatch(frames, cb).stats, cfg);
  }
  const BatchQuant bq = QuantizeBatch(frames, cb);
  double l_q = 0.0;
  for (const QuantResult& r : bq.results) l_q += r.sq_error;
  l_q /= 6400.0 * d;
  const double ppl = Perplexity(bq.stats)[0];

  Require(l_q <= 2.0 * sigma * sigma,
          "mean l_q " + std::to_string(l_q) + " above 2x planted variance " +
              std::to_string(2.0 * sigma * sigma));
  Require(ppl >= 57.6, "perplexity " + std::to_string(ppl) + " below 57.6");
}

// ---------------------------------------------------------------------------
// Criterion 3: loss terms vs independent brute-force recomputation.

Codebook RandomCodebook(int heads, int codewords, int sub_dim,
                        std::mt19937_64& rng) {
  Codebook cb;
  cb.heads = heads;
  cb.codewords = codewords;
  cb.sub_dim = sub_dim;
  cb.table.resize(static_cast<size_t>(heads) * codewords * sub_dim);
  for (double& v : cb.table) v = test::Gaussian(rng);
  cb.ema_counts.assign(static_cast<size_t>(heads) * codewords, 1.0);
  cb.ema_sums = cb.table;
  cb.dead_streak.assign(cb.ema_counts.size(), 0);
  return cb;
}

void LossConsistency() {
  std::mt19937_64 rng(3003);
  MSMCModel model;
  model.feature_dim = 8;
  model.coupling = CouplingMode::kDirect;
  model.dsp_fingerprint = "accept:v1";
  model.stage_configs = {{1, 2, 6}, {4, 2, 6}};
  model.codebooks.push_back(RandomCodebook(2, 6, 4, rng));
  model.codebooks.push_back(RandomCodebook(2, 6, 4, rng));

  auto rel_close = [](double a, double b) {
    return std::abs(a - b) <= 1e-9 * (1.0 + std::max(std::abs(a), std::abs(b)));
  };

  for (int trial = 0; trial < 50; ++trial) {
    const int T = 5 + static_cast<int>(test::UniformUnit(rng) * 28);
    const FeatureSequence mel = test::RandomFeatures(rng, T, 8);
    const LossReport got = ComputeLosses(mel, model);

    // Brute force, written straight from the stage recurrence.
    const int T2 = (T + 3) / 4;
    FeatureSequence h2(T2, 8);
    for (int o = 0; o < T2; ++o) {
      const int lo = o * 4, hi = std::min(lo + 4, T);
      for (int c = 0; c < 8; ++c) {
        double acc = 0.0;
        for (int t = lo; t < hi; ++t) acc += mel.at(t, c);
        h2.at(o, c) = static_cast<float>(acc / (hi - lo));
      }
    }
    auto quantize_rows = [&](const FeatureSequence& x, const Codebook& cb,
                             FeatureSequence* z) {
      double err = 0.0;
      *z = FeatureSequence(x.rows, x.cols);
      for (int t = 0; t < x.rows; ++t) {
        for (int h = 0; h < cb.heads; ++h) {
          int best = 0;
          double best_d = 1e300;
          for (int k = 0; k < cb.codewords; ++k) {
            double dist = 0.0;
            for (int j = 0; j < cb.sub_dim; ++j) {
              const double diff =
                  x.at(t, h * cb.sub_dim + j) - cb.Codeword(h, k)[j];
              dist += diff * diff;
            }
            if (dist < best_d) {
              best_d = dist;
              best = k;
            }
          }
          err += best_d;
          for (int j = 0; j < cb.sub_dim; ++j) {
            z->at(t, h * cb.sub_dim + j) =
                static_cast<float>(cb.Codeword(h, best)[j]);
          }
        }
      }
      return err;
    };
    FeatureSequence z2, z1;
    const double err2 = quantize_rows(h2, model.codebooks[1], &z2);
    const double err1 = quantize_rows(mel, model.codebooks[0], &z1);
    FeatureSequence zhat1(T, 8);
    for (int t = 0; t < T; ++t) {
      for (int c = 0; c < 8; ++c) zhat1.at(t, c) = z2.at(t / 4, c);
    }
    auto mse = [](const FeatureSequence& a, const FeatureSequence& b) {
      double acc = 0.0;
      for (size_t i = 0; i < a.data.size(); ++i) {
        const double diff = static_cast<double>(a.data[i]) - b.data[i];
        acc += diff * diff;
      }
      return acc / static_cast<double>(a.data.size());
    };
    const double want_lf = mse(mel, z1);
    const double want_lq1 = err1 / (static_cast<double>(T) * 8);
    const double want_lq2 = err2 / (static_cast<double>(T2) * 8);
    const double want_le = mse(z1, zhat1);

    Require(rel_close(got.l_f, want_lf), "l_f mismatch");
    Require(rel_close(got.l_q_stage[0], want_lq1), "stage-1 l_q mismatch");
    Require(rel_close(got.l_q_stage[1], want_lq2), "stage-2 l_q mismatch");
    Require(rel_close(got.l_e, want_le), "l_e mismatch");
    Require(rel_close(got.weighted_total, got.l_f + got.l_q + got.l_e),
            "weighted total mismatch");
  }
}

// ---------------------------------------------------------------------------
// Criterion 4: shape law plus exact round trip under perfect codebooks.

void ShapeLawAndPerfectRoundTrip() {
  std::mt19937_64 rng(4004);
  MSMCModel model;
  model.feature_dim = 80;
  model.coupling = CouplingMode::kDirect;
  model.dsp_fingerprint = "accept:v1";
  model.stage_configs = {{1, 4, 64}, {4, 4, 64}};
  Codebook stage1 = RandomCodebook(4, 64, 20, rng);
  // float-representable codewords so pattern frames round-trip exactly
  for (double& v : stage1.table) v = static_cast<float>(v);
  stage1.ema_sums = stage1.table;
  model.codebooks.push_back(stage1);
  model.codebooks.push_back(RandomCodebook(4, 64, 20, rng));

  for (int T = 1; T <= 100; ++T) {
    FeatureSequence mel(T, 80);
    for (int t = 0; t < T; ++t) {
      const int k = static_cast<int>(test::UniformUnit(rng) * 64) % 64;
      for (int h = 0; h < 4; ++h) {
        for (int j = 0; j < 20; ++j) {
          mel.at(t, h * 20 + j) =
              static_cast<float>(model.codebooks[0].Codeword(h, k)[j]);
        }
      }
    }
    const MSMCR repr = Encode(mel, model);
    Require(repr.stages[0].frames == T, "stage-1 length violates shape law");
    Require(repr.stages[1].frames == (T + 3) / 4,
            "stage-2 length violates shape law");

    const FeatureSequence recon = Decode(repr, model);
    const LossReport losses = ComputeLosses(mel, model);
    Require(Mcd(mel, recon) == 0.0, "MCD not exactly 0 dB at T=" +
                                        std::to_string(T));
    Require(losses.l_f == 0.0, "l_f not exactly 0 at T=" + std::to_string(T));
  }
}

// ---------------------------------------------------------------------------
// Criteria 5 and 6 share the synthetic multilingual corpus.

LoadedCorpus AsCorpus(const std::vector<synth::SynthUtterance>& utts,
                      const std::string& fingerprint) {
  LoadedCorpus c;
  c.dim = utts.empty() ? 0 : utts[0].features.cols;
  c.fingerprint = fingerprint;
  c.content_hash = "fnv1a:inmemory";
  for (const auto& u : utts) {
    c.ids.push_back(u.id);
    c.features.push_back(u.features);
    c.f0_ref.emplace_back();
    c.f0_hyp.emplace_back();
  }
  return c;
}

LoadedCorpus Merge(const LoadedCorpus& a, const LoadedCorpus& b,
                   const std::vector<std::string>& selected) {
  LoadedCorpus out = a;
  for (size_t i = 0; i < b.ids.size(); ++i) {
    if (std::find(selected.begin(), selected.end(), b.ids[i]) !=
        selected.end()) {
      out.ids.push_back(b.ids[i]);
      out.features.push_back(b.features[i]);
      out.f0_ref.emplace_back();
      out.f0_hyp.emplace_back();
    }
  }
  return out;
}

MSMCModel TrainOn(const LoadedCorpus& corpus, long long iterations,
                  uint64_t seed, const std::string& init_path = "") {
  TrainConfig cfg;
  cfg.iterations = iterations;
  cfg.seed = seed;
  cfg.log_interval = 1000000;
  cfg.init_model_path = init_path;
  return Train(corpus, cfg).first;
}

void SelectionTrend() {
  int good_seeds = 0;
  for (uint64_t seed : {101ull, 102ull, 103ull}) {
    synth::SynthConfig scfg;
    scfg.seed = seed;
    const synth::SynthCorpus raw = synth::MakeCorpus(scfg);
    const LoadedCorpus target = AsCorpus(raw.target, raw.fingerprint);
    const LoadedCorpus cands = AsCorpus(raw.candidates, raw.fingerprint);
    const LoadedCorpus held_out = AsCorpus(raw.target_test, raw.fingerprint);

    // Rank candidates by embedding similarity; take top-k.
    const std::vector<double> centroid = TargetCentroid(raw.target_embeddings);
    const SelectionReport report =
        RankCandidates(raw.candidate_embeddings, centroid);
    const int k = scfg.n_matched;
    const TopKSelection topk = SelectTopK(report, k);

    // Random-k: seeded draw without replacement.
    std::mt19937_64 rng(seed * 77 + 5);
    std::vector<std::string> pool;
    for (const auto& r : raw.candidate_embeddings) pool.push_back(r.utterance_id);
    for (size_t i = 0; i < pool.size(); ++i) {
      const size_t j =
          i + static_cast<size_t>(test::UniformUnit(rng) * (pool.size() - i));
      std::swap(pool[i], pool[std::min(j, pool.size() - 1)]);
    }
    const std::vector<std::string> random_k(pool.begin(), pool.begin() + k);
    double random_acd = 0.0;
    for (const auto& r : report.ranked) {
      if (std::find(random_k.begin(), random_k.end(), r.utterance_id) !=
          random_k.end()) {
        random_acd += 1.0 - r.cosine_similarity;
      }
    }
    random_acd /= k;

    const MSMCModel m_target = TrainOn(target, 200, 3);
    const MSMCModel m_topk = TrainOn(Merge(target, cands, topk.ids), 200, 3);
    const MSMCModel m_rand = TrainOn(Merge(target, cands, random_k), 200, 3);

    const double mcd_target = EvaluateReconstruction(held_out, m_target).mcd_db;
    const double mcd_topk = EvaluateReconstruction(held_out, m_topk).mcd_db;
    const double mcd_rand = EvaluateReconstruction(held_out, m_rand).mcd_db;

    const bool ok = mcd_topk < mcd_target && mcd_rand > mcd_topk &&
                    random_acd > topk.acd.value();
    std::printf(
        "  seed %llu: MCD target-only %.3f, top-k %.3f, random-k %.3f; "
        "ACD top-k %.4f, random-k %.4f %s\n",
        static_cast<unsigned long long>(seed), mcd_target, mcd_topk, mcd_rand,
        topk.acd.value(), random_acd, ok ? "[ok]" : "[violated]");
    if (ok) ++good_seeds;
  }
  Require(good_seeds >= 2, "selection trend held on only " +
                               std::to_string(good_seeds) + "/3 seeds");
}

void TransferLearningTrend() {
  test::TempDir tmp;
  int good_seeds = 0;
  for (uint64_t seed : {201ull, 202ull, 203ull}) {
    synth::SynthConfig scfg;
    scfg.seed = seed;
    const synth::SynthCorpus raw = synth::MakeCorpus(scfg);
    const LoadedCorpus target = AsCorpus(raw.target, raw.fingerprint);
    const LoadedCorpus cands = AsCorpus(raw.candidates, raw.fingerprint);
    const LoadedCorpus held_out = AsCorpus(raw.target_test, raw.fingerprint);

    const MSMCModel pretrained = TrainOn(cands, 400, seed * 3 + 1);
    const std::string pre_path = tmp.Sub("pre" + std::to_string(seed) + ".json");
    SaveModel(pretrained, pre_path);

    const MSMCModel fine_tuned = TrainOn(target, 60, seed * 3 + 2, pre_path);
    const MSMCModel from_scratch = TrainOn(target, 60, seed * 3 + 2);

    const double lf_ft = EvaluateReconstruction(held_out, fine_tuned).frame_mse;
    const double lf_scratch =
        EvaluateReconstruction(held_out, from_scratch).frame_mse;
    const bool ok = lf_ft < lf_scratch;
    std::printf("  seed %llu: held-out l_f fine-tuned %.4f, from-scratch %.4f %s\n",
                static_cast<unsigned long long>(seed), lf_ft, lf_scratch,
                ok ? "[ok]" : "[violated]");
    if (ok) ++good_seeds;
  }
  Require(good_seeds >= 2, "transfer trend held on only " +
                               std::to_string(good_seeds) + "/3 seeds");
}

// ---------------------------------------------------------------------------
// Criterion 7: ACD monotonicity as a property over random reports.

void AcdMonotonicity() {
  std::mt19937_64 rng(7007);
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 4 + static_cast<int>(test::UniformUnit(rng) * 12);
    std::vector<double> centroid(dim);
    for (double& x : centroid) x = test::Gaussian(rng);
    double norm = 0.0;
    for (double x : centroid) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : centroid) x /= norm;

    std::vector<EmbeddingRecord> cands;
    const int n = 1 + static_cast<int>(test::UniformUnit(rng) * 30);
    for (int i = 0; i < n; ++i) {
      std::vector<double> e(dim);
      for (double& x : e) x = test::Gaussian(rng);
      double en = 0.0;
      for (double x : e) en += x * x;
      en = std::sqrt(en);
      for (double& x : e) x /= en;
      cands.push_back({"c" + std::to_string(i), "s", "xx", e});
    }
    const SelectionReport report = RankCandidates(cands, centroid);
    double prev = -1e300;
    for (int k = 1; k <= n; ++k) {
      const double acd = SelectTopK(report, k).acd.value();
      Require(acd >= prev - 1e-12, "ACD decreased as k grew");
      prev = acd;
    }
  }
}

// ---------------------------------------------------------------------------
// Criterion 8: metric identities.

void MetricIdentities() {
  std::mt19937_64 rng(8008);
  const FeatureSequence a = test::RandomFeatures(rng, 10, 80);
  Require(Mcd(a, a) == 0.0, "mcd(a,a) != 0");

  F0Track ref, hyp;
  for (int t = 0; t < 40; ++t) {
    const bool voiced = t % 3 != 0;
    ref.f0_hz.push_back(voiced ? 150.0f : 0.0f);
    ref.voiced.push_back(voiced ? 1 : 0);
    hyp.f0_hz.push_back(voiced ? 155.0f : 0.0f);
    hyp.voiced.push_back(voiced ? 1 : 0);
  }
  Require(std::abs(F0Rmse(ref, hyp).rmse_hz - 5.0) <= 1e-9,
          "constant 5 Hz offset did not give RMSE 5");

  F0Track x, y;
  x.f0_hz.assign(80, 120.0f);
  x.voiced.assign(80, 1);
  y = x;
  y.voiced[10] = 0;
  y.voiced[20] = 0;
  y.voiced[30] = 0;
  Require(F0Vuv(x, y) == 3.75, "3 mismatches in 80 frames must be 3.75%");
}

// ---------------------------------------------------------------------------
// Criterion 9: byte-identical pipeline reruns through the CLI.

int RunCommand(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

void PipelineDeterminism() {
  test::TempDir tmp;
  const std::string cli = MSMCR_CLI_PATH;
  for (const char* run : {"r1", "r2"}) {
    const std::string dir = tmp.Sub(run);
    std::filesystem::create_directories(dir);
    const std::string base = "cd " + dir + " && " + cli;
    Require(RunCommand(base + " synth-corpus --out-dir c --seed 42 "
                              ">/dev/null 2>&1") == 0,
            "synth-corpus failed");
    Require(RunCommand(base + " train --manifest c/target_test/manifest.tsv"
                              " --out model.json --seed 7 --iterations 40"
                              " --log-interval 10 >/dev/null 2>&1") == 0,
            "train failed");
    Require(RunCommand(base + " eval --model model.json"
                              " --manifest c/target_test/manifest.tsv"
                              " --out report.json >/dev/null 2>&1") == 0,
            "eval failed");
  }
  Require(ReadFileBytes(tmp.Sub("r1/model.json")) ==
              ReadFileBytes(tmp.Sub("r2/model.json")),
          "model files differ between reruns");
  Require(ReadFileBytes(tmp.Sub("r1/report.json")) ==
              ReadFileBytes(tmp.Sub("r2/report.json")),
          "report files differ between reruns");
}

// ---------------------------------------------------------------------------
// Criterion 10: front-end frame count and filterbank placement.

void DspSanity() {
  const Pcm second = test::Sine(440.0, 24000, 1.0, 0.5);
  const FeatureSequence mel = dsp::MelSpectrogram(second);
  Require(mel.rows == 80, "1 s of 24 kHz audio must give exactly 80 frames");
  Require(mel.cols == 80, "Mel spectrogram must have 80 channels");

  std::vector<double> mean(80, 0.0);
  for (int t = 0; t < mel.rows; ++t) {
    for (int m = 0; m < 80; ++m) mean[m] += mel.at(t, m);
  }
  int argmax = 0;
  for (int m = 1; m < 80; ++m) {
    if (mean[m] > mean[argmax]) argmax = m;
  }

  // Analytic oracle: channel centers uniform on the Mel scale over
  // 0..12000 Hz, nearest to 440 Hz.
  auto hz_to_mel = [](double hz) {
    return 2595.0 * std::log10(1.0 + hz / 700.0);
  };
  auto mel_to_hz = [](double mel_v) {
    return 700.0 * (std::pow(10.0, mel_v / 2595.0) - 1.0);
  };
  const double hi = hz_to_mel(12000.0);
  int want = 0;
  double best = 1e300;
  for (int m = 0; m < 80; ++m) {
    const double center = mel_to_hz(hi * (m + 1) / 81.0);
    if (std::abs(center - 440.0) < best) {
      best = std::abs(center - 440.0);
      want = m;
    }
  }
  Require(argmax == want,
          "440 Hz peak at channel " + std::to_string(argmax) +
              ", oracle channel " + std::to_string(want));
}

}  // namespace

int main() {
  RunCriterion(1, "quantizer oracle equivalence", QuantizerOracle);
  RunCriterion(2, "EMA convergence and utilization", EmaConvergence);
  RunCriterion(3, "loss decomposition consistency", LossConsistency);
  RunCriterion(4, "shape law and perfect round trip",
               ShapeLawAndPerfectRoundTrip);
  RunCriterion(5, "data-selection quality trend", SelectionTrend);
  RunCriterion(6, "transfer-learning quality trend", TransferLearningTrend);
  RunCriterion(7, "ACD monotonicity", AcdMonotonicity);
  RunCriterion(8, "metric identities", MetricIdentities);
  RunCriterion(9, "pipeline determinism", PipelineDeterminism);
  RunCriterion(10, "dsp frame count and filterbank placement", DspSanity);

  if (g_failures == 0) {
    std::printf("all criteria passed\n");
    return 0;
  }
  std::printf("%d criteria failed\n", g_failures);
  return 1;
}
