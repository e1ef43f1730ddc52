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

#include "msmcr/trainer.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <ostream>
#include <sstream>
#include <thread>

namespace msmcr {

namespace fs = std::filesystem;

namespace {

double UniformUnit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

size_t UniformIndex(std::mt19937_64& rng, size_t n) {
  const size_t i = static_cast<size_t>(UniformUnit(rng) * static_cast<double>(n));
  return std::min(i, n - 1);
}

// Runs fn(i) for i in [0, n) across `workers` threads. Outputs must be
// written to per-index slots so the result is independent of scheduling.
void ParallelFor(int n, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, std::min(workers, n));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::atomic<int> next{0};
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= n) break;
        fn(i);
      }
    });
  }
  for (std::thread& t : pool) t.join();
}

// Stage inputs for one utterance under the current model state: the
// downsample chain, and in residual mode the offset against the upsampled
// prediction from the stage above.
std::vector<FeatureSequence> DownsampleChain(const FeatureSequence& features,
                                             const std::vector<StageConfig>& stages) {
  std::vector<FeatureSequence> h(stages.size());
  h[0] = features;
  for (size_t s = 1; s < stages.size(); ++s) {
    const int ratio =
        stages[s].downsample_rate / stages[s - 1].downsample_rate;
    h[s] = Downsample(h[s - 1], ratio);
  }
  return h;
}

void ValidateConfig(const TrainConfig& cfg) {
  if (cfg.iterations < 0) throw Error("iterations must be >= 0");
  if (cfg.batch_utterances < 1) throw Error("batch size must be >= 1");
  if (cfg.log_interval < 1) throw Error("log interval must be >= 1");
  if (cfg.workers < 1) throw Error("workers must be >= 1");
  if (!(cfg.ema.decay > 0.0 && cfg.ema.decay < 1.0)) {
    throw Error("EMA decay must lie in (0, 1)");
  }
}

// Stage configs are validated before any downsampling so a bad rate can
// never reach the ratio divisions.
void ValidateStages(const std::vector<StageConfig>& stages, int dim) {
  if (stages.empty()) throw Error("model needs at least one stage");
  if (stages[0].downsample_rate != 1) {
    throw Error("stage 1 must have downsample rate 1");
  }
  for (size_t s = 0; s < stages.size(); ++s) {
    if (stages[s].heads < 1 || stages[s].codewords < 1) {
      throw Error("stage heads and codewords must be >= 1");
    }
    if (dim % stages[s].heads != 0) {
      throw Error("feature dim not divisible by head count");
    }
    if (s > 0) {
      const int prev = stages[s - 1].downsample_rate;
      if (stages[s].downsample_rate <= prev ||
          stages[s].downsample_rate % prev != 0) {
        throw Error("stage rates must be strictly increasing and divisible");
      }
    }
  }
}

std::string CorpusHash(const LoadedCorpus& corpus) {
  uint64_t h = 1469598103934665603ull;
  for (size_t i = 0; i < corpus.ids.size(); ++i) {
    h = Fnv1a64(corpus.ids[i], h);
    const FeatureSequence& f = corpus.features[i];
    const int shape[2] = {f.rows, f.cols};
    h = Fnv1a64(shape, sizeof(shape), h);
    h = Fnv1a64(f.data.data(), f.data.size() * sizeof(float), h);
  }
  std::ostringstream ss;
  ss << "fnv1a:" << std::hex << h;
  return ss.str();
}

// Derives the reference / hypothesis F0 paths that ride next to a feature
// file named <stem>.mel.feat.
std::string SiblingPath(const std::string& mel_path, const char* kind) {
  const std::string suffix = ".mel.feat";
  if (mel_path.size() < suffix.size() ||
      mel_path.compare(mel_path.size() - suffix.size(), suffix.size(),
                       suffix) != 0) {
    return "";
  }
  return mel_path.substr(0, mel_path.size() - suffix.size()) + kind + ".feat";
}

}  // namespace

LoadedCorpus LoadCorpus(const Manifest& manifest) {
  if (manifest.rows.empty()) throw Error("empty corpus");
  LoadedCorpus corpus;
  for (const ManifestRow& row : manifest.rows) {
    const std::string path = manifest.ResolvePath(row);
    FeatureFile f = ReadFeatures(path);
    if (corpus.ids.empty()) {
      corpus.fingerprint = f.fingerprint;
      corpus.dim = f.features.cols;
    } else {
      if (f.fingerprint != corpus.fingerprint) {
        throw Error("dsp fingerprint mismatch for utterance " +
                    row.utterance_id);
      }
      if (f.features.cols != corpus.dim) {
        throw Error("feature dim mismatch for utterance " + row.utterance_id);
      }
    }
    corpus.ids.push_back(row.utterance_id);
    corpus.features.push_back(std::move(f.features));

    std::optional<F0Track> ref, hyp;
    const std::string ref_path = SiblingPath(path, ".f0");
    const std::string hyp_path = SiblingPath(path, ".f0hyp");
    if (!ref_path.empty() && fs::exists(ref_path)) ref = ReadF0(ref_path);
    if (!hyp_path.empty() && fs::exists(hyp_path)) hyp = ReadF0(hyp_path);
    corpus.f0_ref.push_back(std::move(ref));
    corpus.f0_hyp.push_back(std::move(hyp));
  }
  corpus.content_hash = CorpusHash(corpus);
  return corpus;
}

std::pair<MSMCModel, TrainHistory> Train(const LoadedCorpus& corpus,
                                         const TrainConfig& cfg,
                                         std::ostream* progress) {
  ValidateConfig(cfg);
  if (corpus.ids.empty()) throw Error("empty corpus");
  if (!cfg.expected_fingerprint.empty() &&
      cfg.expected_fingerprint != corpus.fingerprint) {
    throw Error("corpus dsp fingerprint does not match configuration");
  }

  std::mt19937_64 rng(cfg.seed);
  MSMCModel model;

  if (!cfg.init_model_path.empty()) {
    model = LoadModel(cfg.init_model_path);
    if (model.feature_dim != corpus.dim) {
      throw Error("init model feature dim does not match corpus");
    }
    if (model.dsp_fingerprint != corpus.fingerprint) {
      throw Error("init model dsp fingerprint does not match corpus");
    }
    model.weights = cfg.weights;
  } else {
    ValidateStages(cfg.stages, corpus.dim);
    model.feature_dim = corpus.dim;
    model.coupling = cfg.coupling;
    model.weights = cfg.weights;
    model.dsp_fingerprint = corpus.fingerprint;
    model.stage_configs = cfg.stages;
    model.codebooks.resize(cfg.stages.size());

    // Seed codebooks top stage first so that residual-mode inputs for the
    // lower stages can already be formed against initialized stages above.
    const int S = static_cast<int>(cfg.stages.size());
    std::vector<std::vector<FeatureSequence>> chains(corpus.ids.size());
    for (size_t u = 0; u < corpus.ids.size(); ++u) {
      chains[u] = DownsampleChain(corpus.features[u], cfg.stages);
    }
    // Predictions flowing down during initialization, per utterance.
    std::vector<FeatureSequence> zhat(corpus.ids.size());
    for (int s = S - 1; s >= 0; --s) {
      const bool use_residual =
          cfg.coupling == CouplingMode::kResidual && s < S - 1;
      long long total_rows = 0;
      for (size_t u = 0; u < corpus.ids.size(); ++u) {
        total_rows += chains[u][s].rows;
      }
      // Pool of stage-s input frames, capped at init_pool_max_frames.
      FeatureSequence pool;
      auto stage_input = [&](size_t u) {
        if (!use_residual) return chains[u][s];
        FeatureSequence input(chains[u][s].rows, chains[u][s].cols);
        for (size_t i = 0; i < input.data.size(); ++i) {
          input.data[i] = chains[u][s].data[i] - zhat[u].data[i];
        }
        return input;
      };
      if (total_rows <= cfg.init_pool_max_frames) {
        pool = FeatureSequence(static_cast<int>(total_rows), corpus.dim);
        int r = 0;
        for (size_t u = 0; u < corpus.ids.size(); ++u) {
          const FeatureSequence input = stage_input(u);
          std::copy(input.data.begin(), input.data.end(), pool.row(r));
          r += input.rows;
        }
      } else {
        // Uniform sample with replacement across all (utterance, frame)
        // positions; materialized per utterance to avoid recomputing
        // residual inputs per draw.
        pool = FeatureSequence(static_cast<int>(cfg.init_pool_max_frames),
                               corpus.dim);
        std::vector<long long> offsets(corpus.ids.size() + 1, 0);
        for (size_t u = 0; u < corpus.ids.size(); ++u) {
          offsets[u + 1] = offsets[u] + chains[u][s].rows;
        }
        std::vector<std::vector<int>> picks(corpus.ids.size());
        std::vector<std::pair<size_t, size_t>> order;  // (utt, slot in pool)
        for (long long i = 0; i < cfg.init_pool_max_frames; ++i) {
          const long long flat =
              static_cast<long long>(UniformIndex(rng, total_rows));
          const size_t u =
              std::upper_bound(offsets.begin(), offsets.end(), flat) -
              offsets.begin() - 1;
          picks[u].push_back(static_cast<int>(flat - offsets[u]));
          order.push_back({u, static_cast<size_t>(i)});
        }
        for (size_t u = 0; u < corpus.ids.size(); ++u) {
          if (picks[u].empty()) continue;
          const FeatureSequence input = stage_input(u);
          size_t next = 0;
          for (const auto& [uu, slot] : order) {
            if (uu != u) continue;
            std::copy(input.row(picks[u][next]),
                      input.row(picks[u][next]) + input.cols,
                      pool.row(static_cast<int>(slot)));
            ++next;
          }
        }
      }
      model.codebooks[s] =
          InitCodebook(pool, cfg.stages[s].heads, cfg.stages[s].codewords,
                       rng());

      if (s > 0) {
        // Push predictions down for the next stage's residual inputs.
        for (size_t u = 0; u < corpus.ids.size(); ++u) {
          const FeatureSequence input = stage_input(u);
          BatchQuant q = QuantizeBatch(input, model.codebooks[s]);
          FeatureSequence z(input.rows, input.cols);
          for (int t = 0; t < input.rows; ++t) {
            float* dst = z.row(t);
            const QuantResult& r = q.results[t];
            for (int d = 0; d < input.cols; ++d) {
              dst[d] = use_residual
                           ? zhat[u].at(t, d) + static_cast<float>(r.quantized[d])
                           : static_cast<float>(r.quantized[d]);
            }
          }
          const int ratio = cfg.stages[s].downsample_rate /
                            cfg.stages[s - 1].downsample_rate;
          zhat[u] = Upsample(z, ratio, chains[u][s - 1].rows);
        }
      }
    }
    model.Validate();
  }

  TrainHistory history;
  const int S = model.num_stages();
  const size_t n_utts = corpus.ids.size();

  for (long long iter = 1; iter <= cfg.iterations; ++iter) {
    // Whole utterances, uniform with replacement.
    std::vector<size_t> batch(cfg.batch_utterances);
    for (int b = 0; b < cfg.batch_utterances; ++b) {
      batch[b] = UniformIndex(rng, n_utts);
    }

    std::vector<std::vector<FeatureSequence>> chains(batch.size());
    ParallelFor(static_cast<int>(batch.size()), cfg.workers, [&](int b) {
      chains[b] = DownsampleChain(corpus.features[batch[b]],
                                  model.stage_configs);
    });

    std::vector<FeatureSequence> zhat(batch.size());
    std::vector<AssignStats> iter_stats(S);
    for (int s = S - 1; s >= 0; --s) {
      const Codebook& cb = model.codebooks[s];
      const bool use_residual =
          model.coupling == CouplingMode::kResidual && s < S - 1;

      std::vector<FeatureSequence> inputs(batch.size());
      std::vector<AssignStats> slot_stats(batch.size());
      ParallelFor(static_cast<int>(batch.size()), cfg.workers, [&](int b) {
        if (use_residual) {
          FeatureSequence input(chains[b][s].rows, chains[b][s].cols);
          for (size_t i = 0; i < input.data.size(); ++i) {
            input.data[i] = chains[b][s].data[i] - zhat[b].data[i];
          }
          inputs[b] = std::move(input);
        } else {
          inputs[b] = chains[b][s];
        }
        slot_stats[b] = QuantizeBatch(inputs[b], cb).stats;
      });

      AssignStats merged(cb.heads, cb.codewords, cb.sub_dim);
      long long batch_rows = 0;
      for (size_t b = 0; b < batch.size(); ++b) {
        merged.Merge(slot_stats[b]);
        batch_rows += inputs[b].rows;
      }

      // Reseed pool: every stage-s input frame of this batch.
      FeatureSequence pool(static_cast<int>(batch_rows), corpus.dim);
      int r = 0;
      for (size_t b = 0; b < batch.size(); ++b) {
        std::copy(inputs[b].data.begin(), inputs[b].data.end(), pool.row(r));
        r += inputs[b].rows;
      }
      EmaUpdate(model.codebooks[s], merged, cfg.ema, &pool, &rng);
      iter_stats[s] = std::move(merged);

      if (s > 0) {
        // Lower stages see predictions from the freshly updated codebook.
        const int ratio = model.stage_configs[s].downsample_rate /
                          model.stage_configs[s - 1].downsample_rate;
        ParallelFor(static_cast<int>(batch.size()), cfg.workers, [&](int b) {
          BatchQuant q = QuantizeBatch(inputs[b], model.codebooks[s]);
          FeatureSequence z(inputs[b].rows, inputs[b].cols);
          for (int t = 0; t < inputs[b].rows; ++t) {
            float* dst = z.row(t);
            const QuantResult& qr = q.results[t];
            for (int d = 0; d < inputs[b].cols; ++d) {
              dst[d] = use_residual
                           ? zhat[b].at(t, d) + static_cast<float>(qr.quantized[d])
                           : static_cast<float>(qr.quantized[d]);
            }
          }
          zhat[b] = Upsample(z, ratio, chains[b][s - 1].rows);
        });
      }
    }

    if ((iter - 1) % cfg.log_interval == 0) {
      // Batch losses under the post-update model, frame-weighted.
      std::vector<LossReport> reports(batch.size());
      ParallelFor(static_cast<int>(batch.size()), cfg.workers, [&](int b) {
        reports[b] = ComputeLosses(corpus.features[batch[b]], model);
      });
      TrainStep step;
      step.iteration = iter;
      double weight = 0.0;
      for (size_t b = 0; b < batch.size(); ++b) {
        const double w = corpus.features[batch[b]].rows;
        step.l_f += w * reports[b].l_f;
        step.l_q += w * reports[b].l_q;
        step.l_e += w * reports[b].l_e;
        weight += w;
      }
      if (weight > 0.0) {
        step.l_f /= weight;
        step.l_q /= weight;
        step.l_e /= weight;
      }
      for (int s = 0; s < S; ++s) {
        const std::vector<double> ppl = Perplexity(iter_stats[s]);
        double mean = 0.0;
        for (double p : ppl) mean += p;
        step.ppl_per_stage.push_back(mean / ppl.size());
      }
      if (progress != nullptr) {
        std::ostringstream line;
        line << "iter=" << iter << " l_f=" << step.l_f << " l_q=" << step.l_q
             << " l_e=" << step.l_e << " ppl=";
        for (int s = 0; s < S; ++s) {
          if (s) line << ',';
          line << step.ppl_per_stage[s];
        }
        *progress << line.str() << '\n';
      }
      history.steps.push_back(std::move(step));
    }
  }

  model.meta.iterations += cfg.iterations;
  model.meta.corpus_hash = corpus.content_hash;
  model.meta.seed = cfg.seed;
  return {std::move(model), std::move(history)};
}

MetricsReport EvaluateReconstruction(
    const LoadedCorpus& corpus, const MSMCModel& model,
    std::vector<std::pair<std::string, MetricsReport>>* per_utterance) {
  if (corpus.ids.empty()) throw Error("empty corpus");
  if (corpus.dim != model.feature_dim) {
    throw Error("corpus feature dim does not match model");
  }
  if (corpus.fingerprint != model.dsp_fingerprint) {
    throw Error("corpus dsp fingerprint does not match model");
  }
  std::vector<MetricsReport> reports;
  reports.reserve(corpus.ids.size());
  for (size_t u = 0; u < corpus.ids.size(); ++u) {
    const FeatureSequence& ref = corpus.features[u];
    const FeatureSequence hyp = Decode(Encode(ref, model), model);
    MetricsReport r;
    r.n_utterances = 1;
    r.n_frames_compared = ref.rows;
    r.mcd_db = Mcd(ref, hyp);
    r.frame_mse = FrameMse(ref, hyp);
    if (corpus.f0_ref[u].has_value() && corpus.f0_hyp[u].has_value()) {
      const F0RmseResult fr = F0Rmse(*corpus.f0_ref[u], *corpus.f0_hyp[u]);
      r.f0_rmse_hz = fr.rmse_hz;
      r.n_f0_frames_compared = fr.n_both_voiced;
      r.f0_vuv_pct = F0Vuv(*corpus.f0_ref[u], *corpus.f0_hyp[u]);
    }
    if (per_utterance != nullptr) {
      per_utterance->push_back({corpus.ids[u], r});
    }
    reports.push_back(r);
  }
  return Aggregate(reports);
}

}  // namespace msmcr
