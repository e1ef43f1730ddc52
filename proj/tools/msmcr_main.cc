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
// msmcr: multi-stage multi-codebook representation learning pipeline.
// Subcommands: synth-corpus, features, train, encode, decode, select, eval.

#include <filesystem>
#include <iostream>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "msmcr/corpus_io.h"
#include "msmcr/dsp.h"
#include "msmcr/metrics.h"
#include "msmcr/msmc.h"
#include "msmcr/selection.h"
#include "msmcr/synth.h"
#include "msmcr/trainer.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void CheckKnownKeys(const json& j, const std::set<std::string>& known,
                    const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (known.find(key) == known.end()) {
      throw msmcr::Error("unknown config key: " + where + key);
    }
  }
}

// JSON run configuration; CLI flags override file values, file values
// override built-in defaults. Unknown keys are rejected.
msmcr::TrainConfig LoadTrainConfig(const std::string& path) {
  msmcr::TrainConfig cfg;
  if (path.empty()) return cfg;
  json j;
  try {
    j = json::parse(msmcr::ReadFileBytes(path));
  } catch (const json::exception& e) {
    throw msmcr::Error("cannot parse config: " + std::string(e.what()));
  }
  try {
    CheckKnownKeys(j,
                   {"seed", "iterations", "batch_utterances", "log_interval",
                    "workers", "ema", "loss_weights", "coupling_mode",
                    "stages", "init_pool_max_frames", "dsp_fingerprint"},
                   "");
    if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
    if (j.contains("dsp_fingerprint")) {
      cfg.expected_fingerprint = j["dsp_fingerprint"].get<std::string>();
    }
    if (j.contains("iterations")) cfg.iterations = j["iterations"].get<long long>();
    if (j.contains("batch_utterances")) {
      cfg.batch_utterances = j["batch_utterances"].get<int>();
    }
    if (j.contains("log_interval")) {
      cfg.log_interval = j["log_interval"].get<long long>();
    }
    if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
    if (j.contains("init_pool_max_frames")) {
      cfg.init_pool_max_frames = j["init_pool_max_frames"].get<long long>();
    }
    if (j.contains("ema")) {
      CheckKnownKeys(j["ema"], {"decay", "laplace_eps"}, "ema.");
      if (j["ema"].contains("decay")) {
        cfg.ema.decay = j["ema"]["decay"].get<double>();
      }
      if (j["ema"].contains("laplace_eps")) {
        cfg.ema.laplace_eps = j["ema"]["laplace_eps"].get<double>();
      }
    }
    if (j.contains("loss_weights")) {
      const json& w = j["loss_weights"];
      CheckKnownKeys(w, {"lambda_f", "lambda_q", "lambda_e", "lambda_w"},
                     "loss_weights.");
      if (w.contains("lambda_f")) cfg.weights.lambda_f = w["lambda_f"].get<double>();
      if (w.contains("lambda_q")) cfg.weights.lambda_q = w["lambda_q"].get<double>();
      if (w.contains("lambda_e")) cfg.weights.lambda_e = w["lambda_e"].get<double>();
      if (w.contains("lambda_w")) {
        cfg.weights.lambda_w = w["lambda_w"].get<double>();
        if (cfg.weights.lambda_w != 0.0) {
          throw msmcr::Error("lambda_w must be 0: no waveform loss here");
        }
      }
    }
    if (j.contains("coupling_mode")) {
      cfg.coupling =
          msmcr::CouplingModeFromName(j["coupling_mode"].get<std::string>());
    }
    if (j.contains("stages")) {
      cfg.stages.clear();
      for (const json& js : j["stages"]) {
        CheckKnownKeys(js, {"downsample_rate", "heads", "codewords"},
                       "stages[].");
        msmcr::StageConfig sc;
        sc.downsample_rate = js.at("downsample_rate").get<int>();
        sc.heads = js.at("heads").get<int>();
        sc.codewords = js.at("codewords").get<int>();
        cfg.stages.push_back(sc);
      }
    }
  } catch (const json::exception& e) {
    throw msmcr::Error("malformed config: " + std::string(e.what()));
  }
  return cfg;
}

int CmdFeatures(const std::string& manifest_path, const std::string& out_dir) {
  const msmcr::Manifest manifest = msmcr::ReadManifest(manifest_path);
  fs::create_directories(out_dir);
  msmcr::Manifest out_manifest;
  for (const msmcr::ManifestRow& row : manifest.rows) {
    msmcr::Pcm pcm = msmcr::ReadWav(manifest.ResolvePath(row));
    pcm = msmcr::dsp::Resample(pcm, msmcr::dsp::kSampleRate);
    const msmcr::FeatureSequence mel = msmcr::dsp::MelSpectrogram(pcm);
    const msmcr::F0Track f0 = msmcr::dsp::ExtractF0(pcm);
    const std::string mel_file = row.utterance_id + ".mel.feat";
    const std::string f0_file = row.utterance_id + ".f0.feat";
    msmcr::WriteFeatures((fs::path(out_dir) / mel_file).string(), mel,
                         msmcr::dsp::Fingerprint());
    msmcr::WriteF0((fs::path(out_dir) / f0_file).string(), f0,
                   msmcr::dsp::Fingerprint());
    out_manifest.rows.push_back(
        {row.utterance_id, mel_file, row.speaker_id, row.language});
  }
  msmcr::WriteManifest(out_manifest,
                       (fs::path(out_dir) / "manifest.tsv").string());
  return 0;
}

int CmdTrain(const msmcr::TrainConfig& cfg, const std::string& manifest_path,
             const std::string& out_model) {
  const msmcr::LoadedCorpus corpus =
      msmcr::LoadCorpus(msmcr::ReadManifest(manifest_path));
  auto [model, history] = msmcr::Train(corpus, cfg, &std::cout);
  msmcr::SaveModel(model, out_model);
  return 0;
}

int CmdEncode(const std::string& model_path, const std::string& features_path,
              const std::string& out_path) {
  const msmcr::MSMCModel model = msmcr::LoadModel(model_path);
  const msmcr::FeatureFile f = msmcr::ReadFeatures(features_path);
  if (f.fingerprint != model.dsp_fingerprint) {
    throw msmcr::Error("feature fingerprint does not match model");
  }
  const msmcr::MSMCR repr = msmcr::Encode(f.features, model);

  json j;
  j["format"] = "msmcr-tokens";
  j["version"] = 1;
  j["dsp_fingerprint"] = model.dsp_fingerprint;
  j["feature_dim"] = model.feature_dim;
  json stages = json::array();
  for (int s = 0; s < model.num_stages(); ++s) {
    json js;
    js["downsample_rate"] = model.stage_configs[s].downsample_rate;
    js["heads"] = model.stage_configs[s].heads;
    js["codewords"] = model.stage_configs[s].codewords;
    js["frames"] = repr.stages[s].frames;
    js["indices"] = repr.stages[s].indices;
    stages.push_back(std::move(js));
  }
  j["stages"] = std::move(stages);
  msmcr::AtomicWriteFile(out_path, j.dump(2) + "\n");
  return 0;
}

int CmdDecode(const std::string& model_path, const std::string& tokens_path,
              const std::string& out_path) {
  const msmcr::MSMCModel model = msmcr::LoadModel(model_path);
  json j;
  try {
    j = json::parse(msmcr::ReadFileBytes(tokens_path));
  } catch (const json::exception& e) {
    throw msmcr::Error("cannot parse token file: " + std::string(e.what()));
  }
  try {
    if (j.value("format", "") != "msmcr-tokens" || j.value("version", -1) != 1) {
      throw msmcr::Error("not a token file: " + tokens_path);
    }
    if (j.at("dsp_fingerprint").get<std::string>() != model.dsp_fingerprint) {
      throw msmcr::Error("token fingerprint does not match model");
    }
    msmcr::MSMCR repr;
    for (const json& js : j.at("stages")) {
      msmcr::MSMCRStage stage;
      stage.frames = js.at("frames").get<int>();
      stage.indices = js.at("indices").get<std::vector<int>>();
      repr.stages.push_back(std::move(stage));
    }
    const msmcr::FeatureSequence out = msmcr::Decode(repr, model);
    msmcr::WriteFeatures(out_path, out, model.dsp_fingerprint);
  } catch (const json::exception& e) {
    throw msmcr::Error("malformed token file: " + std::string(e.what()));
  }
  return 0;
}

int CmdSelect(const std::string& target_emb, const std::string& candidate_emb,
              int k, const std::string& out_manifest,
              const std::string& target_manifest_path,
              const std::string& candidate_manifest_path,
              const std::string& acd_ks) {
  const auto targets = msmcr::ReadEmbeddings(target_emb);
  const auto candidates = msmcr::ReadEmbeddings(candidate_emb);
  const std::vector<double> centroid = msmcr::TargetCentroid(targets);
  msmcr::SelectionReport report = msmcr::RankCandidates(candidates, centroid);
  report.chosen_k = k;

  // ACD ladder analogous to a top-k sweep; always includes the chosen k.
  std::set<int> ks = {k};
  if (!acd_ks.empty()) {
    std::stringstream ss(acd_ks);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        ks.insert(std::stoi(tok));
      } catch (const std::exception&) {
        throw msmcr::Error("bad --acd-ks value: " + tok);
      }
    }
  }
  for (int kk : ks) {
    if (kk < 0 || kk > static_cast<int>(report.ranked.size())) continue;
    const msmcr::TopKSelection sel = msmcr::SelectTopK(report, kk);
    report.acd_at_k.push_back({kk, sel.acd.value_or(0.0)});
    std::cout << "k=" << kk << " acd=" << (sel.acd ? *sel.acd : 0.0) << "\n";
  }

  const msmcr::TopKSelection chosen = msmcr::SelectTopK(report, k);
  if (!target_manifest_path.empty() && !candidate_manifest_path.empty()) {
    const msmcr::Manifest target = msmcr::ReadManifest(target_manifest_path);
    const msmcr::Manifest cands = msmcr::ReadManifest(candidate_manifest_path);
    const msmcr::Manifest merged =
        msmcr::EmitAugmentedManifest(target, cands, chosen.ids);
    msmcr::WriteManifest(merged, out_manifest);
  } else {
    // Without manifests, emit the ranked selection itself as a TSV of
    // utterance id and cosine similarity.
    std::ostringstream out;
    out.precision(17);
    for (int i = 0; i < k; ++i) {
      out << report.ranked[i].utterance_id << '\t'
          << report.ranked[i].cosine_similarity << '\n';
    }
    msmcr::AtomicWriteFile(out_manifest, out.str());
  }
  return 0;
}

int CmdEval(const std::string& model_path, const std::string& manifest_path,
            const std::string& report_out) {
  const msmcr::MSMCModel model = msmcr::LoadModel(model_path);
  const msmcr::LoadedCorpus corpus =
      msmcr::LoadCorpus(msmcr::ReadManifest(manifest_path));
  std::vector<std::pair<std::string, msmcr::MetricsReport>> per_utt;
  const msmcr::MetricsReport report =
      msmcr::EvaluateReconstruction(corpus, model, &per_utt);
  msmcr::AtomicWriteFile(report_out, msmcr::MetricsToJson(report, &per_utt));
  std::cout << "mcd_db=" << report.mcd_db << " frame_mse=" << report.frame_mse
            << " n_utterances=" << report.n_utterances << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-stage multi-codebook representation learning"};
  app.require_subcommand(1);

  // synth-corpus
  auto* synth_cmd = app.add_subcommand(
      "synth-corpus", "Generate a seeded synthetic corpus with embeddings");
  msmcr::synth::SynthConfig synth_cfg;
  std::string synth_out;
  synth_cmd->add_option("--out-dir", synth_out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth_cfg.seed, "Generator seed");
  synth_cmd->add_option("--dim", synth_cfg.feature_dim, "Feature dimension");
  synth_cmd->add_option("--frames", synth_cfg.frames_per_utt,
                        "Frames per utterance");
  synth_cmd->add_option("--n-target", synth_cfg.n_target, "Target utterances");
  synth_cmd->add_option("--n-target-test", synth_cfg.n_target_test,
                        "Held-out target utterances");
  synth_cmd->add_option("--n-matched", synth_cfg.n_matched,
                        "Matched candidate utterances");
  synth_cmd->add_option("--n-mismatched", synth_cfg.n_mismatched,
                        "Mismatched candidate utterances");

  // features
  auto* feat_cmd = app.add_subcommand(
      "features", "Extract Mel + F0 feature files from a WAV manifest");
  std::string feat_manifest, feat_out;
  feat_cmd->add_option("--manifest", feat_manifest, "WAV manifest")->required();
  feat_cmd->add_option("--out-dir", feat_out, "Output directory")->required();

  // train
  auto* train_cmd =
      app.add_subcommand("train", "Train or fine-tune codebooks");
  std::string train_config, train_manifest, train_out, train_init;
  uint64_t train_seed = 0;
  long long train_iters = 0, train_log_interval = 0;
  int train_workers = 0;
  train_cmd->add_option("--config", train_config, "JSON run configuration");
  train_cmd->add_option("--manifest", train_manifest, "Feature manifest")
      ->required();
  train_cmd->add_option("--out", train_out, "Output model path")->required();
  train_cmd->add_option("--init-from", train_init,
                        "Fine-tune from this model");
  auto* seed_opt = train_cmd->add_option("--seed", train_seed, "Run seed");
  auto* iter_opt =
      train_cmd->add_option("--iterations", train_iters, "Training iterations");
  auto* li_opt = train_cmd->add_option("--log-interval", train_log_interval,
                                       "History/progress interval");
  auto* wk_opt =
      train_cmd->add_option("--workers", train_workers, "Parallel workers");

  // encode / decode
  auto* enc_cmd =
      app.add_subcommand("encode", "Encode a feature file into tokens");
  std::string enc_model, enc_features, enc_out;
  enc_cmd->add_option("--model", enc_model, "Model file")->required();
  enc_cmd->add_option("--features", enc_features, "Feature file")->required();
  enc_cmd->add_option("--out", enc_out, "Token file")->required();

  auto* dec_cmd =
      app.add_subcommand("decode", "Reconstruct features from tokens");
  std::string dec_model, dec_tokens, dec_out;
  dec_cmd->add_option("--model", dec_model, "Model file")->required();
  dec_cmd->add_option("--tokens", dec_tokens, "Token file")->required();
  dec_cmd->add_option("--out", dec_out, "Output feature file")->required();

  // select
  auto* sel_cmd = app.add_subcommand(
      "select", "Rank candidates by speaker similarity and select top-k");
  std::string sel_temb, sel_cemb, sel_out, sel_tman, sel_cman, sel_acd_ks;
  int sel_k = 0;
  sel_cmd->add_option("--target-emb", sel_temb, "Target embeddings")
      ->required();
  sel_cmd->add_option("--candidate-emb", sel_cemb, "Candidate embeddings")
      ->required();
  sel_cmd->add_option("--k", sel_k, "Number of utterances to select")
      ->required();
  sel_cmd->add_option("--out-manifest", sel_out, "Output path")->required();
  sel_cmd->add_option("--target-manifest", sel_tman, "Target manifest");
  sel_cmd->add_option("--candidate-manifest", sel_cman, "Candidate manifest");
  sel_cmd->add_option("--acd-ks", sel_acd_ks,
                      "Comma-separated k values for the printed ACD table");

  // eval
  auto* eval_cmd = app.add_subcommand(
      "eval", "Analysis-by-synthesis metrics over a feature manifest");
  std::string eval_model, eval_manifest, eval_out;
  eval_cmd->add_option("--model", eval_model, "Model file")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "Feature manifest")
      ->required();
  eval_cmd->add_option("--out", eval_out, "Report JSON path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (synth_cmd->parsed()) {
      msmcr::synth::WriteCorpus(msmcr::synth::MakeCorpus(synth_cfg), synth_out);
      return 0;
    }
    if (feat_cmd->parsed()) return CmdFeatures(feat_manifest, feat_out);
    if (train_cmd->parsed()) {
      msmcr::TrainConfig cfg = LoadTrainConfig(train_config);
      if (seed_opt->count() > 0) cfg.seed = train_seed;
      if (iter_opt->count() > 0) cfg.iterations = train_iters;
      if (li_opt->count() > 0) cfg.log_interval = train_log_interval;
      if (wk_opt->count() > 0) cfg.workers = train_workers;
      cfg.init_model_path = train_init;
      return CmdTrain(cfg, train_manifest, train_out);
    }
    if (enc_cmd->parsed()) return CmdEncode(enc_model, enc_features, enc_out);
    if (dec_cmd->parsed()) return CmdDecode(dec_model, dec_tokens, dec_out);
    if (sel_cmd->parsed()) {
      return CmdSelect(sel_temb, sel_cemb, sel_k, sel_out, sel_tman, sel_cman,
                       sel_acd_ks);
    }
    if (eval_cmd->parsed()) return CmdEval(eval_model, eval_manifest, eval_out);
  } catch (const msmcr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
