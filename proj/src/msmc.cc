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

#include "msmcr/msmc.h"

#include <cmath>
#include <cstring>
#include <span>

namespace msmcr {

namespace {

int CeilDiv(int a, int b) { return (a + b - 1) / b; }

double Mse(const FeatureSequence& a, const FeatureSequence& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw Error("shape mismatch");
  const size_t n = a.data.size();
  if (n == 0) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(n);
}

// Rebuilds stage s's quantized sequence from token indices. In residual
// mode (below the top stage) codewords are offsets added to the higher
// stage's prediction. Encode and Decode both reconstruct through here, so
// tokens alone always reproduce the stored sequences bit-exactly.
FeatureSequence ComposeStage(const std::vector<int>& indices, int frames,
                             const Codebook& cb, const FeatureSequence* zhat,
                             bool residual) {
  if (static_cast<int>(indices.size()) != frames * cb.heads) {
    throw Error("token matrix size inconsistent with frame count");
  }
  if (residual && zhat == nullptr) throw Error("missing higher-stage prediction");
  FeatureSequence z(frames, cb.dim());
  for (int t = 0; t < frames; ++t) {
    float* row = z.row(t);
    const float* base = residual ? zhat->row(t) : nullptr;
    for (int h = 0; h < cb.heads; ++h) {
      const int k = indices[static_cast<size_t>(t) * cb.heads + h];
      if (k < 0 || k >= cb.codewords) throw Error("token index out of range");
      const double* cw = cb.Codeword(h, k);
      for (int j = 0; j < cb.sub_dim; ++j) {
        const int d = h * cb.sub_dim + j;
        row[d] = residual ? base[d] + static_cast<float>(cw[j])
                          : static_cast<float>(cw[j]);
      }
    }
  }
  return z;
}

struct EncodeCapture {
  std::vector<FeatureSequence> stage_input;  // what each quantizer saw
  std::vector<double> sq_error_sum;          // per stage
  std::vector<FeatureSequence> zhat;         // per stage below the top
};

MSMCR EncodeInternal(const FeatureSequence& features, const MSMCModel& model,
                     EncodeCapture* capture) {
  model.Validate();
  if (features.cols != model.feature_dim) {
    throw Error("feature dim does not match model");
  }
  const int S = model.num_stages();

  // Downsample chain h(1)..h(S).
  std::vector<FeatureSequence> h(S);
  h[0] = features;
  for (int s = 1; s < S; ++s) {
    const int ratio = model.stage_configs[s].downsample_rate /
                      model.stage_configs[s - 1].downsample_rate;
    h[s] = Downsample(h[s - 1], ratio);
  }

  MSMCR repr;
  repr.stages.resize(S);
  if (capture != nullptr) {
    capture->stage_input.resize(S);
    capture->sq_error_sum.assign(S, 0.0);
    capture->zhat.resize(S);
  }

  const bool residual = model.coupling == CouplingMode::kResidual;
  FeatureSequence zhat;  // prediction for the current stage, from above
  for (int s = S - 1; s >= 0; --s) {
    const Codebook& cb = model.codebooks[s];
    const bool use_residual = residual && s < S - 1;

    FeatureSequence input;
    if (use_residual) {
      input = FeatureSequence(h[s].rows, h[s].cols);
      for (size_t i = 0; i < input.data.size(); ++i) {
        input.data[i] = h[s].data[i] - zhat.data[i];
      }
    } else {
      input = h[s];
    }

    MSMCRStage& stage = repr.stages[s];
    stage.frames = input.rows;
    stage.indices.resize(static_cast<size_t>(input.rows) * cb.heads);
    double err_sum = 0.0;
    for (int t = 0; t < input.rows; ++t) {
      QuantResult r = Quantize(
          std::span<const float>(input.row(t), static_cast<size_t>(input.cols)),
          cb);
      err_sum += r.sq_error;
      std::copy(r.indices.begin(), r.indices.end(),
                stage.indices.begin() + static_cast<size_t>(t) * cb.heads);
    }
    stage.quantized = ComposeStage(stage.indices, stage.frames, cb,
                                   s < S - 1 ? &zhat : nullptr, use_residual);

    if (capture != nullptr) {
      capture->stage_input[s] = std::move(input);
      capture->sq_error_sum[s] = err_sum;
      if (s < S - 1) capture->zhat[s] = zhat;
    }

    if (s > 0) {
      const int ratio = model.stage_configs[s].downsample_rate /
                        model.stage_configs[s - 1].downsample_rate;
      zhat = Upsample(stage.quantized, ratio, h[s - 1].rows);
    }
  }
  return repr;
}

}  // namespace

const char* CouplingModeName(CouplingMode mode) {
  return mode == CouplingMode::kDirect ? "direct" : "residual";
}

CouplingMode CouplingModeFromName(const std::string& name) {
  if (name == "direct") return CouplingMode::kDirect;
  if (name == "residual") return CouplingMode::kResidual;
  throw Error("unknown coupling mode: " + name);
}

void MSMCModel::Validate() const {
  if (feature_dim <= 0) throw Error("model feature dim must be positive");
  if (stage_configs.empty()) throw Error("model needs at least one stage");
  if (stage_configs.size() != codebooks.size()) {
    throw Error("stage config and codebook counts differ");
  }
  if (stage_configs[0].downsample_rate != 1) {
    throw Error("stage 1 must have downsample rate 1");
  }
  for (size_t s = 0; s < stage_configs.size(); ++s) {
    const StageConfig& sc = stage_configs[s];
    if (sc.downsample_rate < 1) throw Error("downsample rate must be >= 1");
    if (s > 0) {
      const int prev = stage_configs[s - 1].downsample_rate;
      if (sc.downsample_rate <= prev || sc.downsample_rate % prev != 0) {
        throw Error("stage rates must be strictly increasing and divisible");
      }
    }
    const Codebook& cb = codebooks[s];
    if (cb.heads != sc.heads || cb.codewords != sc.codewords) {
      throw Error("codebook shape does not match stage config");
    }
    if (cb.dim() != feature_dim) {
      throw Error("codebook dimension does not match feature dim");
    }
    const size_t cells = static_cast<size_t>(cb.heads) * cb.codewords;
    if (cb.table.size() != cells * cb.sub_dim ||
        cb.ema_counts.size() != cells ||
        cb.ema_sums.size() != cells * cb.sub_dim ||
        cb.dead_streak.size() != cells) {
      throw Error("codebook arrays have inconsistent sizes");
    }
  }
  if (weights.lambda_f < 0 || weights.lambda_q < 0 || weights.lambda_e < 0 ||
      weights.lambda_w != 0.0) {
    throw Error("invalid loss weights");
  }
}

FeatureSequence Downsample(const FeatureSequence& seq, int rate) {
  if (rate < 1) throw Error("downsample rate must be >= 1");
  if (rate == 1) return seq;
  const int out_rows = seq.rows == 0 ? 0 : CeilDiv(seq.rows, rate);
  FeatureSequence out(out_rows, seq.cols);
  for (int o = 0; o < out_rows; ++o) {
    const int lo = o * rate;
    const int hi = std::min(lo + rate, seq.rows);
    float* dst = out.row(o);
    for (int c = 0; c < seq.cols; ++c) {
      double acc = 0.0;
      for (int t = lo; t < hi; ++t) acc += seq.at(t, c);
      dst[c] = static_cast<float>(acc / (hi - lo));
    }
  }
  return out;
}

FeatureSequence Upsample(const FeatureSequence& seq, int rate, int target_len) {
  if (rate < 1) throw Error("upsample rate must be >= 1");
  if (target_len < 0) throw Error("invalid target length");
  if (CeilDiv(target_len, rate) != seq.rows) {
    throw Error("upsample length inconsistent with rate");
  }
  FeatureSequence out(target_len, seq.cols);
  for (int t = 0; t < target_len; ++t) {
    std::memcpy(out.row(t), seq.row(t / rate),
                static_cast<size_t>(seq.cols) * sizeof(float));
  }
  return out;
}

MSMCR Encode(const FeatureSequence& features, const MSMCModel& model) {
  return EncodeInternal(features, model, nullptr);
}

FeatureSequence Decode(const MSMCR& repr, const MSMCModel& model) {
  model.Validate();
  const int S = model.num_stages();
  if (static_cast<int>(repr.stages.size()) != S) {
    throw Error("representation stage count does not match model");
  }
  for (int s = 0; s + 1 < S; ++s) {
    const int ratio = model.stage_configs[s + 1].downsample_rate /
                      model.stage_configs[s].downsample_rate;
    if (CeilDiv(repr.stages[s].frames, ratio) != repr.stages[s + 1].frames) {
      throw Error("stage lengths inconsistent with downsample rates");
    }
  }

  const bool residual = model.coupling == CouplingMode::kResidual;
  FeatureSequence z;
  FeatureSequence zhat;
  for (int s = S - 1; s >= 0; --s) {
    const bool use_residual = residual && s < S - 1;
    z = ComposeStage(repr.stages[s].indices, repr.stages[s].frames,
                     model.codebooks[s], s < S - 1 ? &zhat : nullptr,
                     use_residual);
    if (s > 0) {
      const int ratio = model.stage_configs[s].downsample_rate /
                        model.stage_configs[s - 1].downsample_rate;
      zhat = Upsample(z, ratio, repr.stages[s - 1].frames);
    }
  }
  return z;
}

LossReport ComputeLosses(const FeatureSequence& features,
                         const MSMCModel& model) {
  EncodeCapture cap;
  MSMCR repr = EncodeInternal(features, model, &cap);
  const int S = model.num_stages();

  LossReport report;
  report.l_f = Mse(features, repr.stages[0].quantized);
  report.l_q_stage.resize(S);
  for (int s = 0; s < S; ++s) {
    const size_t n = cap.stage_input[s].data.size();
    report.l_q_stage[s] =
        n == 0 ? 0.0 : cap.sq_error_sum[s] / static_cast<double>(n);
    report.l_q += report.l_q_stage[s];
  }
  for (int s = 0; s + 1 < S; ++s) {
    report.l_e_pair.push_back(Mse(repr.stages[s].quantized, cap.zhat[s]));
    report.l_e += report.l_e_pair.back();
  }
  report.weighted_total = model.weights.lambda_f * report.l_f +
                          model.weights.lambda_q * report.l_q +
                          model.weights.lambda_e * report.l_e;
  return report;
}

}  // namespace msmcr
