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

#include "msmcr/metrics.h"

#include <cmath>
#include <vector>

#include "json.hpp"

namespace msmcr {

const char kMcdRecipe[] =
    "dct2(ln-mel), coeffs 1..24, (10/ln10)*sqrt(2*sum(dc^2)), frame-aligned";

namespace {

constexpr double kPi = 3.14159265358979323846;

void CheckSameShape(const FeatureSequence& a, const FeatureSequence& b) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw Error("sequence length or dimension mismatch");
  }
}

void CheckSameLength(const F0Track& a, const F0Track& b) {
  if (a.frames() != b.frames()) throw Error("F0 track length mismatch");
}

// DCT-II cepstra of one log-Mel row, coefficients 1..kMcdNumCoeffs.
void Cepstra(const float* row, int cols, double* out) {
  const double scale = std::sqrt(2.0 / cols);
  for (int i = 1; i <= kMcdNumCoeffs; ++i) {
    double acc = 0.0;
    for (int m = 0; m < cols; ++m) {
      acc += static_cast<double>(row[m]) *
             std::cos(kPi * i * (m + 0.5) / cols);
    }
    out[i - 1] = scale * acc;
  }
}

}  // namespace

double Mcd(const FeatureSequence& ref, const FeatureSequence& hyp) {
  CheckSameShape(ref, hyp);
  if (ref.cols <= kMcdNumCoeffs) {
    throw Error("too few Mel channels for cepstral distortion");
  }
  if (ref.rows == 0) return 0.0;
  const double k = 10.0 / std::log(10.0);
  double total = 0.0;
  std::vector<double> cr(kMcdNumCoeffs), ch(kMcdNumCoeffs);
  for (int t = 0; t < ref.rows; ++t) {
    Cepstra(ref.row(t), ref.cols, cr.data());
    Cepstra(hyp.row(t), hyp.cols, ch.data());
    double ss = 0.0;
    for (int i = 0; i < kMcdNumCoeffs; ++i) {
      const double d = cr[i] - ch[i];
      ss += d * d;
    }
    total += k * std::sqrt(2.0 * ss);
  }
  return total / ref.rows;
}

double FrameMse(const FeatureSequence& ref, const FeatureSequence& hyp) {
  CheckSameShape(ref, hyp);
  if (ref.data.empty()) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < ref.data.size(); ++i) {
    const double d = static_cast<double>(ref.data[i]) - hyp.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(ref.data.size());
}

F0RmseResult F0Rmse(const F0Track& ref, const F0Track& hyp) {
  CheckSameLength(ref, hyp);
  F0RmseResult out;
  double acc = 0.0;
  for (int t = 0; t < ref.frames(); ++t) {
    if (ref.voiced[t] && hyp.voiced[t]) {
      const double d = static_cast<double>(ref.f0_hz[t]) - hyp.f0_hz[t];
      acc += d * d;
      out.n_both_voiced += 1;
    }
  }
  if (out.n_both_voiced > 0) {
    out.rmse_hz = std::sqrt(acc / static_cast<double>(out.n_both_voiced));
  }
  return out;
}

double F0Vuv(const F0Track& ref, const F0Track& hyp) {
  CheckSameLength(ref, hyp);
  if (ref.frames() == 0) return 0.0;
  long long mismatches = 0;
  for (int t = 0; t < ref.frames(); ++t) {
    if ((ref.voiced[t] != 0) != (hyp.voiced[t] != 0)) ++mismatches;
  }
  return 100.0 * static_cast<double>(mismatches) /
         static_cast<double>(ref.frames());
}

MetricsReport Aggregate(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw Error("cannot aggregate empty report list");
  MetricsReport out;
  double frame_w = 0.0, f0_w = 0.0;
  for (const MetricsReport& r : reports) {
    const double wf = static_cast<double>(r.n_frames_compared);
    const double wv = static_cast<double>(r.n_f0_frames_compared);
    out.mcd_db += wf * r.mcd_db;
    out.frame_mse += wf * r.frame_mse;
    out.f0_rmse_hz += wv * r.f0_rmse_hz;
    out.f0_vuv_pct += wv * r.f0_vuv_pct;
    frame_w += wf;
    f0_w += wv;
    out.n_utterances += r.n_utterances;
    out.n_frames_compared += r.n_frames_compared;
    out.n_f0_frames_compared += r.n_f0_frames_compared;
  }
  if (frame_w > 0.0) {
    out.mcd_db /= frame_w;
    out.frame_mse /= frame_w;
  }
  if (f0_w > 0.0) {
    out.f0_rmse_hz /= f0_w;
    out.f0_vuv_pct /= f0_w;
  }
  return out;
}

namespace {

nlohmann::json ReportJson(const MetricsReport& r) {
  nlohmann::json j;
  j["mcd_db"] = r.mcd_db;
  j["f0_rmse_hz"] = r.f0_rmse_hz;
  j["f0_vuv_pct"] = r.f0_vuv_pct;
  j["frame_mse"] = r.frame_mse;
  j["n_utterances"] = r.n_utterances;
  j["n_frames_compared"] = r.n_frames_compared;
  j["n_f0_frames_compared"] = r.n_f0_frames_compared;
  return j;
}

}  // namespace

std::string MetricsToJson(
    const MetricsReport& report,
    const std::vector<std::pair<std::string, MetricsReport>>* per_utterance) {
  nlohmann::json j = ReportJson(report);
  j["mcd_recipe"] = kMcdRecipe;
  if (per_utterance != nullptr) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [id, r] : *per_utterance) {
      nlohmann::json u = ReportJson(r);
      u["utterance_id"] = id;
      arr.push_back(std::move(u));
    }
    j["per_utterance"] = std::move(arr);
  }
  return j.dump(2) + "\n";
}

}  // namespace msmcr
