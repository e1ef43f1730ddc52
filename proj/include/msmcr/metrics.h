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

#ifndef MSMCR_METRICS_H_
#define MSMCR_METRICS_H_

#include <string>
#include <vector>

#include "msmcr/types.h"

namespace msmcr {

// Mel-cepstral distortion recipe: DCT-II cepstra of each log-Mel row,
// coefficients 1..24 (c0 excluded), no time warping.
constexpr int kMcdNumCoeffs = 24;
extern const char kMcdRecipe[];

struct MetricsReport {
  double mcd_db = 0.0;
  double f0_rmse_hz = 0.0;
  double f0_vuv_pct = 0.0;
  double frame_mse = 0.0;
  long long n_utterances = 0;
  long long n_frames_compared = 0;
  long long n_f0_frames_compared = 0;  // both-voiced frames behind f0_rmse_hz
};

// Frame-aligned MCD in dB:
//   per frame (10/ln 10) * sqrt(2 * sum_{i=1..24} (c_i - c'_i)^2),
// averaged over frames. Inputs must have equal shape and > 24 columns.
double Mcd(const FeatureSequence& ref, const FeatureSequence& hyp);

// Mean squared error over all entries of two equal-shape sequences.
double FrameMse(const FeatureSequence& ref, const FeatureSequence& hyp);

struct F0RmseResult {
  double rmse_hz = 0.0;
  long long n_both_voiced = 0;  // 0 means the value is vacuous
};

// RMSE over frames voiced in both tracks; 0 (flagged) when no frame is.
F0RmseResult F0Rmse(const F0Track& ref, const F0Track& hyp);

// Percentage of frames whose voiced flags disagree.
double F0Vuv(const F0Track& ref, const F0Track& hyp);

// Frame-count-weighted means; counts summed. MCD and frame MSE are weighted
// by n_frames_compared, the F0 metrics by n_f0_frames_compared.
MetricsReport Aggregate(const std::vector<MetricsReport>& reports);

// JSON serialization with the exact field names of MetricsReport.
std::string MetricsToJson(const MetricsReport& report,
                          const std::vector<std::pair<std::string, MetricsReport>>*
                              per_utterance = nullptr);

}  // namespace msmcr

#endif  // MSMCR_METRICS_H_
