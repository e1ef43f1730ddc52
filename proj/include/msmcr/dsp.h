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

#ifndef MSMCR_DSP_H_
#define MSMCR_DSP_H_

#include <string>

#include "msmcr/types.h"

namespace msmcr {
namespace dsp {

// Front-end configuration. All extracted features and trained models record
// Fingerprint() so that files produced under different settings never mix.
constexpr int kSampleRate = 24000;
constexpr int kHopSamples = 300;  // 12.5 ms
constexpr int kWinSamples = 1200;
constexpr int kFftSize = 2048;
constexpr int kNumMels = 80;
constexpr double kMelFmin = 0.0;
constexpr double kMelFmax = 12000.0;
constexpr double kLogFloorEnergy = 1e-5;  // entries = max(ln(e), ln(1e-5))

constexpr double kF0Min = 50.0;
constexpr double kF0Max = 600.0;
constexpr double kVoicingThreshold = 0.45;  // on normalized autocorrelation
constexpr double kVoicingPowerGate = 1e-8;  // mean squared amplitude

// Identifies every front-end decision baked into this build.
std::string Fingerprint();

// Number of 12.5 ms frames produced for a signal of `num_samples` samples:
// ceil(num_samples / 300). Shared by the Mel and F0 extractors.
int NumFrames(long long num_samples);

// Windowed-sinc resampler with cutoff at the lower of the two Nyquist
// frequencies. Identity (bit-exact copy) when rates already match.
Pcm Resample(const Pcm& pcm, int target_rate);

// 80-dim log-scale Mel spectrogram. Requires 24 kHz input with at least one
// hop of samples. Frames are centered with reflection padding; magnitude
// filterbank; natural log with floor ln(1e-5).
FeatureSequence MelSpectrogram(const Pcm& pcm);

// Autocorrelation pitch tracker over 50-600 Hz with a clarity threshold and
// an energy gate. One (f0, voiced) pair per 12.5 ms frame; frame count
// always equals MelSpectrogram's for the same input.
F0Track ExtractF0(const Pcm& pcm);

}  // namespace dsp
}  // namespace msmcr

#endif  // MSMCR_DSP_H_
