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

#include "msmcr/dsp.h"

#include <algorithm>
#include <cmath>
#include <vector>

namespace msmcr {
namespace dsp {

namespace {

constexpr double kPi = 3.14159265358979323846;

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

void CheckPcm(const Pcm& pcm) {
  if (pcm.samples.empty()) throw Error("empty signal");
  if (pcm.sample_rate <= 0) throw Error("invalid sample rate");
}

void Check24k(const Pcm& pcm) {
  CheckPcm(pcm);
  if (pcm.sample_rate != kSampleRate) throw Error("expected 24 kHz input");
}

// Reflection around the first and last sample, folded as many times as the
// requested index needs.
long ReflectIndex(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  long m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

// In-place radix-2 FFT. n must be a power of two.
void Fft(std::vector<double>& re, std::vector<double>& im) {
  const size_t n = re.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const double wr = std::cos(ang);
    const double wi = std::sin(ang);
    for (size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (size_t k = 0; k < len / 2; ++k) {
        const size_t a = i + k;
        const size_t b = i + k + len / 2;
        const double vr = re[b] * cr - im[b] * ci;
        const double vi = re[b] * ci + im[b] * cr;
        re[b] = re[a] - vr;
        im[b] = im[a] - vi;
        re[a] += vr;
        im[a] += vi;
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

// Triangular filterbank with edges uniform on the Mel scale over
// [kMelFmin, kMelFmax], triangle peak 1 (no area normalization).
std::vector<std::vector<double>> MelFilterbank() {
  const int bins = kFftSize / 2 + 1;
  const double mel_lo = HzToMel(kMelFmin);
  const double mel_hi = HzToMel(kMelFmax);
  std::vector<double> edges(kNumMels + 2);
  for (int i = 0; i < kNumMels + 2; ++i) {
    edges[i] = mel_lo + (mel_hi - mel_lo) * i / (kNumMels + 1);
  }
  std::vector<std::vector<double>> fb(kNumMels, std::vector<double>(bins, 0.0));
  for (int k = 0; k < bins; ++k) {
    const double mel_k =
        HzToMel(static_cast<double>(k) * kSampleRate / kFftSize);
    for (int m = 0; m < kNumMels; ++m) {
      double w = 0.0;
      if (mel_k >= edges[m] && mel_k <= edges[m + 1]) {
        w = (mel_k - edges[m]) / (edges[m + 1] - edges[m]);
      } else if (mel_k > edges[m + 1] && mel_k <= edges[m + 2]) {
        w = (edges[m + 2] - mel_k) / (edges[m + 2] - edges[m + 1]);
      }
      fb[m][k] = w;
    }
  }
  return fb;
}

double Sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = kPi * x;
  return std::sin(px) / px;
}

// Blackman window on [-1, 1].
double Blackman(double v) {
  if (v < -1.0 || v > 1.0) return 0.0;
  return 0.42 + 0.5 * std::cos(kPi * v) + 0.08 * std::cos(2.0 * kPi * v);
}

}  // namespace

std::string Fingerprint() {
  return "mel:v1;sr=24000;hop=300;win=1200;fft=2048;nmels=80;"
         "fmin=0;fmax=12000;melscale=htk;mag;ln;floor=1e-05;"
         "f0:acf;range=50-600;thr=0.45;gate=1e-08";
}

int NumFrames(long long num_samples) {
  return static_cast<int>((num_samples + kHopSamples - 1) / kHopSamples);
}

Pcm Resample(const Pcm& pcm, int target_rate) {
  CheckPcm(pcm);
  if (target_rate <= 0) throw Error("invalid target rate");
  if (target_rate == pcm.sample_rate) return pcm;

  const long long in_rate = pcm.sample_rate;
  const long long out_rate = target_rate;
  const long long in_len = static_cast<long long>(pcm.samples.size());
  const long long out_len = (in_len * out_rate + in_rate - 1) / in_rate;

  // Cutoff at the lower Nyquist, expressed as a fraction of the input rate.
  const double cutoff =
      std::min(1.0, static_cast<double>(out_rate) / static_cast<double>(in_rate));
  const int zero_crossings = 32;
  const double half_width = zero_crossings / cutoff;

  Pcm out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<size_t>(out_len));
  for (long long n = 0; n < out_len; ++n) {
    // Exact rational position of output sample n on the input time axis.
    const long long num = n * in_rate;
    const long long t_int = num / out_rate;
    const double t_frac =
        static_cast<double>(num % out_rate) / static_cast<double>(out_rate);
    const double t = static_cast<double>(t_int) + t_frac;

    const long long k_lo = static_cast<long long>(std::ceil(t - half_width));
    const long long k_hi = static_cast<long long>(std::floor(t + half_width));
    double acc = 0.0;
    for (long long k = std::max<long long>(0, k_lo);
         k <= std::min(in_len - 1, k_hi); ++k) {
      const double u = t - static_cast<double>(k);
      acc += pcm.samples[static_cast<size_t>(k)] * cutoff * Sinc(cutoff * u) *
             Blackman(u / half_width);
    }
    out.samples[static_cast<size_t>(n)] = static_cast<float>(acc);
  }
  return out;
}

FeatureSequence MelSpectrogram(const Pcm& pcm) {
  Check24k(pcm);
  const long n = static_cast<long>(pcm.samples.size());
  if (n < kHopSamples) throw Error("fewer than one hop of samples");

  const int frames = NumFrames(n);
  const auto fb = MelFilterbank();
  const int bins = kFftSize / 2 + 1;

  std::vector<double> window(kWinSamples);
  for (int i = 0; i < kWinSamples; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / kWinSamples);
  }

  const double log_floor = std::log(kLogFloorEnergy);
  FeatureSequence out(frames, kNumMels);
  std::vector<double> re(kFftSize), im(kFftSize);
  for (int t = 0; t < frames; ++t) {
    const long center = static_cast<long>(t) * kHopSamples + kHopSamples / 2;
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    for (int i = 0; i < kWinSamples; ++i) {
      const long src = ReflectIndex(center - kWinSamples / 2 + i, n);
      re[i] = pcm.samples[static_cast<size_t>(src)] * window[i];
    }
    Fft(re, im);
    float* row = out.row(t);
    for (int m = 0; m < kNumMels; ++m) {
      double energy = 0.0;
      for (int k = 0; k < bins; ++k) {
        if (fb[m][k] == 0.0) continue;
        energy += fb[m][k] * std::sqrt(re[k] * re[k] + im[k] * im[k]);
      }
      const double v = energy > 0.0 ? std::log(energy) : log_floor;
      row[m] = static_cast<float>(std::max(v, log_floor));
    }
  }
  return out;
}

F0Track ExtractF0(const Pcm& pcm) {
  Check24k(pcm);
  const long n = static_cast<long>(pcm.samples.size());
  const int frames = NumFrames(n);

  const int lag_min = static_cast<int>(kSampleRate / kF0Max);  // 40
  const int lag_max = static_cast<int>(kSampleRate / kF0Min);  // 480
  const int win = kWinSamples;

  F0Track track;
  track.f0_hz.assign(frames, 0.0f);
  track.voiced.assign(frames, 0);

  std::vector<double> x(win);
  std::vector<double> r(lag_max + 2, 0.0);
  for (int t = 0; t < frames; ++t) {
    const long center = static_cast<long>(t) * kHopSamples + kHopSamples / 2;
    double power = 0.0;
    for (int i = 0; i < win; ++i) {
      const long src = center - win / 2 + i;
      x[i] = (src >= 0 && src < n) ? pcm.samples[static_cast<size_t>(src)] : 0.0;
      power += x[i] * x[i];
    }
    power /= win;
    if (power < kVoicingPowerGate) continue;

    // Normalized cross-correlation between the window and its lagged copy.
    for (int lag = lag_min - 1; lag <= lag_max + 1; ++lag) {
      double num = 0.0, e0 = 0.0, e1 = 0.0;
      for (int i = 0; i + lag < win; ++i) {
        num += x[i] * x[i + lag];
        e0 += x[i] * x[i];
        e1 += x[i + lag] * x[i + lag];
      }
      const double denom = std::sqrt(e0 * e1);
      r[lag] = denom > 0.0 ? num / denom : 0.0;
    }

    double r_max = -2.0;
    for (int lag = lag_min; lag <= lag_max; ++lag) r_max = std::max(r_max, r[lag]);
    if (r_max < kVoicingThreshold) continue;

    // Smallest local maximum close to the global one, to avoid octave-down
    // picks on strongly periodic signals.
    int best = -1;
    for (int lag = lag_min; lag <= lag_max; ++lag) {
      if (r[lag] >= 0.85 * r_max && r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1]) {
        best = lag;
        break;
      }
    }
    if (best < 0) {
      for (int lag = lag_min; lag <= lag_max; ++lag) {
        if (r[lag] == r_max) {
          best = lag;
          break;
        }
      }
    }

    // Parabolic refinement around the peak.
    double lag_refined = best;
    const double ym = r[best - 1], y0 = r[best], yp = r[best + 1];
    const double denom = ym - 2.0 * y0 + yp;
    if (denom < 0.0) {
      const double delta = 0.5 * (ym - yp) / denom;
      if (delta > -1.0 && delta < 1.0) lag_refined = best + delta;
    }

    double f0 = kSampleRate / lag_refined;
    f0 = std::clamp(f0, kF0Min, kF0Max);
    track.f0_hz[t] = static_cast<float>(f0);
    track.voiced[t] = 1;
  }
  return track;
}

}  // namespace dsp
}  // namespace msmcr
