// include/tsr/dsp.hpp

// Copyright 2026  TSR Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABILITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef TSR_DSP_HPP_
#define TSR_DSP_HPP_

#include <cmath>

#include "tsr/types.hpp"

namespace tsr::dsp {

struct StftConfig {
  double window_length_s = 0.025;
  double shift_s = 0.010;
  int fft_size = 512;

  int window_samples(int sample_rate) const {
    return static_cast<int>(std::lround(window_length_s * sample_rate));
  }
  int shift_samples(int sample_rate) const {
    return static_cast<int>(std::lround(shift_s * sample_rate));
  }
  int num_bins() const { return fft_size / 2 + 1; }
  void validate(int sample_rate) const;
};

struct MfccConfig {
  StftConfig stft;
  int mel_bins = 40;
  int mfcc_dim = 40;
  double log_floor = 1e-10;  // added to mel energies before the log

  void validate(int sample_rate) const;
};

// Number of analysis frames for a signal of `len` samples:
// 1 + floor((len - win) / shift). Requires len >= win.
inline Eigen::Index frame_count(Eigen::Index len, int win, int shift) {
  return 1 + (len - win) / shift;
}

// Periodic Hann window.
Vector hann_window(int length);

// Copies strided windows of `x` into columns of a (win x T) matrix.
Matrix frame_signal(const Vector& x, int win, int shift);

// Precomputed linear maps for one (config, sample rate) pair. The Hann
// window is folded into the DFT matrices, so "frames -> spectrum" is a plain
// matrix product; the differentiable feature path reuses these constants and
// therefore agrees bit-for-bit with the plain functions below.
struct MfccKernel {
  MfccKernel(const MfccConfig& cfg, int sample_rate);

  MfccConfig cfg;
  int sample_rate;
  int win, shift;
  Matrix dft_cos;   // F x win, window-folded cos(2*pi*f*n/N) * w[n]
  Matrix dft_msin;  // F x win, window-folded -sin(2*pi*f*n/N) * w[n]
  Matrix mel;       // mel_bins x F triangular filters
  Matrix dct;       // mfcc_dim x mel_bins, orthonormal DCT-II

  // (win x T) frames -> (mfcc_dim x T) coefficients.
  Matrix apply_frames(const Matrix& frames) const;
};

// Shared, lazily built kernel cache (read-only after construction).
const MfccKernel& mfcc_kernel(const MfccConfig& cfg, int sample_rate);

// Complex spectrogram, T x F with F = fft_size/2 + 1.
// Throws "signal_too_short" if the signal is shorter than one window.
ComplexMatrix stft(const AudioSignal& signal, const StftConfig& cfg);

// STFT magnitudes as an F x T matrix (mixture-embedder input orientation).
Matrix stft_magnitude(const AudioSignal& signal, const StftConfig& cfg);

// Mel-frequency cepstra, frames are T x mfcc_dim.
FeatureSequence mfcc(const AudioSignal& signal, const MfccConfig& cfg);

// Scale-invariant signal-to-noise ratio in dB, clamped to [-60, 60]. Both
// signals are mean-centered before the zero-mean projection. Throws on
// length mismatch or a reference with no energy after centering.
double si_snr(const AudioSignal& estimate, const AudioSignal& reference);

inline constexpr double kSiSnrClampDb = 60.0;

// Mean squared sample over the full utterance.
inline double signal_power(const Vector& x) {
  TSR_CHECK(x.size() > 0, "empty_signal");
  return x.squaredNorm() / static_cast<double>(x.size());
}

// Gain g such that mixing `target + g * interferer` measures `sir_db`:
// g = sqrt(P_t / (P_i * 10^(sir/10))). Throws on zero-energy inputs.
double gain_for_sir(const AudioSignal& target, const AudioSignal& interferer,
                    double sir_db);

}  // namespace tsr::dsp

#endif  // TSR_DSP_HPP_
