// src/dsp.cpp

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

#include "tsr/dsp.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <tuple>

namespace tsr::dsp {

void StftConfig::validate(int sample_rate) const {
  TSR_CHECK(sample_rate > 0, "bad_sample_rate: " << sample_rate);
  TSR_CHECK(window_length_s > 0 && shift_s > 0, "bad_frame_geometry");
  int win = window_samples(sample_rate);
  TSR_CHECK(fft_size >= win,
            "fft_too_small: fft_size " << fft_size << " < window " << win);
  TSR_CHECK(shift_samples(sample_rate) >= 1, "bad_shift");
}

void MfccConfig::validate(int sample_rate) const {
  stft.validate(sample_rate);
  TSR_CHECK(mel_bins >= 1, "bad_mel_bins: " << mel_bins);
  TSR_CHECK(mfcc_dim >= 1 && mfcc_dim <= mel_bins,
            "bad_mfcc_dim: " << mfcc_dim << " with " << mel_bins << " mel bins");
  TSR_CHECK(log_floor > 0, "bad_log_floor");
}

Vector hann_window(int length) {
  Vector w(length);
  for (int i = 0; i < length; ++i)
    w(i) = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / length);
  return w;
}

Matrix frame_signal(const Vector& x, int win, int shift) {
  TSR_CHECK(x.size() >= win, "signal_too_short: " << x.size()
                                                  << " samples < window " << win);
  Eigen::Index t_count = frame_count(x.size(), win, shift);
  Matrix frames(win, t_count);
  for (Eigen::Index t = 0; t < t_count; ++t)
    frames.col(t) = x.segment(t * shift, win);
  return frames;
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Matrix make_mel_filterbank(int mel_bins, int fft_size, int sample_rate) {
  const int num_bins = fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(0.0);
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  Vector edges(mel_bins + 2);
  for (int i = 0; i < mel_bins + 2; ++i)
    edges(i) = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (mel_bins + 1));

  Matrix fb = Matrix::Zero(mel_bins, num_bins);
  for (int m = 0; m < mel_bins; ++m) {
    double lo = edges(m), mid = edges(m + 1), hi = edges(m + 2);
    for (int k = 0; k < num_bins; ++k) {
      double f = static_cast<double>(k) * sample_rate / fft_size;
      if (f > lo && f < mid)
        fb(m, k) = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        fb(m, k) = (hi - f) / (hi - mid);
    }
  }
  return fb;
}

Matrix make_dct2_orthonormal(int out_dim, int in_dim) {
  Matrix d(out_dim, in_dim);
  const double scale0 = std::sqrt(1.0 / in_dim);
  const double scale = std::sqrt(2.0 / in_dim);
  for (int k = 0; k < out_dim; ++k)
    for (int n = 0; n < in_dim; ++n)
      d(k, n) = (k == 0 ? scale0 : scale) *
                std::cos(M_PI * (n + 0.5) * k / in_dim);
  return d;
}

}  // namespace

MfccKernel::MfccKernel(const MfccConfig& config, int rate)
    : cfg(config), sample_rate(rate) {
  cfg.validate(rate);
  win = cfg.stft.window_samples(rate);
  shift = cfg.stft.shift_samples(rate);
  const int num_bins = cfg.stft.num_bins();
  Vector w = hann_window(win);

  dft_cos.resize(num_bins, win);
  dft_msin.resize(num_bins, win);
  for (int f = 0; f < num_bins; ++f) {
    for (int n = 0; n < win; ++n) {
      double phase = 2.0 * M_PI * f * n / cfg.stft.fft_size;
      dft_cos(f, n) = std::cos(phase) * w(n);
      dft_msin(f, n) = -std::sin(phase) * w(n);
    }
  }
  mel = make_mel_filterbank(cfg.mel_bins, cfg.stft.fft_size, rate);
  dct = make_dct2_orthonormal(cfg.mfcc_dim, cfg.mel_bins);
}

Matrix MfccKernel::apply_frames(const Matrix& frames) const {
  Matrix re = dft_cos * frames;
  Matrix im = dft_msin * frames;
  Matrix power = re.array().square() + im.array().square();
  Matrix mel_energy = mel * power;
  Matrix log_mel = (mel_energy.array() + cfg.log_floor).log();
  return dct * log_mel;  // mfcc_dim x T
}

const MfccKernel& mfcc_kernel(const MfccConfig& cfg, int sample_rate) {
  using Key = std::tuple<double, double, int, int, int, double, int>;
  static std::mutex mu;
  static std::map<Key, std::unique_ptr<const MfccKernel>> cache;
  Key key{cfg.stft.window_length_s, cfg.stft.shift_s, cfg.stft.fft_size,
          cfg.mel_bins, cfg.mfcc_dim, cfg.log_floor, sample_rate};
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, std::make_unique<const MfccKernel>(cfg, sample_rate)).first;
  return *it->second;
}

ComplexMatrix stft(const AudioSignal& signal, const StftConfig& cfg) {
  signal.validate();
  cfg.validate(signal.sample_rate);
  MfccConfig mc;
  mc.stft = cfg;
  const MfccKernel& k = mfcc_kernel(mc, signal.sample_rate);
  Matrix frames = frame_signal(signal.samples, k.win, k.shift);
  Matrix re = k.dft_cos * frames;   // F x T
  Matrix im = k.dft_msin * frames;  // F x T
  ComplexMatrix out(frames.cols(), cfg.num_bins());
  for (Eigen::Index t = 0; t < frames.cols(); ++t)
    for (int f = 0; f < cfg.num_bins(); ++f)
      out(t, f) = std::complex<double>(re(f, t), im(f, t));
  return out;
}

Matrix stft_magnitude(const AudioSignal& signal, const StftConfig& cfg) {
  signal.validate();
  cfg.validate(signal.sample_rate);
  MfccConfig mc;
  mc.stft = cfg;
  const MfccKernel& k = mfcc_kernel(mc, signal.sample_rate);
  Matrix frames = frame_signal(signal.samples, k.win, k.shift);
  Matrix re = k.dft_cos * frames;
  Matrix im = k.dft_msin * frames;
  return (re.array().square() + im.array().square()).sqrt();
}

FeatureSequence mfcc(const AudioSignal& signal, const MfccConfig& cfg) {
  signal.validate();
  cfg.validate(signal.sample_rate);
  const MfccKernel& k = mfcc_kernel(cfg, signal.sample_rate);
  Matrix frames = frame_signal(signal.samples, k.win, k.shift);
  FeatureSequence out;
  out.frames = k.apply_frames(frames).transpose();  // T x mfcc_dim
  out.frame_shift_s = cfg.stft.shift_s;
  out.frame_length_s = cfg.stft.window_length_s;
  return out;
}

double si_snr(const AudioSignal& estimate, const AudioSignal& reference) {
  estimate.validate();
  reference.validate();
  TSR_CHECK(estimate.samples.size() == reference.samples.size(),
            "length_mismatch: estimate " << estimate.samples.size()
                                         << " vs reference "
                                         << reference.samples.size());
  Vector est = estimate.samples.array() - estimate.samples.mean();
  Vector ref = reference.samples.array() - reference.samples.mean();
  double ref_energy = ref.squaredNorm();
  TSR_CHECK(ref_energy > 0.0, "zero_energy_reference");

  double alpha = est.dot(ref) / ref_energy;
  Vector proj = alpha * ref;
  Vector err = est - proj;
  double num = proj.squaredNorm();
  double den = err.squaredNorm();
  if (den == 0.0) return kSiSnrClampDb;
  if (num == 0.0) return -kSiSnrClampDb;
  double db = 10.0 * std::log10(num / den);
  if (db > kSiSnrClampDb) return kSiSnrClampDb;
  if (db < -kSiSnrClampDb) return -kSiSnrClampDb;
  return db;
}

double gain_for_sir(const AudioSignal& target, const AudioSignal& interferer,
                    double sir_db) {
  target.validate();
  interferer.validate();
  double p_t = signal_power(target.samples);
  double p_i = signal_power(interferer.samples);
  TSR_CHECK(p_t > 0.0, "zero_energy_target");
  TSR_CHECK(p_i > 0.0, "zero_energy_interferer");
  return std::sqrt(p_t / (p_i * std::pow(10.0, sir_db / 10.0)));
}

}  // namespace tsr::dsp
