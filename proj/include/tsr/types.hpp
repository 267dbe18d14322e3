// include/tsr/types.hpp

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

#ifndef TSR_TYPES_HPP_
#define TSR_TYPES_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tsr/check.hpp"

namespace tsr {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixXc = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

// All numerics run in 64-bit; the gradient tolerances in the tests assume it.
using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using ComplexMatrix = MatrixXc<double>;

constexpr int kDefaultSampleRate = 16000;

// Mono waveform. Samples are dimensionless amplitudes, nominally in [-1, 1].
struct AudioSignal {
  Vector samples;
  int sample_rate = kDefaultSampleRate;

  Eigen::Index length() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  void validate() const {
    TSR_CHECK(samples.size() > 0, "empty_signal: audio has no samples");
    TSR_CHECK(sample_rate > 0, "bad_sample_rate: " << sample_rate);
    TSR_CHECK(samples.allFinite(), "non_finite_samples");
  }
};

// A T x D matrix of feature frames plus the frame geometry that produced it.
struct FeatureSequence {
  Matrix frames;  // rows = frames (time), cols = feature dimensions
  double frame_shift_s = 0.010;
  double frame_length_s = 0.025;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }
};

// Character-level transcript over the closed toy vocabulary. Token ids are
// 0-based indices into the vocabulary; the transducer blank lives outside
// this range (it is appended as id |V| on the lattice axis).
struct TokenSequence {
  std::vector<int> tokens;

  int length() const { return static_cast<int>(tokens.size()); }
  bool empty() const { return tokens.empty(); }
};

// Fixed-dimension speaker identity vector.
struct SpeakerEmbedding {
  Vector v;
  enum class Source { kEnrollment, kMixturePooled } source = Source::kEnrollment;

  Eigen::Index dim() const { return v.size(); }
  SpeakerEmbedding normalized() const {
    SpeakerEmbedding out = *this;
    double n = v.norm();
    if (n > 0) out.v /= n;
    return out;
  }
};

// Per-frame uncertainty features aligned to recognizer (post-downsampling)
// frames: a scalar speaker-identity entropy track and a hidden-state matrix
// from the enhancement uncertainty estimator.
struct UncertaintyFeatures {
  Vector u_spk;    // T' entropies in nats
  Matrix u_speech; // T' x 32
};

}  // namespace tsr

#endif  // TSR_TYPES_HPP_
