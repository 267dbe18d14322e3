// include/tsr/ad.hpp

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

#ifndef TSR_AD_HPP_
#define TSR_AD_HPP_

#include <functional>
#include <vector>

#include "tsr/rng.hpp"
#include "tsr/types.hpp"

namespace tsr::ad {

// Reverse-mode autodiff over dense matrices. A Tape owns one step's graph;
// ops append nodes eagerly and record a pullback closure. Sequence tensors
// use the (channels x time) orientation throughout this namespace.
//
// Subgraphs rooted only at constants carry no pullbacks, so running a frozen
// module under the tape costs the same as a plain forward pass.
class Tape;

struct Var {
  Tape* tape = nullptr;
  int i = -1;
  bool valid() const { return tape != nullptr && i >= 0; }
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that accumulates gradient (parameters, probed inputs).
  Var leaf(Matrix value);
  // Leaf without gradient (data, frozen parameters).
  Var constant(Matrix value);

  const Matrix& val(Var v) const;
  // Gradient of the last backward() w.r.t. v; zeros if v was off-path.
  Matrix& grad(Var v);
  bool requires_grad(Var v) const;

  // Seeds d(loss)/d(loss) = 1 and runs all pullbacks in reverse order.
  // `loss` must be 1x1 and finite.
  void backward(Var loss);

  size_t size() const { return nodes_.size(); }

  // Low-level node construction for custom ops (see transducer loss).
  Var alloc(Matrix value, const std::vector<Var>& parents);
  void set_backward(Var v, std::function<void(Tape&)> fn);

 private:
  struct Node {
    Matrix value;
    Matrix grad;  // empty until touched
    bool requires_grad = false;
    std::function<void(Tape&)> backward;
  };
  std::vector<Node> nodes_;
};

// ---- elementwise and scalar ----
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div_elem(Var a, Var b);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var neg(Var a);
Var tanh_(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double negative_slope);
Var exp_(Var a);
Var log_floor(Var a, double floor);
Var square(Var a);
Var sqrt_(Var a);
Var abs_(Var a);
Var clamp(Var a, double lo, double hi);

// ---- reductions ----
Var sum_all(Var a);
Var mean_all(Var a);
Var dot(Var a, Var b);       // sum(a .* b), shapes equal
Var mean_cols(Var a);        // (D x T) -> (D x 1)
Var sum_cols(Var a);         // rowwise sum, (D x T) -> (D x 1)

// ---- shape and assembly ----
Var transpose(Var a);
Var broadcast_col(Var v, Eigen::Index t_count);   // (D x 1) -> (D x T)
Var add_colvec(Var a, Var v);                     // a + v broadcast over cols
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(Var a, Eigen::Index r0, Eigen::Index n);
Var slice_cols(Var a, Eigen::Index c0, Eigen::Index n);
Var reverse_cols(Var a);
Var pad_cols(Var a, Eigen::Index left, Eigen::Index right);

// ---- linear algebra ----
Var matmul(Var a, Var b);

// ---- sequence ops (channels x time) ----
// Tap-major patch matrix: row j*C + c of column t is a(c, t*stride + j*dilation).
Var im2col(Var a, int kernel, int stride, int dilation);
Var mean_pool_cols(Var a, int kernel, int stride);
// Sums length-L columns into a (1 x out_len) signal at hops of `stride`.
Var overlap_add(Var segments, int stride, Eigen::Index out_len);

// ---- normalization and regularization ----
Var softmax_cols(Var a);
Var log_softmax_cols(Var a);
// Per-channel (row) normalization over time: zero mean, unit variance.
Var instance_norm(Var a, double eps = 1e-8);
// Column-wise L2 normalization: y = x / sqrt(|x|^2 + eps).
Var normalize_cols(Var a, double eps = 1e-12);
// Inverted-scale dropout; identity in eval mode.
Var dropout(Var a, double rate, Rng& rng, bool train);

// ---- indexed selection ----
Var lookup_cols(Var table, const std::vector<int>& ids);
Var select_per_col(Var a, const std::vector<int>& row_ids);  // -> (1 x T)
// (D x T), (D x U) -> (D x T*U) with column t*U+u = a.col(t) + b.col(u).
Var pairwise_col_sum(Var a, Var b);

Var stop_gradient(Var a);

// Scalar convenience for 1x1 vars.
inline double scalar(Var v) {
  const Matrix& m = v.tape->val(v);
  TSR_CHECK(m.rows() == 1 && m.cols() == 1, "not_a_scalar");
  return m(0, 0);
}

}  // namespace tsr::ad

#endif  // TSR_AD_HPP_
