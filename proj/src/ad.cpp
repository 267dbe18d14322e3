// src/ad.cpp

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

#include "tsr/ad.hpp"

#include <cmath>

namespace tsr::ad {

Var Tape::leaf(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), true, nullptr});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), false, nullptr});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Tape::val(Var v) const {
  TSR_CHECK(v.tape == this && v.i >= 0 && v.i < static_cast<int>(nodes_.size()),
            "bad_var");
  return nodes_[v.i].value;
}

Matrix& Tape::grad(Var v) {
  TSR_CHECK(v.tape == this && v.i >= 0 && v.i < static_cast<int>(nodes_.size()),
            "bad_var");
  Node& n = nodes_[v.i];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

bool Tape::requires_grad(Var v) const {
  TSR_CHECK(v.tape == this && v.i >= 0, "bad_var");
  return nodes_[v.i].requires_grad;
}

Var Tape::alloc(Matrix value, const std::vector<Var>& parents) {
  bool rg = false;
  for (Var p : parents) {
    TSR_CHECK(p.tape == this, "var_from_other_tape");
    rg = rg || nodes_[p.i].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Matrix(), rg, nullptr});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::set_backward(Var v, std::function<void(Tape&)> fn) {
  if (nodes_[v.i].requires_grad) nodes_[v.i].backward = std::move(fn);
}

void Tape::backward(Var loss) {
  const Matrix& lv = val(loss);
  TSR_CHECK(lv.rows() == 1 && lv.cols() == 1, "backward_needs_scalar_loss");
  TSR_REQUIRE_RUNTIME(std::isfinite(lv(0, 0)), "non_finite_loss: " << lv(0, 0));
  grad(loss)(0, 0) = 1.0;
  for (int i = loss.i; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.backward && n.grad.size() != 0) n.backward(*this);
  }
}

namespace {

Tape& tp(Var a) {
  TSR_CHECK(a.valid(), "invalid_var");
  return *a.tape;
}

void check_same_tape(Var a, Var b) {
  TSR_CHECK(a.tape == b.tape, "vars_from_different_tapes");
}

void check_same_shape(const Matrix& x, const Matrix& y, const char* op) {
  TSR_CHECK(x.rows() == y.rows() && x.cols() == y.cols(),
            "shape_mismatch in " << op << ": (" << x.rows() << "," << x.cols()
                                 << ") vs (" << y.rows() << "," << y.cols()
                                 << ")");
}

// Unary op whose pullback is an elementwise multiplier computed at forward
// time (captured by value).
Var unary_elemwise(Var a, Matrix value, Matrix dydx) {
  Tape& t = tp(a);
  Var out = t.alloc(std::move(value), {a});
  t.set_backward(out, [a, out, m = std::move(dydx)](Tape& t2) {
    t2.grad(a).array() += t2.grad(out).array() * m.array();
  });
  return out;
}

}  // namespace

Var add(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = tp(a);
  check_same_shape(t.val(a), t.val(b), "add");
  Var out = t.alloc(t.val(a) + t.val(b), {a, b});
  t.set_backward(out, [a, b, out](Tape& t2) {
    if (t2.requires_grad(a)) t2.grad(a) += t2.grad(out);
    if (t2.requires_grad(b)) t2.grad(b) += t2.grad(out);
  });
  return out;
}

Var sub(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = tp(a);
  check_same_shape(t.val(a), t.val(b), "sub");
  Var out = t.alloc(t.val(a) - t.val(b), {a, b});
  t.set_backward(out, [a, b, out](Tape& t2) {
    if (t2.requires_grad(a)) t2.grad(a) += t2.grad(out);
    if (t2.requires_grad(b)) t2.grad(b) -= t2.grad(out);
  });
  return out;
}

Var mul(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = tp(a);
  check_same_shape(t.val(a), t.val(b), "mul");
  Var out = t.alloc(t.val(a).cwiseProduct(t.val(b)), {a, b});
  t.set_backward(out, [a, b, out](Tape& t2) {
    if (t2.requires_grad(a))
      t2.grad(a).array() += t2.grad(out).array() * t2.val(b).array();
    if (t2.requires_grad(b))
      t2.grad(b).array() += t2.grad(out).array() * t2.val(a).array();
  });
  return out;
}

Var div_elem(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = tp(a);
  check_same_shape(t.val(a), t.val(b), "div_elem");
  Var out = t.alloc(t.val(a).cwiseQuotient(t.val(b)), {a, b});
  t.set_backward(out, [a, b, out](Tape& t2) {
    const auto& bv = t2.val(b).array();
    if (t2.requires_grad(a)) t2.grad(a).array() += t2.grad(out).array() / bv;
    if (t2.requires_grad(b))
      t2.grad(b).array() -=
          t2.grad(out).array() * t2.val(out).array() / bv;
  });
  return out;
}

Var scale(Var a, double c) {
  Tape& t = tp(a);
  Var out = t.alloc(t.val(a) * c, {a});
  t.set_backward(out, [a, out, c](Tape& t2) { t2.grad(a) += c * t2.grad(out); });
  return out;
}

Var add_scalar(Var a, double c) {
  Tape& t = tp(a);
  Var out = t.alloc(t.val(a).array() + c, {a});
  t.set_backward(out, [a, out](Tape& t2) { t2.grad(a) += t2.grad(out); });
  return out;
}

Var neg(Var a) { return scale(a, -1.0); }

Var tanh_(Var a) {
  Tape& t = tp(a);
  Matrix y = t.val(a).array().tanh();
  Matrix d = 1.0 - y.array().square();
  return unary_elemwise(a, std::move(y), std::move(d));
}

Var sigmoid(Var a) {
  Tape& t = tp(a);
  Matrix y = (1.0 / (1.0 + (-t.val(a).array()).exp()));
  Matrix d = y.array() * (1.0 - y.array());
  return unary_elemwise(a, std::move(y), std::move(d));
}

Var relu(Var a) {
  Tape& t = tp(a);
  Matrix y = t.val(a).cwiseMax(0.0);
  Matrix d = (t.val(a).array() > 0.0).cast<double>();
  return unary_elemwise(a, std::move(y), std::move(d));
}

Var leaky_relu(Var a, double negative_slope) {
  Tape& t = tp(a);
  const auto& x = t.val(a).array();
  Matrix y = (x > 0.0).select(t.val(a), negative_slope * t.val(a));
  Matrix d = (x > 0.0).select(Matrix::Ones(x.rows(), x.cols()),
                              Matrix::Constant(x.rows(), x.cols(), negative_slope));
  return unary_elemwise(a, std::move(y), std::move(d));
}

Var exp_(Var a) {
  Tape& t = tp(a);
  Matrix y = t.val(a).array().exp();
  Matrix d = y;
  return unary_elemwise(a, std::move(y), std::move(d));
}

Var log_floor(Var a, double floor) {
  Tape& t = tp(a);
  Matrix shifted = t.val(a).array() + floor;
  TSR_CHECK((shifted.array() > 0.0).all(), "log_of_nonpositive");
  Matrix y = shifted.array().log();
  Matrix d = shifted.array().inverse();
  return unary_elemwise(a, std::move(y), std::move(d));
}

Var square(Var a) {
  Tape& t = tp(a);
  Matrix y = t.val(a).array().square();
  Matrix d = 2.0 * t.val(a).array();
  return unary_elemwise(a, std::move(y), std::move(d));
}

Var sqrt_(Var a) {
  Tape& t = tp(a);
  TSR_CHECK((t.val(a).array() > 0.0).all(), "sqrt_of_nonpositive");
  Matrix y = t.val(a).array().sqrt();
  Matrix d = 0.5 * y.array().inverse();
  return unary_elemwise(a, std::move(y), std::move(d));
}

Var abs_(Var a) {
  Tape& t = tp(a);
  Matrix y = t.val(a).array().abs();
  Matrix d = t.val(a).array().sign();  // subgradient 0 at the kink
  return unary_elemwise(a, std::move(y), std::move(d));
}

Var clamp(Var a, double lo, double hi) {
  Tape& t = tp(a);
  const auto& x = t.val(a).array();
  Matrix y = x.min(hi).max(lo);
  Matrix d = ((x > lo) && (x < hi)).cast<double>();
  return unary_elemwise(a, std::move(y), std::move(d));
}

Var sum_all(Var a) {
  Tape& t = tp(a);
  Matrix y(1, 1);
  y(0, 0) = t.val(a).sum();
  Var out = t.alloc(std::move(y), {a});
  t.set_backward(out, [a, out](Tape& t2) {
    t2.grad(a).array() += t2.grad(out)(0, 0);
  });
  return out;
}

Var mean_all(Var a) {
  Tape& t = tp(a);
  double n = static_cast<double>(t.val(a).size());
  Matrix y(1, 1);
  y(0, 0) = t.val(a).sum() / n;
  Var out = t.alloc(std::move(y), {a});
  t.set_backward(out, [a, out, n](Tape& t2) {
    t2.grad(a).array() += t2.grad(out)(0, 0) / n;
  });
  return out;
}

Var dot(Var a, Var b) { return sum_all(mul(a, b)); }

Var mean_cols(Var a) {
  Tape& t = tp(a);
  double n = static_cast<double>(t.val(a).cols());
  Var out = t.alloc(t.val(a).rowwise().mean(), {a});
  t.set_backward(out, [a, out, n](Tape& t2) {
    t2.grad(a).colwise() += Vector(t2.grad(out).col(0) / n);
  });
  return out;
}

Var sum_cols(Var a) {
  Tape& t = tp(a);
  Var out = t.alloc(t.val(a).rowwise().sum(), {a});
  t.set_backward(out, [a, out](Tape& t2) {
    t2.grad(a).colwise() += Vector(t2.grad(out).col(0));
  });
  return out;
}

Var transpose(Var a) {
  Tape& t = tp(a);
  Var out = t.alloc(t.val(a).transpose(), {a});
  t.set_backward(out, [a, out](Tape& t2) {
    t2.grad(a) += t2.grad(out).transpose();
  });
  return out;
}

Var broadcast_col(Var v, Eigen::Index t_count) {
  Tape& t = tp(v);
  TSR_CHECK(t.val(v).cols() == 1, "broadcast_col_needs_column");
  Matrix y = t.val(v).replicate(1, t_count);
  Var out = t.alloc(std::move(y), {v});
  t.set_backward(out, [v, out](Tape& t2) {
    t2.grad(v).col(0) += t2.grad(out).rowwise().sum();
  });
  return out;
}

Var add_colvec(Var a, Var v) {
  check_same_tape(a, v);
  Tape& t = tp(a);
  TSR_CHECK(t.val(v).cols() == 1 && t.val(v).rows() == t.val(a).rows(),
            "add_colvec_shape");
  Matrix y = t.val(a).colwise() + Vector(t.val(v).col(0));
  Var out = t.alloc(std::move(y), {a, v});
  t.set_backward(out, [a, v, out](Tape& t2) {
    if (t2.requires_grad(a)) t2.grad(a) += t2.grad(out);
    if (t2.requires_grad(v)) t2.grad(v).col(0) += t2.grad(out).rowwise().sum();
  });
  return out;
}

Var concat_rows(const std::vector<Var>& parts) {
  TSR_CHECK(!parts.empty(), "concat_empty");
  Tape& t = tp(parts[0]);
  Eigen::Index rows = 0, cols = t.val(parts[0]).cols();
  for (Var p : parts) {
    check_same_tape(parts[0], p);
    TSR_CHECK(t.val(p).cols() == cols, "concat_rows_col_mismatch");
    rows += t.val(p).rows();
  }
  Matrix y(rows, cols);
  Eigen::Index r = 0;
  for (Var p : parts) {
    y.middleRows(r, t.val(p).rows()) = t.val(p);
    r += t.val(p).rows();
  }
  Var out = t.alloc(std::move(y), parts);
  t.set_backward(out, [parts, out](Tape& t2) {
    Eigen::Index r2 = 0;
    for (Var p : parts) {
      Eigen::Index n = t2.val(p).rows();
      if (t2.requires_grad(p)) t2.grad(p) += t2.grad(out).middleRows(r2, n);
      r2 += n;
    }
  });
  return out;
}

Var concat_cols(const std::vector<Var>& parts) {
  TSR_CHECK(!parts.empty(), "concat_empty");
  Tape& t = tp(parts[0]);
  Eigen::Index cols = 0, rows = t.val(parts[0]).rows();
  for (Var p : parts) {
    check_same_tape(parts[0], p);
    TSR_CHECK(t.val(p).rows() == rows, "concat_cols_row_mismatch");
    cols += t.val(p).cols();
  }
  Matrix y(rows, cols);
  Eigen::Index c = 0;
  for (Var p : parts) {
    y.middleCols(c, t.val(p).cols()) = t.val(p);
    c += t.val(p).cols();
  }
  Var out = t.alloc(std::move(y), parts);
  t.set_backward(out, [parts, out](Tape& t2) {
    Eigen::Index c2 = 0;
    for (Var p : parts) {
      Eigen::Index n = t2.val(p).cols();
      if (t2.requires_grad(p)) t2.grad(p) += t2.grad(out).middleCols(c2, n);
      c2 += n;
    }
  });
  return out;
}

Var slice_rows(Var a, Eigen::Index r0, Eigen::Index n) {
  Tape& t = tp(a);
  TSR_CHECK(r0 >= 0 && n >= 0 && r0 + n <= t.val(a).rows(), "slice_rows_range");
  Var out = t.alloc(t.val(a).middleRows(r0, n), {a});
  t.set_backward(out, [a, out, r0, n](Tape& t2) {
    t2.grad(a).middleRows(r0, n) += t2.grad(out);
  });
  return out;
}

Var slice_cols(Var a, Eigen::Index c0, Eigen::Index n) {
  Tape& t = tp(a);
  TSR_CHECK(c0 >= 0 && n >= 0 && c0 + n <= t.val(a).cols(), "slice_cols_range");
  Var out = t.alloc(t.val(a).middleCols(c0, n), {a});
  t.set_backward(out, [a, out, c0, n](Tape& t2) {
    t2.grad(a).middleCols(c0, n) += t2.grad(out);
  });
  return out;
}

Var reverse_cols(Var a) {
  Tape& t = tp(a);
  Var out = t.alloc(t.val(a).rowwise().reverse(), {a});
  t.set_backward(out, [a, out](Tape& t2) {
    t2.grad(a) += t2.grad(out).rowwise().reverse();
  });
  return out;
}

Var pad_cols(Var a, Eigen::Index left, Eigen::Index right) {
  Tape& t = tp(a);
  const Matrix& x = t.val(a);
  Matrix y = Matrix::Zero(x.rows(), left + x.cols() + right);
  y.middleCols(left, x.cols()) = x;
  Var out = t.alloc(std::move(y), {a});
  t.set_backward(out, [a, out, left](Tape& t2) {
    t2.grad(a) += t2.grad(out).middleCols(left, t2.val(a).cols());
  });
  return out;
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = tp(a);
  TSR_CHECK(t.val(a).cols() == t.val(b).rows(),
            "matmul_shape: (" << t.val(a).rows() << "," << t.val(a).cols()
                              << ") x (" << t.val(b).rows() << ","
                              << t.val(b).cols() << ")");
  Var out = t.alloc(t.val(a) * t.val(b), {a, b});
  t.set_backward(out, [a, b, out](Tape& t2) {
    if (t2.requires_grad(a))
      t2.grad(a).noalias() += t2.grad(out) * t2.val(b).transpose();
    if (t2.requires_grad(b))
      t2.grad(b).noalias() += t2.val(a).transpose() * t2.grad(out);
  });
  return out;
}

Var im2col(Var a, int kernel, int stride, int dilation) {
  Tape& t = tp(a);
  const Matrix& x = t.val(a);
  TSR_CHECK(kernel >= 1 && stride >= 1 && dilation >= 1, "im2col_bad_geometry");
  const Eigen::Index span = static_cast<Eigen::Index>(kernel - 1) * dilation + 1;
  TSR_CHECK(x.cols() >= span, "im2col_input_too_short: " << x.cols()
                                                         << " cols < span " << span);
  const Eigen::Index c_in = x.rows();
  const Eigen::Index t_out = (x.cols() - span) / stride + 1;
  Matrix y(c_in * kernel, t_out);
  for (Eigen::Index to = 0; to < t_out; ++to)
    for (int j = 0; j < kernel; ++j)
      y.block(j * c_in, to, c_in, 1) = x.col(to * stride + j * dilation);
  Var out = t.alloc(std::move(y), {a});
  t.set_backward(out, [a, out, kernel, stride, dilation, c_in](Tape& t2) {
    Matrix& ga = t2.grad(a);
    const Matrix& g = t2.grad(out);
    for (Eigen::Index to = 0; to < g.cols(); ++to)
      for (int j = 0; j < kernel; ++j)
        ga.col(to * stride + j * dilation) += g.block(j * c_in, to, c_in, 1);
  });
  return out;
}

Var mean_pool_cols(Var a, int kernel, int stride) {
  Tape& t = tp(a);
  const Matrix& x = t.val(a);
  TSR_CHECK(kernel >= 1 && stride >= 1, "pool_bad_geometry");
  TSR_CHECK(x.cols() >= kernel, "pool_input_too_short");
  const Eigen::Index t_out = (x.cols() - kernel) / stride + 1;
  Matrix y(x.rows(), t_out);
  for (Eigen::Index to = 0; to < t_out; ++to)
    y.col(to) = x.middleCols(to * stride, kernel).rowwise().mean();
  Var out = t.alloc(std::move(y), {a});
  t.set_backward(out, [a, out, kernel, stride](Tape& t2) {
    Matrix& ga = t2.grad(a);
    const Matrix& g = t2.grad(out);
    for (Eigen::Index to = 0; to < g.cols(); ++to)
      for (int j = 0; j < kernel; ++j)
        ga.col(to * stride + j) += g.col(to) / kernel;
  });
  return out;
}

Var overlap_add(Var segments, int stride, Eigen::Index out_len) {
  Tape& t = tp(segments);
  const Matrix& s = t.val(segments);
  const Eigen::Index seg_len = s.rows();
  const Eigen::Index needed = (s.cols() - 1) * stride + seg_len;
  TSR_CHECK(out_len >= needed,
            "overlap_add_short_output: need " << needed << " got " << out_len);
  Matrix y = Matrix::Zero(1, out_len);
  for (Eigen::Index k = 0; k < s.cols(); ++k)
    y.block(0, k * stride, 1, seg_len) += s.col(k).transpose();
  Var out = t.alloc(std::move(y), {segments});
  t.set_backward(out, [segments, out, stride, seg_len](Tape& t2) {
    Matrix& gs = t2.grad(segments);
    const Matrix& g = t2.grad(out);
    for (Eigen::Index k = 0; k < gs.cols(); ++k)
      gs.col(k) += g.block(0, k * stride, 1, seg_len).transpose();
  });
  return out;
}

Var softmax_cols(Var a) {
  Tape& t = tp(a);
  const Matrix& x = t.val(a);
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    Vector col = x.col(c).array() - x.col(c).maxCoeff();
    col = col.array().exp();
    y.col(c) = col / col.sum();
  }
  Var out = t.alloc(std::move(y), {a});
  t.set_backward(out, [a, out](Tape& t2) {
    const Matrix& yv = t2.val(out);
    const Matrix& g = t2.grad(out);
    Matrix prod = yv.cwiseProduct(g);
    Eigen::RowVectorXd colsum = prod.colwise().sum();
    t2.grad(a) += prod - yv.cwiseProduct(colsum.replicate(yv.rows(), 1));
  });
  return out;
}

Var log_softmax_cols(Var a) {
  Tape& t = tp(a);
  const Matrix& x = t.val(a);
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    double mx = x.col(c).maxCoeff();
    double lse = std::log((x.col(c).array() - mx).exp().sum()) + mx;
    y.col(c) = x.col(c).array() - lse;
  }
  Var out = t.alloc(std::move(y), {a});
  t.set_backward(out, [a, out](Tape& t2) {
    const Matrix& yv = t2.val(out);
    const Matrix& g = t2.grad(out);
    Eigen::RowVectorXd colsum = g.colwise().sum();
    t2.grad(a) += g - yv.array().exp().matrix().cwiseProduct(
                          colsum.replicate(yv.rows(), 1));
  });
  return out;
}

Var instance_norm(Var a, double eps) {
  Tape& t = tp(a);
  const Matrix& x = t.val(a);
  const double n = static_cast<double>(x.cols());
  Vector mu = x.rowwise().mean();
  Matrix centered = x.colwise() - mu;
  Vector var = centered.array().square().rowwise().mean();
  Vector inv_sigma = (var.array() + eps).rsqrt();
  Matrix y = centered.array().colwise() * inv_sigma.array();
  Var out = t.alloc(std::move(y), {a});
  t.set_backward(out, [a, out, inv_sigma, n](Tape& t2) {
    const Matrix& xhat = t2.val(out);
    const Matrix& g = t2.grad(out);
    Vector g_mean = g.rowwise().mean();
    Vector gx_mean = g.cwiseProduct(xhat).rowwise().mean();
    Matrix dx = g;
    dx.colwise() -= g_mean;
    dx -= xhat.array().colwise() * gx_mean.array();
    (void)n;
    t2.grad(a) += dx.array().colwise() * inv_sigma.array();
  });
  return out;
}

Var normalize_cols(Var a, double eps) {
  Tape& t = tp(a);
  const Matrix& x = t.val(a);
  Eigen::RowVectorXd inv_norm =
      (x.colwise().squaredNorm().array() + eps).rsqrt();
  Matrix y = x.array().rowwise() * inv_norm.array();
  Var out = t.alloc(std::move(y), {a});
  t.set_backward(out, [a, out, inv_norm](Tape& t2) {
    const Matrix& yv = t2.val(out);
    const Matrix& g = t2.grad(out);
    Eigen::RowVectorXd yg = (yv.cwiseProduct(g)).colwise().sum();
    Matrix dx = g - yv.cwiseProduct(yg.replicate(yv.rows(), 1));
    t2.grad(a) += dx.array().rowwise() * inv_norm.array();
  });
  return out;
}

Var dropout(Var a, double rate, Rng& rng, bool train) {
  TSR_CHECK(rate >= 0.0 && rate < 1.0, "bad_dropout_rate: " << rate);
  if (!train || rate == 0.0) return a;
  Tape& t = tp(a);
  const Matrix& x = t.val(a);
  Matrix mask(x.rows(), x.cols());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      mask(r, c) = rng.uniform() >= rate ? keep_scale : 0.0;
  Matrix y = x.cwiseProduct(mask);
  return unary_elemwise(a, std::move(y), std::move(mask));
}

Var lookup_cols(Var table, const std::vector<int>& ids) {
  Tape& t = tp(table);
  const Matrix& e = t.val(table);
  Matrix y(e.rows(), static_cast<Eigen::Index>(ids.size()));
  for (size_t u = 0; u < ids.size(); ++u) {
    TSR_CHECK(ids[u] >= 0 && ids[u] < e.cols(), "lookup_id_out_of_range: " << ids[u]);
    y.col(static_cast<Eigen::Index>(u)) = e.col(ids[u]);
  }
  Var out = t.alloc(std::move(y), {table});
  t.set_backward(out, [table, out, ids](Tape& t2) {
    Matrix& ge = t2.grad(table);
    const Matrix& g = t2.grad(out);
    for (size_t u = 0; u < ids.size(); ++u)
      ge.col(ids[u]) += g.col(static_cast<Eigen::Index>(u));
  });
  return out;
}

Var select_per_col(Var a, const std::vector<int>& row_ids) {
  Tape& t = tp(a);
  const Matrix& x = t.val(a);
  TSR_CHECK(static_cast<Eigen::Index>(row_ids.size()) == x.cols(),
            "select_per_col_count");
  Matrix y(1, x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    int r = row_ids[static_cast<size_t>(c)];
    TSR_CHECK(r >= 0 && r < x.rows(), "select_row_out_of_range: " << r);
    y(0, c) = x(r, c);
  }
  Var out = t.alloc(std::move(y), {a});
  t.set_backward(out, [a, out, row_ids](Tape& t2) {
    Matrix& ga = t2.grad(a);
    const Matrix& g = t2.grad(out);
    for (Eigen::Index c = 0; c < g.cols(); ++c)
      ga(row_ids[static_cast<size_t>(c)], c) += g(0, c);
  });
  return out;
}

Var pairwise_col_sum(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = tp(a);
  const Matrix& av = t.val(a);
  const Matrix& bv = t.val(b);
  TSR_CHECK(av.rows() == bv.rows(), "pairwise_row_mismatch");
  const Eigen::Index tn = av.cols(), un = bv.cols();
  Matrix y(av.rows(), tn * un);
  for (Eigen::Index ti = 0; ti < tn; ++ti)
    for (Eigen::Index u = 0; u < un; ++u)
      y.col(ti * un + u) = av.col(ti) + bv.col(u);
  Var out = t.alloc(std::move(y), {a, b});
  t.set_backward(out, [a, b, out, tn, un](Tape& t2) {
    const Matrix& g = t2.grad(out);
    if (t2.requires_grad(a)) {
      Matrix& ga = t2.grad(a);
      for (Eigen::Index ti = 0; ti < tn; ++ti)
        for (Eigen::Index u = 0; u < un; ++u) ga.col(ti) += g.col(ti * un + u);
    }
    if (t2.requires_grad(b)) {
      Matrix& gb = t2.grad(b);
      for (Eigen::Index ti = 0; ti < tn; ++ti)
        for (Eigen::Index u = 0; u < un; ++u) gb.col(u) += g.col(ti * un + u);
    }
  });
  return out;
}

Var stop_gradient(Var a) {
  Tape& t = tp(a);
  return t.constant(t.val(a));
}

}  // namespace tsr::ad
