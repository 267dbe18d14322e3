// src/nn.cpp

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

#include "tsr/nn.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>

namespace tsr::nn {

int ParamStore::add(const std::string& name, Matrix init) {
  TSR_CHECK(!name.empty(), "empty_param_name");
  TSR_CHECK(index_.count(name) == 0, "duplicate_param: " << name);
  TSR_CHECK(init.allFinite(), "non_finite_init: " << name);
  int idx = static_cast<int>(values_.size());
  names_.push_back(name);
  values_.push_back(std::move(init));
  index_[name] = idx;
  return idx;
}

int ParamStore::index(const std::string& name) const {
  auto it = index_.find(name);
  TSR_CHECK(it != index_.end(), "unknown_param: " << name);
  return it->second;
}

std::vector<int> ParamStore::with_prefix(const std::string& prefix) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (names_[i].rfind(prefix, 0) == 0) out.push_back(i);
  return out;
}

uint64_t ParamStore::checksum(const std::vector<int>& indices) const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (int i : indices) {
    h = fnv1a64(names_[i], h);
    const Matrix& m = values_[i];
    h = fnv1a64(m.data(), sizeof(double) * static_cast<size_t>(m.size()), h);
  }
  return h;
}

int64_t ParamStore::scalar_count(const std::vector<int>& indices) const {
  int64_t n = 0;
  for (int i : indices) n += values_[i].size();
  return n;
}

ad::Var ModelCtx::p(const std::string& name) {
  int idx = params.index(name);
  auto it = bound_.find(idx);
  if (it != bound_.end()) return it->second;
  ad::Var v = frozen(name) ? tape.constant(params.value(idx))
                           : tape.leaf(params.value(idx));
  bound_.emplace(idx, v);
  return v;
}

bool ModelCtx::frozen(const std::string& name) const {
  for (const auto& pre : frozen_prefixes)
    if (name.rfind(pre, 0) == 0) return true;
  return false;
}

void ModelCtx::accumulate_grads(GradMap& acc, double scale) const {
  for (const auto& [idx, var] : bound_) {
    if (!tape.requires_grad(var)) continue;
    const Matrix& g = const_cast<ad::Tape&>(tape).grad(var);
    auto it = acc.find(idx);
    if (it == acc.end())
      acc.emplace(idx, scale * g);
    else
      it->second += scale * g;
  }
}

Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return rng.uniform_matrix(rows, cols, -limit, limit);
}

Matrix orthogonal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::Index n = std::max(rows, cols);
  Matrix a = rng.normal_matrix(n, n);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < n; ++i)
    if (r(i, i) < 0) q.col(i) = -q.col(i);
  return q.topLeftCorner(rows, cols);
}

// ---- LinearLayer ----

LinearLayer LinearLayer::create(ParamStore& ps, Rng& rng,
                                const std::string& prefix, int in, int out,
                                bool bias) {
  TSR_CHECK(in > 0 && out > 0, "linear_bad_dims: " << in << "x" << out);
  LinearLayer l;
  l.in = in;
  l.out = out;
  l.has_bias = bias;
  l.w = prefix + "/w";
  ps.add(l.w, glorot_uniform(out, in, rng));
  if (bias) {
    l.b = prefix + "/b";
    ps.add(l.b, Matrix::Zero(out, 1));
  }
  return l;
}

ad::Var LinearLayer::apply(ModelCtx& ctx, ad::Var x) const {
  const Matrix& xv = ctx.tape.val(x);
  TSR_CHECK(xv.rows() == in, "linear shape mismatch at " << w << ": expected "
                                 << in << " input rows, got " << xv.rows());
  ad::Var y = ad::matmul(ctx.p(w), x);
  if (has_bias) y = ad::add_colvec(y, ctx.p(b));
  return y;
}

// ---- Conv1dLayer ----

Conv1dLayer Conv1dLayer::create(ParamStore& ps, Rng& rng,
                                const std::string& prefix, int in, int out,
                                int kernel, int stride, int dilation,
                                bool same_pad) {
  TSR_CHECK(in > 0 && out > 0 && kernel > 0 && stride > 0 && dilation > 0,
            "conv_bad_dims");
  Conv1dLayer l;
  l.in = in;
  l.out = out;
  l.kernel = kernel;
  l.stride = stride;
  l.dilation = dilation;
  l.same_pad = same_pad;
  l.w = prefix + "/w";
  l.b = prefix + "/b";
  ps.add(l.w, glorot_uniform(out, in * kernel, rng));
  ps.add(l.b, Matrix::Zero(out, 1));
  return l;
}

Eigen::Index Conv1dLayer::out_len(Eigen::Index in_len) const {
  Eigen::Index span = static_cast<Eigen::Index>(kernel - 1) * dilation + 1;
  Eigen::Index padded = same_pad ? in_len + span - 1 : in_len;
  TSR_CHECK(padded >= span, "conv input too short at " << w << ": " << in_len);
  return (padded - span) / stride + 1;
}

ad::Var Conv1dLayer::apply(ModelCtx& ctx, ad::Var x) const {
  const Matrix& xv = ctx.tape.val(x);
  TSR_CHECK(xv.rows() == in, "conv1d shape mismatch at "
                                 << w << ": expected " << in
                                 << " input channels, got " << xv.rows());
  ad::Var padded = x;
  if (same_pad) {
    Eigen::Index total = static_cast<Eigen::Index>(kernel - 1) * dilation;
    padded = ad::pad_cols(x, total / 2, total - total / 2);
  }
  ad::Var patches = ad::im2col(padded, kernel, stride, dilation);
  return ad::add_colvec(ad::matmul(ctx.p(w), patches), ctx.p(b));
}

// ---- LstmLayer ----

LstmLayer LstmLayer::create(ParamStore& ps, Rng& rng, const std::string& prefix,
                            int in, int hidden) {
  TSR_CHECK(in > 0 && hidden > 0, "lstm_bad_dims");
  LstmLayer l;
  l.in = in;
  l.hidden = hidden;
  l.w_ih = prefix + "/w_ih";
  l.w_hh = prefix + "/w_hh";
  l.b = prefix + "/b";
  ps.add(l.w_ih, glorot_uniform(4 * hidden, in, rng));
  Matrix whh(4 * hidden, hidden);
  for (int g = 0; g < 4; ++g)
    whh.middleRows(g * hidden, hidden) = orthogonal(hidden, hidden, rng);
  ps.add(l.w_hh, whh);
  Matrix bias = Matrix::Zero(4 * hidden, 1);
  bias.middleRows(hidden, hidden).setConstant(1.0);  // forget gate
  ps.add(l.b, bias);
  return l;
}

ad::Var LstmLayer::apply(ModelCtx& ctx, ad::Var x) const {
  const Matrix& xv = ctx.tape.val(x);
  TSR_CHECK(xv.rows() == in, "bilstm shape mismatch at "
                                 << w_ih << ": expected " << in
                                 << " input rows, got " << xv.rows());
  const Eigen::Index t_count = xv.cols();
  const int h = hidden;
  ad::Tape& t = ctx.tape;

  // Input projections for every step in one product.
  ad::Var zx = ad::add_colvec(ad::matmul(ctx.p(w_ih), x), ctx.p(b));
  ad::Var whh = ctx.p(w_hh);

  ad::Var h_prev = t.constant(Matrix::Zero(h, 1));
  ad::Var c_prev = t.constant(Matrix::Zero(h, 1));
  std::vector<ad::Var> outputs;
  outputs.reserve(static_cast<size_t>(t_count));
  for (Eigen::Index step = 0; step < t_count; ++step) {
    ad::Var z = ad::add(ad::slice_cols(zx, step, 1), ad::matmul(whh, h_prev));
    ad::Var ig = ad::sigmoid(ad::slice_rows(z, 0, h));
    ad::Var fg = ad::sigmoid(ad::slice_rows(z, h, h));
    ad::Var gg = ad::tanh_(ad::slice_rows(z, 2 * h, h));
    ad::Var og = ad::sigmoid(ad::slice_rows(z, 3 * h, h));
    ad::Var c = ad::add(ad::mul(fg, c_prev), ad::mul(ig, gg));
    ad::Var hv = ad::mul(og, ad::tanh_(c));
    outputs.push_back(hv);
    h_prev = hv;
    c_prev = c;
  }
  return ad::concat_cols(outputs);
}

// ---- BiLstmLayer ----

BiLstmLayer BiLstmLayer::create(ParamStore& ps, Rng& rng,
                                const std::string& prefix, int in, int hidden) {
  BiLstmLayer l;
  l.fwd = LstmLayer::create(ps, rng, prefix + "/fwd", in, hidden);
  l.bwd = LstmLayer::create(ps, rng, prefix + "/bwd", in, hidden);
  return l;
}

ad::Var BiLstmLayer::apply(ModelCtx& ctx, ad::Var x) const {
  ad::Var forward_out = fwd.apply(ctx, x);
  ad::Var backward_out =
      ad::reverse_cols(bwd.apply(ctx, ad::reverse_cols(x)));
  return ad::concat_rows({forward_out, backward_out});
}

// ---- TdnnBlock ----

TdnnBlock TdnnBlock::create(ParamStore& ps, Rng& rng, const std::string& prefix,
                            int in, int out, int kernel, int dilation) {
  TdnnBlock b;
  b.conv = Conv1dLayer::create(ps, rng, prefix + "/conv", in, out, kernel,
                               /*stride=*/1, dilation, /*same_pad=*/true);
  return b;
}

ad::Var TdnnBlock::apply(ModelCtx& ctx, ad::Var x) const {
  return ad::instance_norm(ad::relu(conv.apply(ctx, x)));
}

// ---- LayerSpec ----

const char* LayerSpec::kind_name(Kind k) {
  switch (k) {
    case Kind::kConv1d: return "conv1d";
    case Kind::kBilstm: return "bilstm";
    case Kind::kTdnnBlock: return "tdnn_block";
    case Kind::kLinear: return "linear";
    case Kind::kInstanceNorm: return "instance_norm";
    case Kind::kLeakyRelu: return "leaky_relu";
    case Kind::kSoftmax: return "softmax";
    case Kind::kLogSoftmax: return "log_softmax";
    case Kind::kDropout: return "dropout";
  }
  return "?";
}

void LayerSpec::validate() const {
  switch (kind) {
    case Kind::kConv1d:
    case Kind::kTdnnBlock:
      TSR_CHECK(in_channels > 0 && out_channels > 0 && kernel > 0 &&
                    stride > 0 && dilation > 0,
                "bad_layer_spec: " << kind_name(kind));
      break;
    case Kind::kLinear:
      TSR_CHECK(in_channels > 0 && out_channels > 0,
                "bad_layer_spec: linear");
      break;
    case Kind::kBilstm:
      TSR_CHECK(in_channels > 0 && hidden > 0, "bad_layer_spec: bilstm");
      break;
    case Kind::kDropout:
      TSR_CHECK(rate >= 0.0 && rate < 1.0, "bad_layer_spec: dropout rate "
                                               << rate);
      break;
    default:
      break;
  }
}

AnyLayer make_layer(ParamStore& ps, Rng& rng, const std::string& prefix,
                    const LayerSpec& spec) {
  spec.validate();
  using K = LayerSpec::Kind;
  switch (spec.kind) {
    case K::kLinear:
      return LinearLayer::create(ps, rng, prefix, spec.in_channels,
                                 spec.out_channels);
    case K::kConv1d:
      return Conv1dLayer::create(ps, rng, prefix, spec.in_channels,
                                 spec.out_channels, spec.kernel, spec.stride,
                                 spec.dilation, spec.same_pad);
    case K::kBilstm:
      return BiLstmLayer::create(ps, rng, prefix, spec.in_channels, spec.hidden);
    case K::kTdnnBlock:
      return TdnnBlock::create(ps, rng, prefix, spec.in_channels,
                               spec.out_channels, spec.kernel, spec.dilation);
    default:
      return spec;  // parameter-free
  }
}

ad::Var apply_layer(ModelCtx& ctx, const AnyLayer& layer, ad::Var x) {
  if (const auto* l = std::get_if<LinearLayer>(&layer)) return l->apply(ctx, x);
  if (const auto* c = std::get_if<Conv1dLayer>(&layer)) return c->apply(ctx, x);
  if (const auto* b = std::get_if<BiLstmLayer>(&layer)) return b->apply(ctx, x);
  if (const auto* t = std::get_if<TdnnBlock>(&layer)) return t->apply(ctx, x);
  const auto& spec = std::get<LayerSpec>(layer);
  using K = LayerSpec::Kind;
  switch (spec.kind) {
    case K::kInstanceNorm: return ad::instance_norm(x);
    case K::kLeakyRelu: return ad::leaky_relu(x, spec.negative_slope);
    case K::kSoftmax: return ad::softmax_cols(x);
    case K::kLogSoftmax: return ad::log_softmax_cols(x);
    case K::kDropout: {
      TSR_CHECK(!ctx.train || ctx.rng != nullptr, "dropout_needs_rng");
      static Rng unused(0);
      return ad::dropout(x, spec.rate, ctx.train ? *ctx.rng : unused, ctx.train);
    }
    default:
      TSR_FAIL("unhandled layer kind");
  }
}

ad::Var forward(ModelCtx& ctx, const LayerSpec& spec, ad::Var x,
                const std::string& prefix, Rng& init_rng) {
  AnyLayer layer;
  if (!ctx.params.has(prefix + "/w") && !ctx.params.has(prefix + "/fwd/w_ih") &&
      !ctx.params.has(prefix + "/conv/w")) {
    layer = make_layer(ctx.params, init_rng, prefix, spec);
  } else {
    // Rebuild the handle onto existing parameters.
    ParamStore scratch;
    Rng r(0);
    layer = make_layer(scratch, r, prefix, spec);
  }
  return apply_layer(ctx, layer, x);
}

// ---- grad_check ----

namespace {

struct CoordRef {
  bool is_param = false;
  int tensor = 0;  // param index or input index
  Eigen::Index r = 0, c = 0;
  double analytic = 0.0;
};

}  // namespace

GradCheckResult grad_check(
    ParamStore& params, const std::vector<Matrix>& inputs,
    const std::function<ad::Var(ModelCtx&, const std::vector<ad::Var>&)>& build,
    const GradCheckOptions& opts) {
  // Forward + backward once for the analytic gradient.
  std::vector<CoordRef> coords;
  std::vector<int> bound_params;
  {
    ad::Tape tape;
    ModelCtx ctx(tape, params);
    std::vector<ad::Var> in_vars;
    for (const auto& m : inputs) in_vars.push_back(tape.leaf(m));
    ad::Var loss = build(ctx, in_vars);
    tape.backward(loss);

    Rng rng(opts.seed);
    auto sample_tensor = [&](const Matrix& g, bool is_param, int tensor_id) {
      if (g.size() == 0) return;
      std::vector<Eigen::Index> flat(static_cast<size_t>(g.size()));
      for (size_t i = 0; i < flat.size(); ++i) flat[i] = static_cast<Eigen::Index>(i);
      // Half the budget on the largest-magnitude coordinates, half random.
      std::sort(flat.begin(), flat.end(), [&](Eigen::Index a, Eigen::Index b) {
        return std::abs(g(a % g.rows(), a / g.rows())) >
               std::abs(g(b % g.rows(), b / g.rows()));
      });
      int budget = std::min<int>(opts.max_coords_per_tensor,
                                 static_cast<int>(flat.size()));
      int top = budget / 2;
      for (int i = 0; i < top; ++i) {
        Eigen::Index f = flat[static_cast<size_t>(i)];
        coords.push_back({is_param, tensor_id, f % g.rows(), f / g.rows(),
                          g(f % g.rows(), f / g.rows())});
      }
      for (int i = top; i < budget; ++i) {
        Eigen::Index f =
            static_cast<Eigen::Index>(rng.pick(static_cast<size_t>(g.size())));
        coords.push_back({is_param, tensor_id, f % g.rows(), f / g.rows(),
                          g(f % g.rows(), f / g.rows())});
      }
    };

    if (opts.check_inputs)
      for (size_t i = 0; i < in_vars.size(); ++i)
        sample_tensor(tape.grad(in_vars[i]), false, static_cast<int>(i));
    if (opts.check_params) {
      ModelCtx* cp = &ctx;
      GradMap gm;
      cp->accumulate_grads(gm);
      for (auto& [idx, g] : gm) {
        sample_tensor(g, true, idx);
        bound_params.push_back(idx);
      }
    }
  }

  auto eval_loss = [&](const std::vector<Matrix>& ins) {
    ad::Tape tape;
    ModelCtx ctx(tape, params);
    std::vector<ad::Var> in_vars;
    for (const auto& m : ins) in_vars.push_back(tape.constant(m));
    return ad::scalar(build(ctx, in_vars));
  };

  GradCheckResult res;
  std::vector<Matrix> work = inputs;
  double grad_scale = 1.0;
  for (const auto& c : coords) grad_scale = std::max(grad_scale, std::abs(c.analytic));

  for (const auto& c : coords) {
    double* target = c.is_param ? &params.value(c.tensor)(c.r, c.c)
                                : &work[static_cast<size_t>(c.tensor)](c.r, c.c);
    double saved = *target;
    *target = saved + opts.epsilon;
    double up = eval_loss(work);
    *target = saved - opts.epsilon;
    double down = eval_loss(work);
    *target = saved;
    double numeric = (up - down) / (2.0 * opts.epsilon);
    double abs_err = std::abs(numeric - c.analytic);
    double denom = std::max(std::abs(numeric), std::abs(c.analytic));
    res.max_abs_error = std::max(res.max_abs_error, abs_err);
    // Coordinates with negligible gradient on both sides carry no signal.
    if (denom > 1e-7 * grad_scale)
      res.max_rel_error = std::max(res.max_rel_error, abs_err / denom);
    ++res.coords_checked;
  }
  return res;
}

GradCheckResult grad_check_chain(const std::vector<LayerSpec>& chain,
                                 const Matrix& input, ScalarLoss loss,
                                 uint64_t seed, const GradCheckOptions& opts) {
  ParamStore ps;
  Rng rng(seed);
  std::vector<AnyLayer> layers;
  for (size_t i = 0; i < chain.size(); ++i)
    layers.push_back(make_layer(ps, rng, "chain/" + std::to_string(i), chain[i]));

  auto build = [&](ModelCtx& ctx, const std::vector<ad::Var>& ins) {
    ad::Var x = ins[0];
    for (const auto& l : layers) x = apply_layer(ctx, l, x);
    switch (loss) {
      case ScalarLoss::kSum: return ad::sum_all(x);
      case ScalarLoss::kMean: return ad::mean_all(x);
      case ScalarLoss::kSumOfSquares: return ad::sum_all(ad::square(x));
    }
    TSR_FAIL("bad loss kind");
  };
  return grad_check(ps, {input}, build, opts);
}

}  // namespace tsr::nn
