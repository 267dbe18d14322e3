// include/tsr/nn.hpp

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

#ifndef TSR_NN_HPP_
#define TSR_NN_HPP_

#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "tsr/ad.hpp"
#include "tsr/rng.hpp"
#include "tsr/types.hpp"

namespace tsr::nn {

// Named parameter tensors with a stable registration order. Iteration and
// serialization always follow that order, which keeps checksums and
// checkpoints reproducible.
class ParamStore {
 public:
  int add(const std::string& name, Matrix init);
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  int index(const std::string& name) const;
  Matrix& value(int idx) { return values_[idx]; }
  const Matrix& value(int idx) const { return values_[idx]; }
  Matrix& value(const std::string& name) { return values_[index(name)]; }
  const Matrix& value(const std::string& name) const { return values_[index(name)]; }
  const std::string& name(int idx) const { return names_[idx]; }
  int size() const { return static_cast<int>(values_.size()); }

  std::vector<int> with_prefix(const std::string& prefix) const;
  // FNV-1a over the little-endian bytes of the listed tensors.
  uint64_t checksum(const std::vector<int>& indices) const;
  uint64_t checksum_prefix(const std::string& prefix) const {
    return checksum(with_prefix(prefix));
  }
  int64_t scalar_count(const std::vector<int>& indices) const;

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::map<std::string, int> index_;
};

using GradMap = std::map<int, Matrix>;  // param index -> accumulated gradient

// Per-step graph context. Parameters bind lazily: the first use of a name
// creates one tape leaf (or a constant, if the name matches a frozen
// prefix) shared by every later use in the same step.
struct ModelCtx {
  ModelCtx(ad::Tape& t, ParamStore& p) : tape(t), params(p) {}

  ad::Tape& tape;
  ParamStore& params;
  bool train = false;
  Rng* rng = nullptr;
  std::vector<std::string> frozen_prefixes;

  ad::Var p(const std::string& name);
  bool frozen(const std::string& name) const;
  // Adds `scale` times each bound trainable parameter's gradient into `acc`.
  void accumulate_grads(GradMap& acc, double scale = 1.0) const;

 private:
  std::map<int, ad::Var> bound_;
};

// ---- initializers ----
Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng);
// QR-based orthogonal init with the sign fixed so the result is unique.
Matrix orthogonal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

// ---- layers ----

struct LinearLayer {
  std::string w, b;
  int in = 0, out = 0;
  bool has_bias = true;

  static LinearLayer create(ParamStore& ps, Rng& rng, const std::string& prefix,
                            int in, int out, bool bias = true);
  ad::Var apply(ModelCtx& ctx, ad::Var x) const;  // (in x T) -> (out x T)
};

struct Conv1dLayer {
  std::string w, b;
  int in = 0, out = 0, kernel = 1, stride = 1, dilation = 1;
  bool same_pad = false;

  static Conv1dLayer create(ParamStore& ps, Rng& rng, const std::string& prefix,
                            int in, int out, int kernel, int stride = 1,
                            int dilation = 1, bool same_pad = false);
  ad::Var apply(ModelCtx& ctx, ad::Var x) const;
  Eigen::Index out_len(Eigen::Index in_len) const;
};

// Single-direction LSTM over a full sequence; gate order is (i, f, g, o)
// and the forget-gate bias starts at 1.
struct LstmLayer {
  std::string w_ih, w_hh, b;
  int in = 0, hidden = 0;

  static LstmLayer create(ParamStore& ps, Rng& rng, const std::string& prefix,
                          int in, int hidden);
  ad::Var apply(ModelCtx& ctx, ad::Var x) const;  // (in x T) -> (hidden x T)
};

struct BiLstmLayer {
  LstmLayer fwd, bwd;

  static BiLstmLayer create(ParamStore& ps, Rng& rng, const std::string& prefix,
                            int in, int hidden);
  // (in x T) -> (2*hidden x T); rows [0,H) are the forward direction.
  ad::Var apply(ModelCtx& ctx, ad::Var x) const;
};

// Dilated conv + ReLU + instance norm.
struct TdnnBlock {
  Conv1dLayer conv;

  static TdnnBlock create(ParamStore& ps, Rng& rng, const std::string& prefix,
                          int in, int out, int kernel, int dilation);
  ad::Var apply(ModelCtx& ctx, ad::Var x) const;
};

// ---- generic layer description (config surface and test harness) ----

struct LayerSpec {
  enum class Kind {
    kConv1d,
    kBilstm,
    kTdnnBlock,
    kLinear,
    kInstanceNorm,
    kLeakyRelu,
    kSoftmax,
    kLogSoftmax,
    kDropout,
  };
  Kind kind = Kind::kLinear;
  int in_channels = 0, out_channels = 0;
  int kernel = 1, stride = 1, dilation = 1;
  int hidden = 0;
  double rate = 0.0;
  double negative_slope = 0.01;
  bool same_pad = false;

  void validate() const;
  static const char* kind_name(Kind k);
};

using AnyLayer = std::variant<std::monostate, LinearLayer, Conv1dLayer,
                              BiLstmLayer, TdnnBlock, LayerSpec>;

// Registers whatever parameters the spec needs and returns an applicable
// layer handle. Parameter-free kinds are carried as the spec itself.
AnyLayer make_layer(ParamStore& ps, Rng& rng, const std::string& prefix,
                    const LayerSpec& spec);
ad::Var apply_layer(ModelCtx& ctx, const AnyLayer& layer, ad::Var x);

// Single-layer forward with fresh parameters, as a plain operation:
// builds the layer under `prefix` if absent, then applies it.
ad::Var forward(ModelCtx& ctx, const LayerSpec& spec, ad::Var x,
                const std::string& prefix, Rng& init_rng);

// ---- gradient verification ----

struct GradCheckOptions {
  double epsilon = 1e-4;        // central-difference step
  int max_coords_per_tensor = 24;
  uint64_t seed = 17;
  bool check_params = true;
  bool check_inputs = true;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  int coords_checked = 0;
};

// Compares the tape gradient of `build`'s scalar loss against central
// finite differences over a sampled set of parameter/input coordinates.
// The builder must be deterministic (eval-mode semantics).
GradCheckResult grad_check(
    ParamStore& params, const std::vector<Matrix>& inputs,
    const std::function<ad::Var(ModelCtx&, const std::vector<ad::Var>&)>& build,
    const GradCheckOptions& opts = {});

// Spec-chain convenience: `loss` maps the chain output to a scalar.
enum class ScalarLoss { kSum, kMean, kSumOfSquares };
GradCheckResult grad_check_chain(const std::vector<LayerSpec>& chain,
                                 const Matrix& input, ScalarLoss loss,
                                 uint64_t seed = 5,
                                 const GradCheckOptions& opts = {});

}  // namespace tsr::nn

#endif  // TSR_NN_HPP_
