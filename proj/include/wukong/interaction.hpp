#pragma once

// Interaction stack: FM variants, the factorization machine block (FMB), the
// linear compression block (LCB) and their residual + layer-norm composition
//
//   X_{i+1} = LN(concat(FMB_i(X_i), LCB_i(X_i)) + R_i X_i)
//
// where R_i is the identity when n_i == n_F + n_L and a learned projection
// otherwise.

#include "wukong/config.hpp"
#include "wukong/params.hpp"

namespace wukong {

// Names and shapes of one layer's parameters. Tensors live in a ParamStore.
struct LayerParams {
  std::size_t index = 0;
  std::size_t n_in = 0;
  std::size_t n_F = 0;
  std::size_t n_L = 0;
  std::size_t d = 0;
  std::size_t k = 0;
  std::size_t n_A = 0;
  FmVariant variant = FmVariant::lowrank;
  MlpSpec fmb_mlp;   // [fm_width, fmb hidden..., n_F*d]
  MlpSpec attn_mlp;  // [n_A*d, attn hidden..., n_in*k], attentive variant only

  std::string prefix() const { return "layer." + std::to_string(index); }
  std::string y_name() const { return prefix() + ".fm.y"; }
  std::string wa_name() const { return prefix() + ".fm.wa"; }
  std::string fmb_ln_gain() const { return prefix() + ".fmb.ln.gain"; }
  std::string fmb_ln_bias() const { return prefix() + ".fmb.ln.bias"; }
  std::string lcb_name() const { return prefix() + ".lcb.w"; }
  std::string residual_name() const { return prefix() + ".res.w"; }
  std::string out_ln_gain() const { return prefix() + ".ln.gain"; }
  std::string out_ln_bias() const { return prefix() + ".ln.bias"; }

  std::size_t n_out() const { return n_F + n_L; }
  bool needs_residual_projection() const { return n_in != n_out(); }
  // Width of the flattened FM output.
  std::size_t fm_width() const { return variant == FmVariant::basic ? n_in * n_in : n_in * k; }
};

LayerParams layer_params(const WukongConfig& c, std::size_t layer);

template <typename T>
void init_layer(ParamStore<T>& store, const LayerParams& p, std::uint64_t seed);

// B x n x d -> B x n x n, out[b] = x[b] x[b]^T.
template <typename T>
Var fm_basic(Graph<T>& g, Var x);

// B x n x d, n x k -> B x n x k, evaluated as x[b] (x[b]^T y).
template <typename T>
Var fm_lowrank(Graph<T>& g, Var x, Var y);

// Y_eff[b] = y + reshape(attn(flatten(w_a x[b]))); result x[b] (x[b]^T Y_eff[b]).
template <typename T>
Var fm_lowrank_attentive(Graph<T>& g, const ParamStore<T>& store, Var x, Var y, Var w_a,
                         const MlpSpec& attn, bool linear);

template <typename T>
Var fmb_forward(Graph<T>& g, const ParamStore<T>& store, const LayerParams& p, Var x, bool linear, T eps);

// B x n_i x d -> B x n_L x d, embedding-wise recombination w_l x[b].
template <typename T>
Var lcb_forward(Graph<T>& g, Var x, Var w_l);

template <typename T>
Var layer_forward(Graph<T>& g, const ParamStore<T>& store, const LayerParams& p, Var x, bool linear,
                  T eps, const Ablation& ablate);

template <typename T>
Var stack_forward(Graph<T>& g, const ParamStore<T>& store, const WukongConfig& c, Var x0);

// Eager conveniences over a throwaway graph.
template <typename T>
Tensor<T> fm_basic(const Tensor<T>& x);
template <typename T>
Tensor<T> fm_lowrank(const Tensor<T>& x, const Tensor<T>& y);

}  // namespace wukong
