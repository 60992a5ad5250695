#include "wukong/interaction.hpp"

#include <cmath>

namespace wukong {

LayerParams layer_params(const WukongConfig& c, std::size_t layer) {
  LayerParams p;
  p.index = layer;
  p.n_in = c.layer_input(layer);
  p.n_F = c.n_F;
  p.n_L = c.n_L;
  p.d = c.d;
  p.k = c.k;
  p.variant = c.fm_variant;
  p.n_A = c.attn_rows();
  p.fmb_mlp = make_mlp_spec(p.prefix() + ".fmb.mlp", p.fm_width(), c.fmb_mlp, p.n_F * p.d);
  if (p.variant == FmVariant::lowrank_attentive) {
    p.attn_mlp = make_mlp_spec(p.prefix() + ".fm.attn", p.n_A * p.d, c.attn_mlp, p.n_in * p.k);
  }
  return p;
}

template <typename T>
void init_layer(ParamStore<T>& store, const LayerParams& p, std::uint64_t seed) {
  const double fan_in_bound = 1.0 / std::sqrt(static_cast<double>(p.n_in));
  if (p.variant != FmVariant::basic) {
    store.add(p.y_name(), uniform_tensor<T>({p.n_in, p.k}, fan_in_bound, seed, p.y_name()));
  }
  if (p.variant == FmVariant::lowrank_attentive) {
    store.add(p.wa_name(), uniform_tensor<T>({p.n_A, p.n_in}, fan_in_bound, seed, p.wa_name()));
    init_mlp(store, p.attn_mlp, seed);
  }
  store.add(p.fmb_ln_gain(), Tensor<T>::ones({p.fm_width()}));
  store.add(p.fmb_ln_bias(), Tensor<T>::zeros({p.fm_width()}));
  init_mlp(store, p.fmb_mlp, seed);
  if (p.n_L > 0) {
    store.add(p.lcb_name(), uniform_tensor<T>({p.n_L, p.n_in}, fan_in_bound, seed, p.lcb_name()));
  }
  if (p.needs_residual_projection()) {
    store.add(p.residual_name(), uniform_tensor<T>({p.n_out(), p.n_in}, fan_in_bound, seed, p.residual_name()));
  }
  store.add(p.out_ln_gain(), Tensor<T>::ones({p.n_out(), p.d}));
  store.add(p.out_ln_bias(), Tensor<T>::zeros({p.n_out(), p.d}));
}

template <typename T>
Var fm_basic(Graph<T>& g, Var x) {
  if (g.shape(x).size() != 3) throw ConfigError("fm_basic: expected B x n x d, got " + shape_string(g.shape(x)));
  return g.matmul(x, x, false, true);
}

template <typename T>
Var fm_lowrank(Graph<T>& g, Var x, Var y) {
  const Shape& xs = g.shape(x);
  const Shape& ys = g.shape(y);
  if (xs.size() != 3 || ys.size() < 2 || ys[ys.size() - 2] != xs[1]) {
    throw ConfigError("fm_lowrank: projection " + shape_string(ys) + " does not match input " + shape_string(xs));
  }
  Var xty = g.matmul(x, y, true, false);  // B x d x k
  return g.matmul(x, xty);                // B x n x k
}

template <typename T>
Var fm_lowrank_attentive(Graph<T>& g, const ParamStore<T>& store, Var x, Var y, Var w_a,
                         const MlpSpec& attn, bool linear) {
  const Shape xs = g.shape(x);
  const Shape& ys = g.shape(y);
  if (xs.size() != 3 || ys.size() != 2 || ys[0] != xs[1]) {
    throw ConfigError("fm_lowrank_attentive: projection " + shape_string(ys) + " does not match input " +
                      shape_string(xs));
  }
  const std::size_t batch = xs[0], n = xs[1], k = ys[1];
  if (attn.out() != n * k) {
    throw ConfigError("fm_lowrank_attentive: attention MLP width " + std::to_string(attn.out()) +
                      " != n*k = " + std::to_string(n * k));
  }
  Var compressed = g.flatten(g.matmul(w_a, x));  // B x (n_A*d)
  Var attention = mlp_forward(g, store, attn, compressed, linear);
  Var y_eff = g.add_broadcast(g.reshape(attention, {batch, n, k}), y);
  Var xty = g.matmul(x, y_eff, true, false);
  return g.matmul(x, xty);
}

template <typename T>
Var fmb_forward(Graph<T>& g, const ParamStore<T>& store, const LayerParams& p, Var x, bool linear, T eps) {
  const Shape xs = g.shape(x);
  if (xs.size() != 3 || xs[1] != p.n_in || xs[2] != p.d) {
    throw ConfigError("fmb_forward: input " + shape_string(xs) + " does not match layer " +
                      std::to_string(p.index) + " (n_in=" + std::to_string(p.n_in) + ", d=" + std::to_string(p.d) + ")");
  }
  const std::size_t batch = xs[0];
  Var fm;
  {
    ComponentScope<T> scope(g, Component::fm);
    switch (p.variant) {
      case FmVariant::basic:
        fm = fm_basic(g, x);
        break;
      case FmVariant::lowrank:
        fm = fm_lowrank(g, x, g.parameter(p.y_name(), store.get(p.y_name())));
        break;
      case FmVariant::lowrank_attentive:
        fm = fm_lowrank_attentive(g, store, x, g.parameter(p.y_name(), store.get(p.y_name())),
                                  g.parameter(p.wa_name(), store.get(p.wa_name())), p.attn_mlp, linear);
        break;
    }
  }
  Var flat = g.flatten(fm);
  if (!linear) {
    ComponentScope<T> scope(g, Component::ln);
    flat = g.layer_norm(flat, g.parameter(p.fmb_ln_gain(), store.get(p.fmb_ln_gain())),
                        g.parameter(p.fmb_ln_bias(), store.get(p.fmb_ln_bias())), eps);
  }
  Var h;
  {
    ComponentScope<T> scope(g, Component::fmb_mlp);
    h = mlp_forward(g, store, p.fmb_mlp, flat, linear);
  }
  if (g.shape(h)[1] % p.d != 0) throw ConfigError("fmb_forward: MLP output width not divisible by d");
  return g.reshape(h, {batch, p.n_F, p.d});
}

template <typename T>
Var lcb_forward(Graph<T>& g, Var x, Var w_l) {
  const Shape& xs = g.shape(x);
  const Shape& ws = g.shape(w_l);
  if (xs.size() != 3 || ws.size() != 2 || ws[1] != xs[1]) {
    throw ConfigError("lcb_forward: weight " + shape_string(ws) + " does not match input " + shape_string(xs));
  }
  ComponentScope<T> scope(g, Component::lcb);
  return g.matmul(w_l, x);
}

template <typename T>
Var layer_forward(Graph<T>& g, const ParamStore<T>& store, const LayerParams& p, Var x, bool linear, T eps,
                  const Ablation& ablate) {
  const std::size_t batch = g.shape(x)[0];
  std::vector<Var> parts;
  if (ablate.fmb) {
    parts.push_back(g.input(Tensor<T>({batch, p.n_F, p.d})));
  } else {
    parts.push_back(fmb_forward(g, store, p, x, linear, eps));
  }
  if (p.n_L > 0) {
    if (ablate.lcb) {
      parts.push_back(g.input(Tensor<T>({batch, p.n_L, p.d})));
    } else {
      parts.push_back(lcb_forward(g, x, g.parameter(p.lcb_name(), store.get(p.lcb_name()))));
    }
  }
  Var out = parts.size() == 1 ? parts.front() : g.concat(parts, 1);
  if (!ablate.residual) {
    ComponentScope<T> scope(g, Component::residual);
    Var res = x;
    if (p.needs_residual_projection()) {
      if (!store.contains(p.residual_name())) {
        throw ConfigError("layer " + std::to_string(p.index) + ": n_in=" + std::to_string(p.n_in) +
                          " differs from n_F+n_L=" + std::to_string(p.n_out()) + " but no residual projection exists");
      }
      res = g.matmul(g.parameter(p.residual_name(), store.get(p.residual_name())), x);
    }
    out = g.add(out, res);
  }
  if (!linear) {
    ComponentScope<T> scope(g, Component::ln);
    out = g.layer_norm(out, g.parameter(p.out_ln_gain(), store.get(p.out_ln_gain())),
                       g.parameter(p.out_ln_bias(), store.get(p.out_ln_bias())), eps);
  }
  return out;
}

template <typename T>
Var stack_forward(Graph<T>& g, const ParamStore<T>& store, const WukongConfig& c, Var x0) {
  Var x = x0;
  for (std::size_t i = 0; i < c.l; ++i) {
    const LayerParams p = layer_params(c, i);
    if (g.shape(x)[1] != p.n_in) {
      throw ConfigError("stack_forward: layer " + std::to_string(i) + " expects " + std::to_string(p.n_in) +
                        " embeddings, got " + std::to_string(g.shape(x)[1]));
    }
    g.set_context("layer " + std::to_string(i));
    x = layer_forward(g, store, p, x, c.linear_test_mode, static_cast<T>(c.ln_eps), c.ablate);
  }
  g.set_context("");
  return x;
}

template <typename T>
Tensor<T> fm_basic(const Tensor<T>& x) {
  Graph<T> g;
  return g.value(fm_basic(g, g.input(x)));
}

template <typename T>
Tensor<T> fm_lowrank(const Tensor<T>& x, const Tensor<T>& y) {
  Graph<T> g;
  return g.value(fm_lowrank(g, g.input(x), g.input(y)));
}

#define WUKONG_INSTANTIATE_INTERACTION(T)                                                              \
  template void init_layer<T>(ParamStore<T>&, const LayerParams&, std::uint64_t);                      \
  template Var fm_basic<T>(Graph<T>&, Var);                                                            \
  template Var fm_lowrank<T>(Graph<T>&, Var, Var);                                                     \
  template Var fm_lowrank_attentive<T>(Graph<T>&, const ParamStore<T>&, Var, Var, Var, const MlpSpec&, \
                                       bool);                                                          \
  template Var fmb_forward<T>(Graph<T>&, const ParamStore<T>&, const LayerParams&, Var, bool, T);      \
  template Var lcb_forward<T>(Graph<T>&, Var, Var);                                                    \
  template Var layer_forward<T>(Graph<T>&, const ParamStore<T>&, const LayerParams&, Var, bool, T,     \
                                const Ablation&);                                                      \
  template Var stack_forward<T>(Graph<T>&, const ParamStore<T>&, const WukongConfig&, Var);            \
  template Tensor<T> fm_basic<T>(const Tensor<T>&);                                                    \
  template Tensor<T> fm_lowrank<T>(const Tensor<T>&, const Tensor<T>&);

WUKONG_INSTANTIATE_INTERACTION(float)
WUKONG_INSTANTIATE_INTERACTION(double)

}  // namespace wukong
