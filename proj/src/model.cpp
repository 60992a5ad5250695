#include "wukong/model.hpp"

namespace wukong {

MlpSpec head_mlp_spec(const WukongConfig& c) {
  return make_mlp_spec("head.mlp", c.stack_output() * c.d, c.head_mlp, 1);
}

namespace {

void add_mlp_layout(std::vector<ParamLayout>& out, const MlpSpec& spec) {
  for (std::size_t i = 0; i < spec.layers(); ++i) {
    out.push_back({spec.weight_name(i), {spec.widths[i], spec.widths[i + 1]}, false});
    out.push_back({spec.bias_name(i), {spec.widths[i + 1]}, false});
  }
}

}  // namespace

std::vector<ParamLayout> parameter_layout(const WukongConfig& c) {
  std::vector<ParamLayout> out;
  for (const auto& f : c.schema.categorical_features) {
    out.push_back({table_name(f), {f.cardinality, f.table_width(c.d)}, true});
  }
  if (c.schema.has_minor()) add_mlp_layout(out, minor_mlp_spec(c));
  if (c.schema.has_dense()) add_mlp_layout(out, dense_mlp_spec(c));
  for (std::size_t i = 0; i < c.l; ++i) {
    const LayerParams p = layer_params(c, i);
    if (p.variant != FmVariant::basic) out.push_back({p.y_name(), {p.n_in, p.k}, false});
    if (p.variant == FmVariant::lowrank_attentive) {
      out.push_back({p.wa_name(), {p.n_A, p.n_in}, false});
      add_mlp_layout(out, p.attn_mlp);
    }
    out.push_back({p.fmb_ln_gain(), {p.fm_width()}, false});
    out.push_back({p.fmb_ln_bias(), {p.fm_width()}, false});
    add_mlp_layout(out, p.fmb_mlp);
    if (p.n_L > 0) out.push_back({p.lcb_name(), {p.n_L, p.n_in}, false});
    if (p.needs_residual_projection()) out.push_back({p.residual_name(), {p.n_out(), p.n_in}, false});
    out.push_back({p.out_ln_gain(), {p.n_out(), p.d}, false});
    out.push_back({p.out_ln_bias(), {p.n_out(), p.d}, false});
  }
  add_mlp_layout(out, head_mlp_spec(c));
  return out;
}

template <typename T>
ModelParams<T> build_model(const WukongConfig& c) {
  c.validate();
  ModelParams<T> m;
  m.config = c;
  init_embedding_layer(m.store, c);
  for (std::size_t i = 0; i < c.l; ++i) init_layer(m.store, layer_params(c, i), c.seed);
  init_mlp(m.store, head_mlp_spec(c), c.seed);
  check_layout(m);
  return m;
}

template <typename T>
void check_layout(const ModelParams<T>& m) {
  const auto layout = parameter_layout(m.config);
  const auto& entries = m.store.entries();
  if (layout.size() != entries.size()) {
    throw ConfigError("model: " + std::to_string(entries.size()) + " parameters, config implies " +
                      std::to_string(layout.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& want = layout[i];
    const auto& have = entries[i];
    if (want.name != have.name || want.shape != have.value.shape() || want.sparse != have.sparse) {
      throw ConfigError("model: parameter #" + std::to_string(i) + " is '" + have.name + "' " +
                        shape_string(have.value.shape()) + ", config implies '" + want.name + "' " +
                        shape_string(want.shape));
    }
  }
}

template <typename T>
Var forward_from_x0(Graph<T>& g, const ModelParams<T>& m, Var x0) {
  const WukongConfig& c = m.config;
  const Shape xs = g.shape(x0);
  if (xs.size() != 3 || xs[1] != c.n0() || xs[2] != c.d) {
    throw ConfigError("forward: X0 " + shape_string(xs) + " does not match n=" + std::to_string(c.n0()) +
                      ", d=" + std::to_string(c.d));
  }
  Var x = stack_forward(g, m.store, c, x0);
  ComponentScope<T> scope(g, Component::head);
  g.set_context("head");
  Var h = mlp_forward(g, m.store, head_mlp_spec(c), g.flatten(x), c.linear_test_mode);
  g.set_context("");
  return g.reshape(h, {xs[0]});
}

template <typename T>
Var forward(Graph<T>& g, const ModelParams<T>& m, const ExampleBatch& batch) {
  batch.validate(m.config.schema);
  m.store.bind_all(g);
  g.set_context("embedding");
  Var x0 = assemble_x0(g, m.store, m.config, batch);
  return forward_from_x0(g, m, x0);
}

template <typename T>
Tensor<T> predict_logits(const ModelParams<T>& m, const ExampleBatch& batch) {
  Graph<T> g;
  return g.value(forward(g, m, batch));
}

#define WUKONG_INSTANTIATE_MODEL(T)                                            \
  template ModelParams<T> build_model<T>(const WukongConfig&);                 \
  template void check_layout<T>(const ModelParams<T>&);                        \
  template Var forward<T>(Graph<T>&, const ModelParams<T>&, const ExampleBatch&); \
  template Var forward_from_x0<T>(Graph<T>&, const ModelParams<T>&, Var);      \
  template Tensor<T> predict_logits<T>(const ModelParams<T>&, const ExampleBatch&);

WUKONG_INSTANTIATE_MODEL(float)
WUKONG_INSTANTIATE_MODEL(double)

}  // namespace wukong
