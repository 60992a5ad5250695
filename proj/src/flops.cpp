#include "wukong/flops.hpp"

#include "wukong/features.hpp"
#include "wukong/interaction.hpp"
#include "wukong/kernels.hpp"
#include "wukong/model.hpp"

namespace wukong {

json FlopReport::to_json() const {
  return json{{"embedding", embedding},
              {"fm", fm},
              {"fmb_mlp", fmb_mlp},
              {"lcb", lcb},
              {"residual", residual},
              {"ln", ln},
              {"head", head},
              {"total", total},
              {"gflop_per_example", gflop_per_example()},
              {"params_total", params_total},
              {"params_dense", params_dense},
              {"params_sparse", params_sparse}};
}

ParamCounts count_params(const WukongConfig& c) {
  ParamCounts p;
  for (const ParamLayout& e : parameter_layout(c)) {
    const std::uint64_t n = shape_numel(e.shape);
    (e.sparse ? p.sparse : p.dense) += n;
  }
  p.total = p.dense + p.sparse;
  return p;
}

FlopReport count_flops(const WukongConfig& c) {
  FlopReport r;
  const bool bias = !c.linear_test_mode;
  const std::uint64_t d = c.d;

  for (const auto& f : c.schema.categorical_features) {
    if (f.hotness > 1) r.embedding += (f.hotness - 1) * f.table_width(c.d);
  }
  if (c.schema.has_minor()) r.embedding += mlp_flops(minor_mlp_spec(c), bias);
  if (c.schema.has_dense()) r.embedding += mlp_flops(dense_mlp_spec(c), bias);

  for (std::size_t i = 0; i < c.l; ++i) {
    const LayerParams p = layer_params(c, i);
    const std::uint64_t n = p.n_in, k = p.k, n_out = p.n_out();
    if (!c.ablate.fmb) {
      switch (p.variant) {
        case FmVariant::basic:
          r.fm += 2 * n * n * d;
          break;
        case FmVariant::lowrank:
          r.fm += 4 * n * d * k;  // X^T Y, then X (X^T Y)
          break;
        case FmVariant::lowrank_attentive:
          r.fm += 2 * p.n_A * n * d + mlp_flops(p.attn_mlp, bias) + n * k + 4 * n * d * k;
          break;
      }
      if (bias) r.ln += kLayerNormFlopsPerElement * p.fm_width();
      r.fmb_mlp += mlp_flops(p.fmb_mlp, bias);
    }
    if (p.n_L > 0 && !c.ablate.lcb) r.lcb += 2 * p.n_L * n * d;
    if (!c.ablate.residual) {
      r.residual += n_out * d;
      if (p.needs_residual_projection()) r.residual += 2 * n_out * n * d;
    }
    if (bias) r.ln += kLayerNormFlopsPerElement * n_out * d;
  }
  r.head = mlp_flops(head_mlp_spec(c), bias);
  r.total = r.embedding + r.fm + r.fmb_mlp + r.lcb + r.residual + r.ln + r.head;

  const ParamCounts pc = count_params(c);
  r.params_total = pc.total;
  r.params_dense = pc.dense;
  r.params_sparse = pc.sparse;
  return r;
}

template <typename T>
FlopReport instrumented_flops(const Graph<T>& g, std::size_t batch_size) {
  const auto per_example = [&](Component c) {
    const std::uint64_t f = g.flops(c);
    if (batch_size == 0 || f % batch_size != 0) {
      throw ConfigError(std::string("instrumented flops for ") + component_name(c) + " (" + std::to_string(f) +
                        ") not divisible by batch size " + std::to_string(batch_size));
    }
    return f / batch_size;
  };
  FlopReport r;
  r.embedding = per_example(Component::embedding);
  r.fm = per_example(Component::fm);
  r.fmb_mlp = per_example(Component::fmb_mlp);
  r.lcb = per_example(Component::lcb);
  r.residual = per_example(Component::residual);
  r.ln = per_example(Component::ln);
  r.head = per_example(Component::head);
  r.total = r.embedding + r.fm + r.fmb_mlp + r.lcb + r.residual + r.ln + r.head;
  return r;
}

template FlopReport instrumented_flops<float>(const Graph<float>&, std::size_t);
template FlopReport instrumented_flops<double>(const Graph<double>&, std::size_t);

}  // namespace wukong
