#include "wukong/features.hpp"

#include <cmath>

namespace wukong {

std::string table_name(const CategoricalFeature& f) { return "emb." + f.name; }

MlpSpec minor_mlp_spec(const WukongConfig& c) {
  return make_mlp_spec("minor.mlp", c.schema.minor_concat_width(), {c.schema.minor_hidden},
                       c.schema.n_minor_out * c.d);
}

MlpSpec dense_mlp_spec(const WukongConfig& c) {
  return make_mlp_spec("dense.mlp", c.schema.num_dense(), c.dense_mlp, c.schema.m_dense * c.d);
}

template <typename T>
void init_embedding_layer(ParamStore<T>& store, const WukongConfig& c) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(c.d));
  for (const auto& f : c.schema.categorical_features) {
    const std::string name = table_name(f);
    store.add(name, uniform_tensor<T>({f.cardinality, f.table_width(c.d)}, bound, c.seed, name), true);
  }
  if (c.schema.has_minor()) init_mlp(store, minor_mlp_spec(c), c.seed);
  if (c.schema.has_dense()) init_mlp(store, dense_mlp_spec(c), c.seed);
}

template <typename T>
Var lookup_pooled(Graph<T>& g, const ParamStore<T>& store, const FeatureSchema& schema,
                  const ExampleBatch& batch, std::size_t feature) {
  if (feature >= schema.categorical_features.size() || feature >= batch.categorical.size()) {
    throw ConfigError("lookup_pooled: feature index " + std::to_string(feature) + " out of range");
  }
  const CategoricalFeature& f = schema.categorical_features[feature];
  const std::string name = table_name(f);
  Var table = g.sparse_parameter(name, store.get(name));
  const MultiHot& mh = batch.categorical[feature];
  return g.lookup_sum(table, mh.offsets, mh.ids, f.name);
}

template <typename T>
Var encode_dense(Graph<T>& g, const ParamStore<T>& store, const WukongConfig& c, Var dense) {
  const MlpSpec spec = dense_mlp_spec(c);
  const Tensor<T>& last = store.get(spec.weight_name(spec.layers() - 1));
  if (last.dim(1) != c.schema.m_dense * c.d) {
    throw ConfigError("encode_dense: MLP output width " + std::to_string(last.dim(1)) + " != m_dense*d = " +
                      std::to_string(c.schema.m_dense * c.d));
  }
  Var h = mlp_forward(g, store, spec, dense, c.linear_test_mode);
  return g.reshape(h, {g.shape(h)[0], c.schema.m_dense, c.d});
}

template <typename T>
Var assemble_x0(Graph<T>& g, const ParamStore<T>& store, const WukongConfig& c, const ExampleBatch& batch) {
  ComponentScope<T> scope(g, Component::embedding);
  const FeatureSchema& schema = c.schema;
  const std::size_t batch_size = batch.size();
  if (batch_size == 0) throw DataError("assemble_x0: empty batch");
  std::vector<Var> blocks;
  std::vector<Var> minors;
  for (std::size_t i = 0; i < schema.categorical_features.size(); ++i) {
    const CategoricalFeature& f = schema.categorical_features[i];
    Var pooled = lookup_pooled(g, store, schema, batch, i);
    if (f.importance == Importance::major) {
      blocks.push_back(g.reshape(pooled, {batch_size, f.num_embeddings, c.d}));
    } else {
      minors.push_back(pooled);
    }
  }
  if (!minors.empty()) {
    const MlpSpec spec = minor_mlp_spec(c);
    Var cat = minors.size() == 1 ? minors.front() : g.concat(minors, 1);
    if (g.shape(cat)[1] != spec.in()) {
      throw ConfigError("assemble_x0: minor concat width " + std::to_string(g.shape(cat)[1]) +
                        " != minor MLP input width " + std::to_string(spec.in()));
    }
    Var h = mlp_forward(g, store, spec, cat, c.linear_test_mode);
    blocks.push_back(g.reshape(h, {batch_size, schema.n_minor_out, c.d}));
  }
  if (schema.has_dense()) {
    Tensor<T> dense({batch_size, schema.num_dense()});
    for (std::size_t i = 0; i < dense.numel(); ++i) dense[i] = static_cast<T>(batch.dense[i]);
    blocks.push_back(encode_dense(g, store, c, g.input(std::move(dense))));
  }
  return blocks.size() == 1 ? blocks.front() : g.concat(blocks, 1);
}

#define WUKONG_INSTANTIATE_FEATURES(T)                                                              \
  template void init_embedding_layer<T>(ParamStore<T>&, const WukongConfig&);                       \
  template Var lookup_pooled<T>(Graph<T>&, const ParamStore<T>&, const FeatureSchema&,              \
                                const ExampleBatch&, std::size_t);                                  \
  template Var encode_dense<T>(Graph<T>&, const ParamStore<T>&, const WukongConfig&, Var);          \
  template Var assemble_x0<T>(Graph<T>&, const ParamStore<T>&, const WukongConfig&, const ExampleBatch&);

WUKONG_INSTANTIATE_FEATURES(float)
WUKONG_INSTANTIATE_FEATURES(double)

}  // namespace wukong
