#pragma once

// Embedding layer: pooled categorical lookups, the minor-feature group MLP
// and the dense-input encoder, assembled into X0 of shape B x n x d.

#include "wukong/config.hpp"
#include "wukong/params.hpp"

namespace wukong {

std::string table_name(const CategoricalFeature& f);

// [sum of minor underlying dims, minor_hidden, n_minor_out * d]
MlpSpec minor_mlp_spec(const WukongConfig& c);
// [num dense, dense_mlp..., m_dense * d]
MlpSpec dense_mlp_spec(const WukongConfig& c);

// Tables get uniform(-1/sqrt(d), 1/sqrt(d)) rows.
template <typename T>
void init_embedding_layer(ParamStore<T>& store, const WukongConfig& c);

// B x table width: per example, the sum of the rows its ids select (zero row
// for an empty id list).
template <typename T>
Var lookup_pooled(Graph<T>& g, const ParamStore<T>& store, const FeatureSchema& schema,
                  const ExampleBatch& batch, std::size_t feature);

// B x D_dense -> B x m_dense x d.
template <typename T>
Var encode_dense(Graph<T>& g, const ParamStore<T>& store, const WukongConfig& c, Var dense);

template <typename T>
Var assemble_x0(Graph<T>& g, const ParamStore<T>& store, const WukongConfig& c, const ExampleBatch& batch);

}  // namespace wukong
