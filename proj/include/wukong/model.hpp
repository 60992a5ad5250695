#pragma once

// The full model: embedding layer -> interaction stack -> prediction head.

#include <string>
#include <vector>

#include "wukong/config.hpp"
#include "wukong/features.hpp"
#include "wukong/interaction.hpp"
#include "wukong/params.hpp"

namespace wukong {

template <typename T>
struct ModelParams {
  WukongConfig config;
  ParamStore<T> store;
};

struct ParamLayout {
  std::string name;
  Shape shape;
  bool sparse = false;
};

// Expected registry (names, shapes, sparsity, order) for a config, computed
// without allocating anything.
std::vector<ParamLayout> parameter_layout(const WukongConfig& c);

// [stack_output * d, head_mlp..., 1]
MlpSpec head_mlp_spec(const WukongConfig& c);

// Validates the config and initializes every tensor deterministically from
// config.seed: dense weights uniform(+-1/sqrt(fan_in)), biases and LN
// offsets zero, LN gains one, embedding rows uniform(+-1/sqrt(d)).
template <typename T>
ModelParams<T> build_model(const WukongConfig& c);

// Throws ConfigError unless the store matches parameter_layout(config).
template <typename T>
void check_layout(const ModelParams<T>& m);

// Logits (shape [B]) for a batch. Every model parameter is bound into the
// graph first, so backward() reports a gradient for each of them.
template <typename T>
Var forward(Graph<T>& g, const ModelParams<T>& m, const ExampleBatch& batch);

// Interaction stack and head applied to a given X0 (B x n x d).
template <typename T>
Var forward_from_x0(Graph<T>& g, const ModelParams<T>& m, Var x0);

template <typename T>
Tensor<T> predict_logits(const ModelParams<T>& m, const ExampleBatch& batch);

}  // namespace wukong
