#pragma once

// Exact FLOP and parameter accounting.
//
// Counts are per example under the kernel convention (2 FLOPs per
// multiply-add, 1 per lone add, 7 per layer-norm element, free activations
// and reshapes). Embedding gathers are not counted; pooling adds are, using
// each feature's declared hotness.

#include <cstdint>

#include "wukong/config.hpp"
#include "wukong/graph.hpp"

namespace wukong {

struct FlopReport {
  std::uint64_t embedding = 0;  // pooling adds, minor-group MLP, dense encoder
  std::uint64_t fm = 0;
  std::uint64_t fmb_mlp = 0;
  std::uint64_t lcb = 0;
  std::uint64_t residual = 0;
  std::uint64_t ln = 0;
  std::uint64_t head = 0;
  std::uint64_t total = 0;
  std::uint64_t params_total = 0;
  std::uint64_t params_dense = 0;
  std::uint64_t params_sparse = 0;

  double gflop_per_example() const { return static_cast<double>(total) * 1e-9; }
  json to_json() const;

  friend bool operator==(const FlopReport&, const FlopReport&) = default;
};

struct ParamCounts {
  std::uint64_t total = 0;
  std::uint64_t dense = 0;
  std::uint64_t sparse = 0;
};

// Symbolic per-example counts derived from the config alone.
FlopReport count_flops(const WukongConfig& c);

// sparse = embedding tables, dense = everything else.
ParamCounts count_params(const WukongConfig& c);

// Per-example counts read from a graph's instrumentation after a forward
// pass over batch_size examples. Throws if a component is not divisible.
template <typename T>
FlopReport instrumented_flops(const Graph<T>& g, std::size_t batch_size);

}  // namespace wukong
