#pragma once

// Eager dense kernels. Every op validates shapes before touching data and
// throws ConfigError naming the offending shapes.
//
// FLOP convention used throughout the library: one multiply-add is 2 FLOPs,
// a lone add or multiply is 1 FLOP, layer norm costs 7 FLOPs per element,
// activations, reshapes and concatenation are free.

#include <cstdint>
#include <vector>

#include "wukong/tensor.hpp"

namespace wukong {

inline constexpr std::uint64_t kLayerNormFlopsPerElement = 7;

namespace kernels {

// C (m x q) += op(A) (m x p) * op(B) (p x q). A is stored m x p, or p x m when
// trans_a; B is stored p x q, or q x p when trans_b.
template <typename T>
void gemm_accumulate(const T* a, const T* b, T* c, std::size_t m, std::size_t p, std::size_t q,
                     bool trans_a, bool trans_b);

}  // namespace kernels

// Matrix product with optional transposes of the last two axes. Rank-2
// operands broadcast across the batch axis of a rank-3 partner.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool trans_a = false, bool trans_b = false);

// Output shape of matmul(a, b, trans_a, trans_b); throws on mismatch.
Shape matmul_shape(const Shape& a, const Shape& b, bool trans_a, bool trans_b);

// Per last-axis slice: gain * (x - mean) / sqrt(var + eps) + bias. gain and
// bias may cover the last axis only or any number of trailing axes.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps);

// Normalized values and per-slice reciprocal std, needed by the backward pass.
template <typename T>
struct LayerNormCache {
  Tensor<T> normalized;
  std::vector<T> rstd;
};

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps,
                     LayerNormCache<T>* cache);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s);

// x + y where y's shape equals the trailing axes of x (bias add, broadcast Y).
template <typename T>
Tensor<T> add_broadcast(const Tensor<T>& x, const Tensor<T>& y);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

// Swap the last two axes.
template <typename T>
Tensor<T> transpose(const Tensor<T>& x);

template <typename T>
Tensor<T> concat(const std::vector<const Tensor<T>*>& parts, std::size_t axis);

// Collapse every axis after the first into one.
template <typename T>
Tensor<T> flatten(const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

// Check that y's shape is a suffix of x's (after an optional leading run).
bool is_trailing_shape(const Shape& x, const Shape& y);

}  // namespace wukong
