#pragma once

// Dense parameters: bias-corrected Adam. Embedding tables: row-wise AdaGrad
// with one accumulator scalar per row, applied only to rows a batch touched.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wukong/graph.hpp"
#include "wukong/params.hpp"

namespace wukong {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  // beta2 == 1 leaves the second-moment bias correction 1 - beta2^t at zero
  // and is rejected.
  void validate() const;
};

struct AdagradConfig {
  double lr = 1e-1;
  double eps = 1e-8;

  void validate() const;
};

template <typename T>
struct AdamMoments {
  Tensor<T> m;
  Tensor<T> v;
};

// One Adam update of a single tensor; step is the 1-based update count.
template <typename T>
void adam_update(Tensor<T>& param, const Tensor<T>& grad, AdamMoments<T>& moments, std::uint64_t step,
                 const AdamConfig& cfg, double lr, double grad_scale = 1.0);

// acc[r] += mean(g_r^2); row_r -= lr * g_r / sqrt(acc[r] + eps), touched rows only.
template <typename T>
void rowwise_adagrad_update(Tensor<T>& table, const RowGrad<T>& grad, std::vector<T>& accumulator, double lr,
                            double eps, double grad_scale = 1.0);

template <typename T>
struct OptimizerState {
  std::uint64_t step = 0;
  std::map<std::string, AdamMoments<T>> adam;
  std::map<std::string, std::vector<T>> row_accumulators;
};

template <typename T>
class Optimizer {
 public:
  Optimizer(const ParamStore<T>& store, AdamConfig dense, AdagradConfig sparse);

  // Applies one step to every parameter in grads. Aborts before touching
  // anything if a gradient is non-finite (NumericError names the parameter).
  // lr_scale multiplies both learning rates (warmup).
  void step(ParamStore<T>& store, const GradientMap<T>& grads, double lr_scale = 1.0, double clip_norm = 0.0);

  const OptimizerState<T>& state() const { return state_; }
  const AdamConfig& dense_config() const { return dense_; }
  const AdagradConfig& sparse_config() const { return sparse_; }

 private:
  AdamConfig dense_;
  AdagradConfig sparse_;
  OptimizerState<T> state_;
};

// Global L2 norm over every dense and sparse gradient value.
template <typename T>
double gradient_norm(const GradientMap<T>& grads);

}  // namespace wukong
