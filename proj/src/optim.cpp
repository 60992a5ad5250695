#include "wukong/optim.hpp"

#include <cmath>

namespace wukong {

void AdamConfig::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("adam: lr must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("adam: beta1 must lie in [0, 1)");
  if (beta2 == 1.0) {
    throw ConfigError("adam: beta2 = 1 makes the second-moment bias correction degenerate; use beta2 < 1");
  }
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam: beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("adam: eps must be positive");
}

void AdagradConfig::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("adagrad: lr must be >= 0");
  if (!(eps >= 0.0)) throw ConfigError("adagrad: eps must be >= 0");
}

template <typename T>
void adam_update(Tensor<T>& param, const Tensor<T>& grad, AdamMoments<T>& moments, std::uint64_t step,
                 const AdamConfig& cfg, double lr, double grad_scale) {
  if (param.shape() != grad.shape()) {
    throw ConfigError("adam: parameter " + shape_string(param.shape()) + " vs gradient " + shape_string(grad.shape()));
  }
  if (moments.m.empty()) {
    moments.m = Tensor<T>(param.shape());
    moments.v = Tensor<T>(param.shape());
  }
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T bc1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(step)));
  const T bc2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(step)));
  const T rate = static_cast<T>(lr);
  const T eps = static_cast<T>(cfg.eps);
  const T gs = static_cast<T>(grad_scale);
  for (std::size_t i = 0; i < param.numel(); ++i) {
    const T g = grad[i] * gs;
    moments.m[i] = b1 * moments.m[i] + (T{1} - b1) * g;
    moments.v[i] = b2 * moments.v[i] + (T{1} - b2) * g * g;
    const T m_hat = moments.m[i] / bc1;
    const T v_hat = moments.v[i] / bc2;
    param[i] -= rate * m_hat / (std::sqrt(v_hat) + eps);
  }
}

template <typename T>
void rowwise_adagrad_update(Tensor<T>& table, const RowGrad<T>& grad, std::vector<T>& accumulator, double lr,
                            double eps, double grad_scale) {
  const std::size_t width = table.dim(1);
  if (grad.width != width && !grad.rows.empty()) {
    throw ConfigError("adagrad: gradient width " + std::to_string(grad.width) + " vs table width " +
                      std::to_string(width));
  }
  if (accumulator.size() != table.dim(0)) accumulator.assign(table.dim(0), T{0});
  const T rate = static_cast<T>(lr);
  const T e = static_cast<T>(eps);
  const T gs = static_cast<T>(grad_scale);
  for (std::size_t slot = 0; slot < grad.rows.size(); ++slot) {
    const std::size_t r = grad.rows[slot];
    const T* g = grad.values.data() + slot * width;
    T sq{0};
    for (std::size_t j = 0; j < width; ++j) sq += (g[j] * gs) * (g[j] * gs);
    accumulator[r] += sq / static_cast<T>(width);
    const T step = rate / std::sqrt(accumulator[r] + e);
    T* row = table.data() + r * width;
    for (std::size_t j = 0; j < width; ++j) row[j] -= step * g[j] * gs;
  }
}

template <typename T>
double gradient_norm(const GradientMap<T>& grads) {
  double sq = 0.0;
  for (const auto& e : grads.entries()) {
    if (e.sparse) {
      for (T v : e.rows.values) sq += static_cast<double>(v) * static_cast<double>(v);
    } else {
      for (T v : e.dense.values()) sq += static_cast<double>(v) * static_cast<double>(v);
    }
  }
  return std::sqrt(sq);
}

template <typename T>
Optimizer<T>::Optimizer(const ParamStore<T>& store, AdamConfig dense, AdagradConfig sparse)
    : dense_(dense), sparse_(sparse) {
  dense_.validate();
  sparse_.validate();
  for (const auto& e : store.entries()) {
    if (e.sparse) {
      state_.row_accumulators[e.name].assign(e.value.dim(0), T{0});
    } else {
      state_.adam[e.name] = AdamMoments<T>{Tensor<T>(e.value.shape()), Tensor<T>(e.value.shape())};
    }
  }
}

template <typename T>
void Optimizer<T>::step(ParamStore<T>& store, const GradientMap<T>& grads, double lr_scale, double clip_norm) {
  for (const auto& e : grads.entries()) {
    const auto check = [&](std::span<const T> values) {
      for (T v : values) {
        if (!std::isfinite(v)) throw NumericError("non-finite gradient for parameter '" + e.name + "'");
      }
    };
    check(e.sparse ? std::span<const T>(e.rows.values) : e.dense.values());
  }
  double scale = 1.0;
  if (clip_norm > 0.0) {
    const double norm = gradient_norm(grads);
    if (norm > clip_norm) scale = clip_norm / norm;
  }
  ++state_.step;
  for (const auto& e : grads.entries()) {
    Tensor<T>& param = store.get(e.name);
    if (e.sparse) {
      rowwise_adagrad_update(param, e.rows, state_.row_accumulators[e.name], sparse_.lr * lr_scale, sparse_.eps,
                             scale);
    } else {
      adam_update(param, e.dense, state_.adam[e.name], state_.step, dense_, dense_.lr * lr_scale, scale);
    }
  }
}

#define WUKONG_INSTANTIATE_OPTIM(T)                                                                          \
  template void adam_update<T>(Tensor<T>&, const Tensor<T>&, AdamMoments<T>&, std::uint64_t, const AdamConfig&, \
                               double, double);                                                              \
  template void rowwise_adagrad_update<T>(Tensor<T>&, const RowGrad<T>&, std::vector<T>&, double, double,     \
                                          double);                                                           \
  template double gradient_norm<T>(const GradientMap<T>&);                                                   \
  template class Optimizer<T>;

WUKONG_INSTANTIATE_OPTIM(float)
WUKONG_INSTANTIATE_OPTIM(double)

}  // namespace wukong
