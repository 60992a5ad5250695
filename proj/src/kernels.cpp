#include "wukong/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace wukong {

namespace kernels {

template <typename T>
void gemm_accumulate(const T* a, const T* b, T* c, std::size_t m, std::size_t p, std::size_t q,
                     bool trans_a, bool trans_b) {
  if (!trans_a && !trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      T* ci = c + i * q;
      const T* ai = a + i * p;
      for (std::size_t k = 0; k < p; ++k) {
        const T aik = ai[k];
        const T* bk = b + k * q;
        for (std::size_t j = 0; j < q; ++j) ci[j] += aik * bk[j];
      }
    }
  } else if (trans_a && !trans_b) {
    // a stored p x m
    for (std::size_t k = 0; k < p; ++k) {
      const T* ak = a + k * m;
      const T* bk = b + k * q;
      for (std::size_t i = 0; i < m; ++i) {
        const T aki = ak[i];
        T* ci = c + i * q;
        for (std::size_t j = 0; j < q; ++j) ci[j] += aki * bk[j];
      }
    }
  } else if (!trans_a && trans_b) {
    // b stored q x p
    for (std::size_t i = 0; i < m; ++i) {
      const T* ai = a + i * p;
      T* ci = c + i * q;
      for (std::size_t j = 0; j < q; ++j) {
        const T* bj = b + j * p;
        T acc{0};
        for (std::size_t k = 0; k < p; ++k) acc += ai[k] * bj[k];
        ci[j] += acc;
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      T* ci = c + i * q;
      for (std::size_t j = 0; j < q; ++j) {
        T acc{0};
        for (std::size_t k = 0; k < p; ++k) acc += a[k * m + i] * b[j * p + k];
        ci[j] += acc;
      }
    }
  }
}

template void gemm_accumulate<float>(const float*, const float*, float*, std::size_t, std::size_t,
                                     std::size_t, bool, bool);
template void gemm_accumulate<double>(const double*, const double*, double*, std::size_t,
                                      std::size_t, std::size_t, bool, bool);

}  // namespace kernels

namespace {

struct MatDims {
  std::size_t rows;
  std::size_t cols;
};

MatDims op_dims(const Shape& s, bool trans) {
  const std::size_t r = s[s.size() - 2];
  const std::size_t c = s[s.size() - 1];
  return trans ? MatDims{c, r} : MatDims{r, c};
}

void require_same_shape(const char* op, const Shape& a, const Shape& b) {
  if (a != b) {
    throw ConfigError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                      shape_string(b));
  }
}

}  // namespace

Shape matmul_shape(const Shape& a, const Shape& b, bool trans_a, bool trans_b) {
  const auto fail = [&](const std::string& why) {
    throw ConfigError("matmul: " + why + " (" + shape_string(a) + (trans_a ? "^T" : "") + " x " +
                      shape_string(b) + (trans_b ? "^T" : "") + ")");
  };
  if (a.size() < 2 || a.size() > 3 || b.size() < 2 || b.size() > 3) fail("operands must be rank 2 or 3");
  const MatDims da = op_dims(a, trans_a);
  const MatDims db = op_dims(b, trans_b);
  if (da.cols != db.rows) fail("inner extents differ");
  if (a.size() == 3 && b.size() == 3 && a[0] != b[0]) fail("batch extents differ");
  if (a.size() == 3) return {a[0], da.rows, db.cols};
  if (b.size() == 3) return {b[0], da.rows, db.cols};
  return {da.rows, db.cols};
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool trans_a, bool trans_b) {
  const Shape out_shape = matmul_shape(a.shape(), b.shape(), trans_a, trans_b);
  Tensor<T> out(out_shape);
  const MatDims da = op_dims(a.shape(), trans_a);
  const MatDims db = op_dims(b.shape(), trans_b);
  const std::size_t m = da.rows, p = da.cols, q = db.cols;
  const std::size_t batch = out_shape.size() == 3 ? out_shape[0] : 1;
  const std::size_t a_stride = a.rank() == 3 ? m * p : 0;
  const std::size_t b_stride = b.rank() == 3 ? p * q : 0;
  if (a.rank() == 3 && b.rank() == 2 && !trans_a) {
    // rows of every batch slice are contiguous; one large product
    kernels::gemm_accumulate(a.data(), b.data(), out.data(), batch * m, p, q, false, trans_b);
    return out;
  }
  for (std::size_t s = 0; s < batch; ++s) {
    kernels::gemm_accumulate(a.data() + s * a_stride, b.data() + s * b_stride,
                             out.data() + s * m * q, m, p, q, trans_a, trans_b);
  }
  return out;
}

bool is_trailing_shape(const Shape& x, const Shape& y) {
  if (y.size() > x.size() || y.empty()) return false;
  return std::equal(y.rbegin(), y.rend(), x.rbegin());
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps,
                     LayerNormCache<T>* cache) {
  if (x.empty()) throw ConfigError("layer_norm: null input");
  if (!(eps > T{0})) throw ConfigError("layer_norm: eps must be positive");
  const std::size_t width = x.shape().back();
  if (!is_trailing_shape(x.shape(), gain.shape()) || gain.numel() % width != 0) {
    throw ConfigError("layer_norm: gain shape " + shape_string(gain.shape()) +
                      " does not cover the last axis of " + shape_string(x.shape()));
  }
  require_same_shape("layer_norm gain/bias", gain.shape(), bias.shape());
  const std::size_t slices = x.numel() / width;
  const std::size_t affine = gain.numel();
  Tensor<T> out(x.shape());
  Tensor<T> normalized;
  if (cache) {
    normalized = Tensor<T>(x.shape());
    cache->rstd.assign(slices, T{0});
  }
  for (std::size_t s = 0; s < slices; ++s) {
    const T* xs = x.data() + s * width;
    T mean{0};
    for (std::size_t j = 0; j < width; ++j) mean += xs[j];
    mean /= static_cast<T>(width);
    T var{0};
    for (std::size_t j = 0; j < width; ++j) {
      const T c = xs[j] - mean;
      var += c * c;
    }
    var /= static_cast<T>(width);
    const T rstd = T{1} / std::sqrt(var + eps);
    const std::size_t g0 = (s * width) % affine;
    T* os = out.data() + s * width;
    for (std::size_t j = 0; j < width; ++j) {
      const T xhat = (xs[j] - mean) * rstd;
      os[j] = gain[g0 + j] * xhat + bias[g0 + j];
      if (cache) normalized[s * width + j] = xhat;
    }
    if (cache) cache->rstd[s] = rstd;
  }
  if (cache) cache->normalized = std::move(normalized);
  return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  return layer_norm<T>(x, gain, bias, eps, nullptr);
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a.shape(), b.shape());
  Tensor<T> out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b[i];
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a.shape(), b.shape());
  Tensor<T> out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b[i];
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  Tensor<T> out = a;
  for (auto& v : out.values()) v *= s;
  return out;
}

template <typename T>
Tensor<T> add_broadcast(const Tensor<T>& x, const Tensor<T>& y) {
  if (!is_trailing_shape(x.shape(), y.shape())) {
    throw ConfigError("add_broadcast: " + shape_string(y.shape()) + " is not a trailing shape of " +
                      shape_string(x.shape()));
  }
  Tensor<T> out = x;
  const std::size_t n = y.numel();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += y[i % n];
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out = x;
  for (auto& v : out.values()) v = v > T{0} ? v : T{0};
  return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> out = x;
  for (auto& v : out.values()) {
    if (v >= T{0}) {
      v = T{1} / (T{1} + std::exp(-v));
    } else {
      const T e = std::exp(v);
      v = e / (T{1} + e);
    }
  }
  return out;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  if (x.rank() < 2 || x.rank() > 3) {
    throw ConfigError("transpose: expected rank 2 or 3, got " + shape_string(x.shape()));
  }
  const std::size_t r = x.shape()[x.rank() - 2];
  const std::size_t c = x.shape()[x.rank() - 1];
  const std::size_t batch = x.rank() == 3 ? x.dim(0) : 1;
  Shape s = x.shape();
  std::swap(s[s.size() - 1], s[s.size() - 2]);
  Tensor<T> out(s);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* src = x.data() + b * r * c;
    T* dst = out.data() + b * r * c;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
  }
  return out;
}

template <typename T>
Tensor<T> concat(const std::vector<const Tensor<T>*>& parts, std::size_t axis) {
  if (parts.empty()) throw ConfigError("concat: no inputs");
  const Shape& first = parts.front()->shape();
  if (axis >= first.size()) throw ConfigError("concat: axis out of range for " + shape_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor<T>* p : parts) {
    const Shape& s = p->shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) {
      throw ConfigError("concat: shape mismatch " + shape_string(first) + " vs " + shape_string(s));
    }
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  Tensor<T> out(out_shape);
  const std::size_t out_row = out_shape[axis] * inner;
  std::size_t offset = 0;
  for (const Tensor<T>* p : parts) {
    const std::size_t chunk = p->shape()[axis] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(p->data() + o * chunk, chunk, out.data() + o * out_row + offset);
    }
    offset += chunk;
  }
  return out;
}

template <typename T>
Tensor<T> flatten(const Tensor<T>& x) {
  return x.reshaped({x.dim(0), x.numel() / x.dim(0)});
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  return x.reshaped(std::move(shape));
}

#define WUKONG_INSTANTIATE_KERNELS(T)                                                            \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&, bool, bool);                  \
  template Tensor<T> layer_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);     \
  template Tensor<T> layer_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T,      \
                                   LayerNormCache<T>*);                                          \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                              \
  template Tensor<T> add_broadcast<T>(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> relu<T>(const Tensor<T>&);                                                  \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                                               \
  template Tensor<T> transpose<T>(const Tensor<T>&);                                             \
  template Tensor<T> concat<T>(const std::vector<const Tensor<T>*>&, std::size_t);               \
  template Tensor<T> flatten<T>(const Tensor<T>&);                                               \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);

WUKONG_INSTANTIATE_KERNELS(float)
WUKONG_INSTANTIATE_KERNELS(double)

}  // namespace wukong
