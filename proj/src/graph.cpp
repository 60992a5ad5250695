#include "wukong/graph.hpp"

#include <algorithm>
#include <cmath>

namespace wukong {

const char* component_name(Component c) {
  switch (c) {
    case Component::embedding: return "embedding";
    case Component::fm: return "fm";
    case Component::fmb_mlp: return "fmb_mlp";
    case Component::lcb: return "lcb";
    case Component::residual: return "residual";
    case Component::ln: return "ln";
    case Component::head: return "head";
    case Component::loss: return "loss";
  }
  return "?";
}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::input: return "input";
    case OpKind::parameter: return "parameter";
    case OpKind::sparse_parameter: return "sparse_parameter";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::add_broadcast: return "add_broadcast";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::layer_norm: return "layer_norm";
    case OpKind::reshape: return "reshape";
    case OpKind::concat: return "concat";
    case OpKind::transpose: return "transpose";
    case OpKind::lookup_sum: return "lookup_sum";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::bce_logits: return "bce_logits";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// GradientMap

template <typename T>
const typename GradientMap<T>::Entry& GradientMap<T>::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("no gradient for parameter '" + name + "'");
  return entries_[it->second];
}

template <typename T>
Tensor<T> GradientMap<T>::dense_of(const std::string& name) const {
  const Entry& e = at(name);
  if (!e.sparse) return e.dense;
  Tensor<T> out(e.shape);
  const std::size_t width = e.shape.back();
  for (std::size_t slot = 0; slot < e.rows.rows.size(); ++slot) {
    std::copy_n(e.rows.values.data() + slot * width, width, out.data() + e.rows.rows[slot] * width);
  }
  return out;
}

template <typename T>
void GradientMap<T>::add_entry(Entry entry) {
  index_[entry.name] = entries_.size();
  entries_.push_back(std::move(entry));
}

// ---------------------------------------------------------------------------
// Graph construction

template <typename T>
const typename Graph<T>::Node& Graph<T>::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw ConfigError("graph: invalid node reference");
  return nodes_[v.id];
}

template <typename T>
const Tensor<T>& Graph<T>::value(Var v) const {
  const Node& n = node(v);
  return n.ref ? *n.ref : n.value;
}

template <typename T>
Var Graph<T>::push(Node n, std::uint64_t flops) {
  n.component = component_;
  if (check_finite_ && n.kind != OpKind::parameter && n.kind != OpKind::sparse_parameter &&
      !n.value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op_name(n.kind) + " in " +
                       component_name(component_) + (context_.empty() ? "" : " (" + context_ + ")"));
  }
  flops_[static_cast<std::size_t>(component_)] += flops;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
std::uint64_t Graph<T>::total_flops() const {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < kComponentCount; ++i) {
    if (static_cast<Component>(i) != Component::loss) total += flops_[i];
  }
  return total;
}

template <typename T>
Var Graph<T>::input(Tensor<T> value) {
  Node n;
  n.kind = OpKind::input;
  n.value = std::move(value);
  if (n.value.empty()) throw ConfigError("graph: null input tensor");
  return push(std::move(n), 0);
}

template <typename T>
Var Graph<T>::parameter(const std::string& name, const Tensor<T>& value) {
  if (auto it = param_index_.find(name); it != param_index_.end()) {
    if (nodes_[it->second].ref != &value || nodes_[it->second].kind != OpKind::parameter) {
      throw ConfigError("graph: parameter name '" + name + "' bound to two tensors");
    }
    return Var{it->second};
  }
  if (value.empty()) throw ConfigError("graph: parameter '" + name + "' is a null tensor");
  Node n;
  n.kind = OpKind::parameter;
  n.ref = &value;
  n.name = name;
  Var v = push(std::move(n), 0);
  param_index_[name] = v.id;
  return v;
}

template <typename T>
Var Graph<T>::sparse_parameter(const std::string& name, const Tensor<T>& table) {
  if (auto it = param_index_.find(name); it != param_index_.end()) {
    if (nodes_[it->second].ref != &table || nodes_[it->second].kind != OpKind::sparse_parameter) {
      throw ConfigError("graph: parameter name '" + name + "' bound to two tensors");
    }
    return Var{it->second};
  }
  if (table.rank() != 2) {
    throw ConfigError("graph: embedding table '" + name + "' must be rank 2, got " +
                      shape_string(table.shape()));
  }
  Node n;
  n.kind = OpKind::sparse_parameter;
  n.ref = &table;
  n.name = name;
  Var v = push(std::move(n), 0);
  param_index_[name] = v.id;
  return v;
}

template <typename T>
std::optional<Var> Graph<T>::find_parameter(const std::string& name) const {
  auto it = param_index_.find(name);
  if (it == param_index_.end()) return std::nullopt;
  return Var{it->second};
}

template <typename T>
std::vector<Var> Graph<T>::parameters() const {
  std::vector<Var> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind == OpKind::parameter || nodes_[i].kind == OpKind::sparse_parameter) {
      out.push_back(Var{i});
    }
  }
  return out;
}

namespace {

template <typename T>
void require_dense(const char* op, OpKind kind) {
  if (kind == OpKind::sparse_parameter) {
    throw ConfigError(std::string(op) + ": embedding tables can only feed lookup_sum");
  }
}

}  // namespace

template <typename T>
Var Graph<T>::matmul(Var a, Var b, bool trans_a, bool trans_b) {
  require_dense<T>("matmul", node(a).kind);
  require_dense<T>("matmul", node(b).kind);
  const Tensor<T>& av = value(a);
  const Tensor<T>& bv = value(b);
  Node n;
  n.kind = OpKind::matmul;
  n.inputs = {a.id, b.id};
  n.trans_a = trans_a;
  n.trans_b = trans_b;
  n.value = wukong::matmul(av, bv, trans_a, trans_b);
  const std::size_t p = trans_a ? av.shape()[av.rank() - 2] : av.shape().back();
  const std::uint64_t flops = 2ull * n.value.numel() * p;
  return push(std::move(n), flops);
}

template <typename T>
Var Graph<T>::add(Var a, Var b) {
  require_dense<T>("add", node(a).kind);
  require_dense<T>("add", node(b).kind);
  Node n;
  n.kind = OpKind::add;
  n.inputs = {a.id, b.id};
  n.value = wukong::add(value(a), value(b));
  const std::uint64_t flops = n.value.numel();
  return push(std::move(n), flops);
}

template <typename T>
Var Graph<T>::mul(Var a, Var b) {
  require_dense<T>("mul", node(a).kind);
  require_dense<T>("mul", node(b).kind);
  Node n;
  n.kind = OpKind::mul;
  n.inputs = {a.id, b.id};
  n.value = wukong::mul(value(a), value(b));
  const std::uint64_t flops = n.value.numel();
  return push(std::move(n), flops);
}

template <typename T>
Var Graph<T>::scale(Var a, T s) {
  require_dense<T>("scale", node(a).kind);
  Node n;
  n.kind = OpKind::scale;
  n.inputs = {a.id};
  n.scalar = s;
  n.value = wukong::scale(value(a), s);
  const std::uint64_t flops = n.value.numel();
  return push(std::move(n), flops);
}

template <typename T>
Var Graph<T>::add_broadcast(Var x, Var y) {
  require_dense<T>("add_broadcast", node(x).kind);
  require_dense<T>("add_broadcast", node(y).kind);
  Node n;
  n.kind = OpKind::add_broadcast;
  n.inputs = {x.id, y.id};
  n.value = wukong::add_broadcast(value(x), value(y));
  const std::uint64_t flops = n.value.numel();
  return push(std::move(n), flops);
}

template <typename T>
Var Graph<T>::relu(Var x) {
  require_dense<T>("relu", node(x).kind);
  Node n;
  n.kind = OpKind::relu;
  n.inputs = {x.id};
  n.value = wukong::relu(value(x));
  return push(std::move(n), 0);
}

template <typename T>
Var Graph<T>::sigmoid(Var x) {
  require_dense<T>("sigmoid", node(x).kind);
  Node n;
  n.kind = OpKind::sigmoid;
  n.inputs = {x.id};
  n.value = wukong::sigmoid(value(x));
  return push(std::move(n), 0);
}

template <typename T>
Var Graph<T>::layer_norm(Var x, Var gain, Var bias, T eps) {
  require_dense<T>("layer_norm", node(x).kind);
  Node n;
  n.kind = OpKind::layer_norm;
  n.inputs = {x.id, gain.id, bias.id};
  n.scalar = eps;
  n.value = wukong::layer_norm(value(x), value(gain), value(bias), eps, &n.ln);
  const std::uint64_t flops = kLayerNormFlopsPerElement * n.value.numel();
  return push(std::move(n), flops);
}

template <typename T>
Var Graph<T>::reshape(Var x, Shape shape) {
  require_dense<T>("reshape", node(x).kind);
  Node n;
  n.kind = OpKind::reshape;
  n.inputs = {x.id};
  n.value = value(x).reshaped(std::move(shape));
  return push(std::move(n), 0);
}

template <typename T>
Var Graph<T>::flatten(Var x) {
  const Shape& s = shape(x);
  return reshape(x, {s[0], value(x).numel() / s[0]});
}

template <typename T>
Var Graph<T>::concat(const std::vector<Var>& parts, std::size_t axis) {
  std::vector<const Tensor<T>*> ptrs;
  Node n;
  n.kind = OpKind::concat;
  for (Var p : parts) {
    require_dense<T>("concat", node(p).kind);
    ptrs.push_back(&value(p));
    n.inputs.push_back(p.id);
  }
  n.axis = axis;
  n.value = wukong::concat(ptrs, axis);
  return push(std::move(n), 0);
}

template <typename T>
Var Graph<T>::transpose(Var x) {
  require_dense<T>("transpose", node(x).kind);
  Node n;
  n.kind = OpKind::transpose;
  n.inputs = {x.id};
  n.value = wukong::transpose(value(x));
  return push(std::move(n), 0);
}

template <typename T>
Var Graph<T>::lookup_sum(Var table, std::vector<std::size_t> offsets, std::vector<std::uint64_t> ids,
                         const std::string& label) {
  if (node(table).kind != OpKind::sparse_parameter) {
    throw ConfigError("lookup_sum: '" + label + "' is not an embedding table");
  }
  const Tensor<T>& tv = value(table);
  const std::size_t rows = tv.dim(0);
  const std::size_t width = tv.dim(1);
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != ids.size()) {
    throw ConfigError("lookup_sum: malformed id offsets for '" + label + "'");
  }
  const std::size_t batch = offsets.size() - 1;
  Node n;
  n.kind = OpKind::lookup_sum;
  n.inputs = {table.id};
  n.value = Tensor<T>({batch, width});
  std::uint64_t flops = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    T* out = n.value.data() + b * width;
    if (offsets[b + 1] < offsets[b]) throw ConfigError("lookup_sum: offsets not monotone");
    for (std::size_t k = offsets[b]; k < offsets[b + 1]; ++k) {
      if (ids[k] >= rows) {
        throw DataError("feature '" + label + "': example " + std::to_string(b) + " has id " +
                        std::to_string(ids[k]) + " outside [0, " + std::to_string(rows) + ")");
      }
      const T* row = tv.data() + ids[k] * width;
      for (std::size_t j = 0; j < width; ++j) out[j] += row[j];
    }
    const std::size_t hot = offsets[b + 1] - offsets[b];
    if (hot > 1) flops += static_cast<std::uint64_t>(hot - 1) * width;
  }
  n.offsets = std::move(offsets);
  n.ids = std::move(ids);
  return push(std::move(n), flops);
}

template <typename T>
Var Graph<T>::sum(Var x) {
  require_dense<T>("sum", node(x).kind);
  Node n;
  n.kind = OpKind::sum;
  n.inputs = {x.id};
  T acc{0};
  for (T v : value(x).values()) acc += v;
  n.value = Tensor<T>({1}, acc);
  const std::uint64_t flops = value(x).numel();
  return push(std::move(n), flops);
}

template <typename T>
Var Graph<T>::mean(Var x) {
  require_dense<T>("mean", node(x).kind);
  Node n;
  n.kind = OpKind::mean;
  n.inputs = {x.id};
  T acc{0};
  for (T v : value(x).values()) acc += v;
  n.value = Tensor<T>({1}, acc / static_cast<T>(value(x).numel()));
  const std::uint64_t flops = value(x).numel();
  return push(std::move(n), flops);
}

template <typename T>
Var Graph<T>::bce_logits(Var logits, const Tensor<T>& labels) {
  require_dense<T>("bce_logits", node(logits).kind);
  const Tensor<T>& z = value(logits);
  if (z.numel() != labels.numel()) {
    throw ConfigError("bce_logits: logits " + shape_string(z.shape()) + " vs labels " +
                      shape_string(labels.shape()));
  }
  T acc{0};
  for (std::size_t i = 0; i < z.numel(); ++i) {
    const T y = labels[i];
    if (y != T{0} && y != T{1}) throw DataError("bce_logits: label " + std::to_string(y) + " is not 0/1");
    const T zi = z[i];
    acc += std::max(zi, T{0}) - zi * y + std::log1p(std::exp(-std::abs(zi)));
  }
  Node n;
  n.kind = OpKind::bce_logits;
  n.inputs = {logits.id};
  n.aux = labels;
  n.value = Tensor<T>({1}, acc / static_cast<T>(z.numel()));
  return push(std::move(n), 0);
}

// ---------------------------------------------------------------------------
// Backward

namespace {

template <typename T>
Tensor<T>& grad_slot(std::vector<Tensor<T>>& grads, std::size_t id, const Shape& shape) {
  if (grads[id].empty()) grads[id] = Tensor<T>(shape);
  return grads[id];
}

template <typename T>
struct RowAccumulator {
  std::size_t width = 0;
  std::unordered_map<std::size_t, std::size_t> slot_of;
  std::vector<std::size_t> rows;
  std::vector<T> values;

  T* row(std::size_t r) {
    auto [it, inserted] = slot_of.try_emplace(r, rows.size());
    if (inserted) {
      rows.push_back(r);
      values.resize(values.size() + width, T{0});
    }
    return values.data() + it->second * width;
  }

  RowGrad<T> finish() const {
    std::vector<std::size_t> order(rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rows[a] < rows[b]; });
    RowGrad<T> out;
    out.width = width;
    out.rows.reserve(rows.size());
    out.values.reserve(values.size());
    for (std::size_t i : order) {
      out.rows.push_back(rows[i]);
      out.values.insert(out.values.end(), values.begin() + i * width, values.begin() + (i + 1) * width);
    }
    return out;
  }
};

}  // namespace

template <typename T>
GradientMap<T> Graph<T>::backward(Var loss) const {
  const Node& ln = node(loss);
  if (ln.value.numel() != 1 && !(ln.ref && ln.ref->numel() == 1)) {
    throw ConfigError("backward: loss must be a scalar, got " + shape_string(value(loss).shape()));
  }
  std::vector<Tensor<T>> grads(nodes_.size());
  std::unordered_map<std::size_t, RowAccumulator<T>> row_grads;
  grads[loss.id] = Tensor<T>(value(loss).shape(), T{1});

  for (std::size_t idx = loss.id + 1; idx-- > 0;) {
    const Node& n = nodes_[idx];
    if (grads[idx].empty()) continue;
    const Tensor<T>& g = grads[idx];
    switch (n.kind) {
      case OpKind::input:
      case OpKind::parameter:
      case OpKind::sparse_parameter:
        break;
      case OpKind::matmul: {
        const Tensor<T>& a = value(Var{n.inputs[0]});
        const Tensor<T>& b = value(Var{n.inputs[1]});
        const bool ta = n.trans_a, tb = n.trans_b;
        const std::size_t ar = a.shape()[a.rank() - 2], ac = a.shape().back();
        const std::size_t br = b.shape()[b.rank() - 2], bc = b.shape().back();
        const std::size_t m = ta ? ac : ar, p = ta ? ar : ac, q = tb ? br : bc;
        const std::size_t batch = g.rank() == 3 ? g.dim(0) : 1;
        const std::size_t as = a.rank() == 3 ? m * p : 0;
        const std::size_t bs = b.rank() == 3 ? p * q : 0;
        Tensor<T>& ga = grad_slot(grads, n.inputs[0], a.shape());
        Tensor<T>& gb = grad_slot(grads, n.inputs[1], b.shape());
        if (a.rank() == 3 && b.rank() == 2 && !ta) {
          const std::size_t rows = batch * m;
          kernels::gemm_accumulate(g.data(), b.data(), ga.data(), rows, q, p, false, !tb);
          if (!tb) {
            kernels::gemm_accumulate(a.data(), g.data(), gb.data(), p, rows, q, true, false);
          } else {
            kernels::gemm_accumulate(g.data(), a.data(), gb.data(), q, rows, p, true, false);
          }
          break;
        }
        for (std::size_t s = 0; s < batch; ++s) {
          const T* gs = g.data() + s * m * q;
          const T* a_s = a.data() + s * as;
          const T* b_s = b.data() + s * bs;
          T* ga_s = ga.data() + s * as;
          T* gb_s = gb.data() + s * bs;
          if (!ta) {
            kernels::gemm_accumulate(gs, b_s, ga_s, m, q, p, false, !tb);
          } else {
            kernels::gemm_accumulate(b_s, gs, ga_s, p, q, m, tb, true);
          }
          if (!tb) {
            kernels::gemm_accumulate(a_s, gs, gb_s, p, m, q, !ta, false);
          } else {
            kernels::gemm_accumulate(gs, a_s, gb_s, q, m, p, true, ta);
          }
        }
        break;
      }
      case OpKind::add: {
        for (std::size_t k = 0; k < 2; ++k) {
          Tensor<T>& gi = grad_slot(grads, n.inputs[k], g.shape());
          for (std::size_t i = 0; i < g.numel(); ++i) gi[i] += g[i];
        }
        break;
      }
      case OpKind::mul: {
        const Tensor<T>& a = value(Var{n.inputs[0]});
        const Tensor<T>& b = value(Var{n.inputs[1]});
        Tensor<T>& ga = grad_slot(grads, n.inputs[0], a.shape());
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * b[i];
        Tensor<T>& gb = grad_slot(grads, n.inputs[1], b.shape());
        for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * a[i];
        break;
      }
      case OpKind::scale: {
        Tensor<T>& gi = grad_slot(grads, n.inputs[0], g.shape());
        for (std::size_t i = 0; i < g.numel(); ++i) gi[i] += g[i] * n.scalar;
        break;
      }
      case OpKind::add_broadcast: {
        const Tensor<T>& y = value(Var{n.inputs[1]});
        Tensor<T>& gx = grad_slot(grads, n.inputs[0], g.shape());
        for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
        Tensor<T>& gy = grad_slot(grads, n.inputs[1], y.shape());
        const std::size_t ny = y.numel();
        for (std::size_t i = 0; i < g.numel(); ++i) gy[i % ny] += g[i];
        break;
      }
      case OpKind::relu: {
        Tensor<T>& gi = grad_slot(grads, n.inputs[0], g.shape());
        for (std::size_t i = 0; i < g.numel(); ++i) {
          if (n.value[i] > T{0}) gi[i] += g[i];
        }
        break;
      }
      case OpKind::sigmoid: {
        Tensor<T>& gi = grad_slot(grads, n.inputs[0], g.shape());
        for (std::size_t i = 0; i < g.numel(); ++i) {
          const T s = n.value[i];
          gi[i] += g[i] * s * (T{1} - s);
        }
        break;
      }
      case OpKind::layer_norm: {
        const Tensor<T>& gain = value(Var{n.inputs[1]});
        const std::size_t width = g.shape().back();
        const std::size_t slices = g.numel() / width;
        const std::size_t affine = gain.numel();
        Tensor<T>& gx = grad_slot(grads, n.inputs[0], g.shape());
        Tensor<T>& gg = grad_slot(grads, n.inputs[1], gain.shape());
        Tensor<T>& gbias = grad_slot(grads, n.inputs[2], gain.shape());
        const Tensor<T>& xhat = n.ln.normalized;
        std::vector<T> dxhat(width);
        for (std::size_t s = 0; s < slices; ++s) {
          const std::size_t base = s * width;
          const std::size_t g0 = base % affine;
          T mean_d{0}, mean_dx{0};
          for (std::size_t j = 0; j < width; ++j) {
            const T dy = g[base + j];
            gg[g0 + j] += dy * xhat[base + j];
            gbias[g0 + j] += dy;
            dxhat[j] = dy * gain[g0 + j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * xhat[base + j];
          }
          mean_d /= static_cast<T>(width);
          mean_dx /= static_cast<T>(width);
          const T rstd = n.ln.rstd[s];
          for (std::size_t j = 0; j < width; ++j) {
            gx[base + j] += rstd * (dxhat[j] - mean_d - xhat[base + j] * mean_dx);
          }
        }
        break;
      }
      case OpKind::reshape: {
        Tensor<T>& gi = grad_slot(grads, n.inputs[0], value(Var{n.inputs[0]}).shape());
        for (std::size_t i = 0; i < g.numel(); ++i) gi[i] += g[i];
        break;
      }
      case OpKind::concat: {
        const Shape& os = g.shape();
        std::size_t outer = 1;
        for (std::size_t i = 0; i < n.axis; ++i) outer *= os[i];
        std::size_t inner = 1;
        for (std::size_t i = n.axis + 1; i < os.size(); ++i) inner *= os[i];
        const std::size_t out_row = os[n.axis] * inner;
        std::size_t offset = 0;
        for (std::size_t in : n.inputs) {
          const Shape& is = value(Var{in}).shape();
          const std::size_t chunk = is[n.axis] * inner;
          Tensor<T>& gi = grad_slot(grads, in, is);
          for (std::size_t o = 0; o < outer; ++o) {
            const T* src = g.data() + o * out_row + offset;
            T* dst = gi.data() + o * chunk;
            for (std::size_t j = 0; j < chunk; ++j) dst[j] += src[j];
          }
          offset += chunk;
        }
        break;
      }
      case OpKind::transpose: {
        Tensor<T> back = wukong::transpose(g);
        Tensor<T>& gi = grad_slot(grads, n.inputs[0], back.shape());
        for (std::size_t i = 0; i < back.numel(); ++i) gi[i] += back[i];
        break;
      }
      case OpKind::lookup_sum: {
        const Tensor<T>& table = value(Var{n.inputs[0]});
        RowAccumulator<T>& acc = row_grads[n.inputs[0]];
        acc.width = table.dim(1);
        const std::size_t width = acc.width;
        const std::size_t batch = n.offsets.size() - 1;
        for (std::size_t b = 0; b < batch; ++b) {
          const T* gb = g.data() + b * width;
          for (std::size_t k = n.offsets[b]; k < n.offsets[b + 1]; ++k) {
            T* dst = acc.row(n.ids[k]);
            for (std::size_t j = 0; j < width; ++j) dst[j] += gb[j];
          }
        }
        break;
      }
      case OpKind::sum:
      case OpKind::mean: {
        const Tensor<T>& x = value(Var{n.inputs[0]});
        const T factor = n.kind == OpKind::mean ? g[0] / static_cast<T>(x.numel()) : g[0];
        Tensor<T>& gi = grad_slot(grads, n.inputs[0], x.shape());
        for (std::size_t i = 0; i < x.numel(); ++i) gi[i] += factor;
        break;
      }
      case OpKind::bce_logits: {
        const Tensor<T>& z = value(Var{n.inputs[0]});
        Tensor<T>& gi = grad_slot(grads, n.inputs[0], z.shape());
        const T inv = g[0] / static_cast<T>(z.numel());
        Tensor<T> s = wukong::sigmoid(z);
        for (std::size_t i = 0; i < z.numel(); ++i) gi[i] += inv * (s[i] - n.aux[i]);
        break;
      }
    }
  }

  GradientMap<T> out;
  for (std::size_t idx = 0; idx < nodes_.size(); ++idx) {
    const Node& n = nodes_[idx];
    if (n.kind == OpKind::parameter) {
      typename GradientMap<T>::Entry e;
      e.name = n.name;
      e.shape = n.ref->shape();
      e.dense = grads[idx].empty() ? Tensor<T>(e.shape) : std::move(grads[idx]);
      out.add_entry(std::move(e));
    } else if (n.kind == OpKind::sparse_parameter) {
      typename GradientMap<T>::Entry e;
      e.name = n.name;
      e.sparse = true;
      e.shape = n.ref->shape();
      if (auto it = row_grads.find(idx); it != row_grads.end()) {
        e.rows = it->second.finish();
      } else {
        e.rows.width = e.shape[1];
      }
      out.add_entry(std::move(e));
    }
  }
  return out;
}

template class GradientMap<float>;
template class GradientMap<double>;
template class Graph<float>;
template class Graph<double>;

}  // namespace wukong
