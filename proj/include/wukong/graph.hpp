#pragma once

// Reverse-mode automatic differentiation over batched dense tensors.
//
// A Graph is a tape: every op appends one node whose inputs precede it, so
// node order is a topological order and backward() is a single reverse sweep.
// Parameters are referenced, not copied; the tensors they point at must
// outlive the graph and stay unchanged until backward() returns.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "wukong/kernels.hpp"
#include "wukong/tensor.hpp"

namespace wukong {

// Accounting bucket for FLOPs executed by an op.
enum class Component : std::uint8_t {
  embedding,
  fm,
  fmb_mlp,
  lcb,
  residual,
  ln,
  head,
  loss,
};
inline constexpr std::size_t kComponentCount = 8;

const char* component_name(Component c);

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const { return id != static_cast<std::size_t>(-1); }
};

enum class OpKind : std::uint8_t {
  input,
  parameter,
  sparse_parameter,
  matmul,
  add,
  mul,
  scale,
  add_broadcast,
  relu,
  sigmoid,
  layer_norm,
  reshape,
  concat,
  transpose,
  lookup_sum,
  sum,
  mean,
  bce_logits,
};

const char* op_name(OpKind kind);

// Gradient of an embedding table restricted to the rows a batch touched.
template <typename T>
struct RowGrad {
  std::vector<std::size_t> rows;  // ascending, unique
  std::size_t width = 0;
  std::vector<T> values;          // rows.size() x width

  std::span<const T> row(std::size_t slot) const {
    return {values.data() + slot * width, width};
  }
};

template <typename T>
class GradientMap {
 public:
  struct Entry {
    std::string name;
    bool sparse = false;
    Shape shape;
    Tensor<T> dense;   // dense parameters
    RowGrad<T> rows;   // sparse parameters
  };

  const std::vector<Entry>& entries() const { return entries_; }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Entry& at(const std::string& name) const;

  // Dense view of any entry; sparse entries are scattered into a zero tensor.
  Tensor<T> dense_of(const std::string& name) const;

  void add_entry(Entry entry);

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

template <typename T>
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) noexcept = default;
  Graph& operator=(Graph&&) noexcept = default;

  Var input(Tensor<T> value);
  // Registering the same name twice returns the existing node.
  Var parameter(const std::string& name, const Tensor<T>& value);
  // Embedding table; only lookup_sum may consume it, gradients are row-sparse.
  Var sparse_parameter(const std::string& name, const Tensor<T>& table);

  Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, T s);
  Var add_broadcast(Var x, Var y);
  Var relu(Var x);
  Var sigmoid(Var x);
  Var layer_norm(Var x, Var gain, Var bias, T eps);
  Var reshape(Var x, Shape shape);
  Var flatten(Var x);
  Var concat(const std::vector<Var>& parts, std::size_t axis);
  Var transpose(Var x);
  // Per example b, sum of rows ids[offsets[b] .. offsets[b+1]) of the table.
  // label names the feature in range errors.
  Var lookup_sum(Var table, std::vector<std::size_t> offsets, std::vector<std::uint64_t> ids,
                 const std::string& label);
  Var sum(Var x);
  Var mean(Var x);
  // Mean binary cross-entropy of logits against {0,1} labels, stable form.
  Var bce_logits(Var logits, const Tensor<T>& labels);

  const Tensor<T>& value(Var v) const;
  const Shape& shape(Var v) const { return value(v).shape(); }
  std::size_t size() const { return nodes_.size(); }
  OpKind kind(Var v) const { return nodes_.at(v.id).kind; }
  const std::vector<std::size_t>& inputs(Var v) const { return nodes_.at(v.id).inputs; }
  std::optional<Var> find_parameter(const std::string& name) const;
  std::vector<Var> parameters() const;

  GradientMap<T> backward(Var loss) const;

  // FLOP instrumentation, attributed to the component active when each op ran.
  void set_component(Component c) { component_ = c; }
  Component component() const { return component_; }
  std::uint64_t flops(Component c) const { return flops_[static_cast<std::size_t>(c)]; }
  std::uint64_t total_flops() const;

  // Context string included in numeric error messages (e.g. "layer 2").
  void set_context(std::string context) { context_ = std::move(context); }
  void set_check_finite(bool on) { check_finite_ = on; }

 private:
  struct Node {
    OpKind kind = OpKind::input;
    std::vector<std::size_t> inputs;
    Tensor<T> value;
    const Tensor<T>* ref = nullptr;
    Component component = Component::embedding;
    std::string name;
    bool trans_a = false;
    bool trans_b = false;
    T scalar{0};
    std::size_t axis = 0;
    LayerNormCache<T> ln;
    std::vector<std::size_t> offsets;
    std::vector<std::uint64_t> ids;
    Tensor<T> aux;
  };

  Var push(Node node, std::uint64_t flops);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> param_index_;
  std::array<std::uint64_t, kComponentCount> flops_{};
  Component component_ = Component::embedding;
  std::string context_;
  bool check_finite_ = true;
};

// RAII switch of the active FLOP component.
template <typename T>
class ComponentScope {
 public:
  ComponentScope(Graph<T>& g, Component c) : graph_(g), saved_(g.component()) { g.set_component(c); }
  ~ComponentScope() { graph_.set_component(saved_); }
  ComponentScope(const ComponentScope&) = delete;
  ComponentScope& operator=(const ComponentScope&) = delete;

 private:
  Graph<T>& graph_;
  Component saved_;
};

}  // namespace wukong
