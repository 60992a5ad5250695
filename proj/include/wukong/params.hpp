#pragma once

#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "wukong/graph.hpp"
#include "wukong/random.hpp"
#include "wukong/tensor.hpp"

namespace wukong {

// Named, ordered parameter registry. Tensors have stable addresses for the
// store's lifetime, so graphs may reference them directly.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    bool sparse = false;
    Tensor<T> value;
  };

  ParamStore() = default;
  ParamStore(const ParamStore& other) { *this = other; }
  ParamStore& operator=(const ParamStore& other) {
    if (this != &other) {
      entries_ = other.entries_;
      rebuild_index();
    }
    return *this;
  }
  ParamStore(ParamStore&&) noexcept = default;
  ParamStore& operator=(ParamStore&&) noexcept = default;

  Tensor<T>& add(const std::string& name, Tensor<T> value, bool sparse = false) {
    if (index_.count(name)) throw ConfigError("parameter '" + name + "' registered twice");
    index_[name] = entries_.size();
    entries_.push_back(Entry{name, sparse, std::move(value)});
    return entries_.back().value;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor<T>& get(const std::string& name) { return entries_[position(name)].value; }
  const Tensor<T>& get(const std::string& name) const { return entries_[position(name)].value; }
  bool is_sparse(const std::string& name) const { return entries_[position(name)].sparse; }

  std::deque<Entry>& entries() { return entries_; }
  const std::deque<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t numel(bool sparse) const {
    std::size_t n = 0;
    for (const auto& e : entries_)
      if (e.sparse == sparse) n += e.value.numel();
    return n;
  }

  // Registers every parameter in a graph, in store order.
  void bind_all(Graph<T>& g) const {
    for (const auto& e : entries_) {
      if (e.sparse) {
        g.sparse_parameter(e.name, e.value);
      } else {
        g.parameter(e.name, e.value);
      }
    }
  }

 private:
  std::size_t position(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return it->second;
  }
  void rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < entries_.size(); ++i) index_[entries_[i].name] = i;
  }

  std::deque<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Fully connected stack: widths = [in, hidden..., out]. Hidden layers use
// ReLU, the last layer is linear.
struct MlpSpec {
  std::string prefix;
  std::vector<std::size_t> widths;

  std::size_t layers() const { return widths.size() - 1; }
  std::size_t in() const { return widths.front(); }
  std::size_t out() const { return widths.back(); }
  std::string weight_name(std::size_t i) const { return prefix + "." + std::to_string(i) + ".w"; }
  std::string bias_name(std::size_t i) const { return prefix + "." + std::to_string(i) + ".b"; }
};

MlpSpec make_mlp_spec(std::string prefix, std::size_t in, const std::vector<std::size_t>& hidden,
                      std::size_t out);

// FLOPs per example: 2*in*out per layer plus out for the bias (omitted when
// biases are skipped).
std::uint64_t mlp_flops(const MlpSpec& spec, bool with_bias = true);
std::uint64_t mlp_param_count(const MlpSpec& spec);

// uniform(-1/sqrt(in), 1/sqrt(in)) weights, zero biases.
template <typename T>
void init_mlp(ParamStore<T>& store, const MlpSpec& spec, std::uint64_t seed);

// Uniform fill in [-bound, bound] from the (seed, name) stream.
template <typename T>
Tensor<T> uniform_tensor(Shape shape, double bound, std::uint64_t seed, const std::string& name);

// linear: identity activations and no bias adds.
template <typename T>
Var mlp_forward(Graph<T>& g, const ParamStore<T>& store, const MlpSpec& spec, Var x, bool linear);

}  // namespace wukong
