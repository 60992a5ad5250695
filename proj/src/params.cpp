#include "wukong/params.hpp"

#include <cmath>

namespace wukong {

MlpSpec make_mlp_spec(std::string prefix, std::size_t in, const std::vector<std::size_t>& hidden,
                      std::size_t out) {
  MlpSpec spec;
  spec.prefix = std::move(prefix);
  spec.widths.push_back(in);
  spec.widths.insert(spec.widths.end(), hidden.begin(), hidden.end());
  spec.widths.push_back(out);
  return spec;
}

std::uint64_t mlp_flops(const MlpSpec& spec, bool with_bias) {
  std::uint64_t f = 0;
  for (std::size_t i = 0; i < spec.layers(); ++i) {
    f += 2ull * spec.widths[i] * spec.widths[i + 1];
    if (with_bias) f += spec.widths[i + 1];
  }
  return f;
}

std::uint64_t mlp_param_count(const MlpSpec& spec) {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < spec.layers(); ++i) n += spec.widths[i] * spec.widths[i + 1] + spec.widths[i + 1];
  return n;
}

template <typename T>
Tensor<T> uniform_tensor(Shape shape, double bound, std::uint64_t seed, const std::string& name) {
  Tensor<T> t(std::move(shape));
  Rng rng(seed, name);
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

template <typename T>
void init_mlp(ParamStore<T>& store, const MlpSpec& spec, std::uint64_t seed) {
  for (std::size_t i = 0; i < spec.layers(); ++i) {
    const std::size_t in = spec.widths[i], out = spec.widths[i + 1];
    store.add(spec.weight_name(i),
              uniform_tensor<T>({in, out}, 1.0 / std::sqrt(static_cast<double>(in)), seed, spec.weight_name(i)));
    store.add(spec.bias_name(i), Tensor<T>({out}));
  }
}

template <typename T>
Var mlp_forward(Graph<T>& g, const ParamStore<T>& store, const MlpSpec& spec, Var x, bool linear) {
  if (g.shape(x).size() != 2 || g.shape(x)[1] != spec.in()) {
    throw ConfigError("mlp '" + spec.prefix + "': input " + shape_string(g.shape(x)) +
                      " does not match width " + std::to_string(spec.in()));
  }
  Var h = x;
  for (std::size_t i = 0; i < spec.layers(); ++i) {
    const std::string wn = spec.weight_name(i);
    h = g.matmul(h, g.parameter(wn, store.get(wn)));
    if (!linear) {
      const std::string bn = spec.bias_name(i);
      h = g.add_broadcast(h, g.parameter(bn, store.get(bn)));
      if (i + 1 < spec.layers()) h = g.relu(h);
    }
  }
  return h;
}

template Tensor<float> uniform_tensor<float>(Shape, double, std::uint64_t, const std::string&);
template Tensor<double> uniform_tensor<double>(Shape, double, std::uint64_t, const std::string&);
template void init_mlp<float>(ParamStore<float>&, const MlpSpec&, std::uint64_t);
template void init_mlp<double>(ParamStore<double>&, const MlpSpec&, std::uint64_t);
template Var mlp_forward<float>(Graph<float>&, const ParamStore<float>&, const MlpSpec&, Var, bool);
template Var mlp_forward<double>(Graph<double>&, const ParamStore<double>&, const MlpSpec&, Var, bool);

}  // namespace wukong
