#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "wukong/config.hpp"
#include "wukong/random.hpp"
#include "wukong/schema.hpp"

namespace fixtures {

inline wukong::CategoricalFeature major(std::string name, std::size_t card, std::size_t embeddings = 1) {
  wukong::CategoricalFeature f;
  f.name = std::move(name);
  f.cardinality = card;
  f.num_embeddings = embeddings;
  return f;
}

inline wukong::CategoricalFeature minor(std::string name, std::size_t card, std::size_t dim) {
  wukong::CategoricalFeature f;
  f.name = std::move(name);
  f.cardinality = card;
  f.importance = wukong::Importance::minor;
  f.underlying_dim = dim;
  return f;
}

// n = 6 at any d: three majors (one with two rows), a minor group, one dense latent.
inline wukong::FeatureSchema mixed_schema() {
  wukong::FeatureSchema s;
  s.categorical_features = {major("a", 5), major("b", 7, 2), major("c", 4), minor("m1", 6, 3), minor("m2", 3, 2)};
  s.dense_features = {"x1", "x2"};
  s.n_minor_out = 1;
  s.minor_hidden = 5;
  s.m_dense = 1;
  return s;
}

inline wukong::WukongConfig small_config(std::size_t d = 8, std::size_t l = 2) {
  wukong::WukongConfig c;
  c.schema = mixed_schema();
  c.d = d;
  c.l = l;
  c.n_F = 3;
  c.n_L = 2;
  c.k = 4;
  c.fmb_mlp = {12};
  c.head_mlp = {10};
  c.attn_mlp = {6};
  c.dense_mlp = {4};
  c.seed = 11;
  return c;
}

// Random ids (including empty and repeated lists) and dense values.
inline wukong::ExampleBatch random_batch(const wukong::FeatureSchema& s, std::size_t n, std::uint64_t seed,
                                         std::size_t max_hot = 3) {
  wukong::Rng rng(seed, "fixture.batch");
  wukong::ExampleBatch b = wukong::ExampleBatch::empty_for(s);
  for (std::size_t e = 0; e < n; ++e) {
    for (std::size_t f = 0; f < s.categorical_features.size(); ++f) {
      std::vector<std::uint64_t> ids(rng.below(max_hot + 1));
      for (auto& id : ids) id = rng.below(s.categorical_features[f].cardinality);
      b.categorical[f].push(ids);
    }
    for (std::size_t j = 0; j < s.num_dense(); ++j) b.dense.push_back(rng.uniform(-1.0, 1.0));
    b.labels.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
  }
  return b;
}

// Per-test scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("wukong_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace fixtures
