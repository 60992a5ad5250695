#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wukong/tensor.hpp"

namespace wukong {

enum class Importance { major, minor };

struct CategoricalFeature {
  std::string name;
  std::size_t cardinality = 1;
  Importance importance = Importance::major;
  // major: number of d-wide rows this feature contributes to X0.
  std::size_t num_embeddings = 1;
  // minor: width of the small embedding fed to the shared minor-group MLP.
  std::size_t underlying_dim = 0;
  // Expected ids per example; used only by the FLOP accounting of pooling.
  std::size_t hotness = 1;

  std::size_t table_width(std::size_t d) const {
    return importance == Importance::major ? num_embeddings * d : underlying_dim;
  }
};

struct FeatureSchema {
  std::vector<std::string> dense_features;
  std::vector<CategoricalFeature> categorical_features;
  // Minor features are concatenated and mapped by one 1-hidden-layer MLP
  // into n_minor_out embeddings.
  std::size_t n_minor_out = 1;
  std::size_t minor_hidden = 64;
  // Latent embeddings produced from the dense inputs.
  std::size_t m_dense = 1;

  // Throws ConfigError on duplicate names, bad cardinalities or widths.
  void validate(std::size_t d) const;

  std::size_t num_dense() const { return dense_features.size(); }
  bool has_dense() const { return !dense_features.empty(); }
  bool has_minor() const;
  std::size_t minor_concat_width() const;
  std::size_t major_embedding_count() const;
  // Rows of X0: major embeddings, then minor-group outputs, then dense latents.
  std::size_t num_embeddings() const;
  std::size_t index_of(const std::string& name) const;
};

// Multi-hot ids of one categorical feature for a whole batch, CSR layout.
struct MultiHot {
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint64_t> ids;

  std::size_t size() const { return offsets.size() - 1; }
  std::span<const std::uint64_t> of(std::size_t example) const {
    return {ids.data() + offsets[example], offsets[example + 1] - offsets[example]};
  }
  void push(std::span<const std::uint64_t> example_ids) {
    ids.insert(ids.end(), example_ids.begin(), example_ids.end());
    offsets.push_back(ids.size());
  }
  void push_one(std::uint64_t id) {
    ids.push_back(id);
    offsets.push_back(ids.size());
  }
};

struct ExampleBatch {
  std::size_t dense_width = 0;
  std::vector<double> dense;          // size() x dense_width
  std::vector<MultiHot> categorical;  // schema order
  std::vector<double> labels;         // {0,1}

  std::size_t size() const { return labels.size(); }

  // Empty batch shaped for a schema.
  static ExampleBatch empty_for(const FeatureSchema& schema);

  // Range and label checks; DataError names feature, example and id.
  void validate(const FeatureSchema& schema) const;

  ExampleBatch slice(std::size_t begin, std::size_t end) const;
  void append(const ExampleBatch& other);
  void append_example(const ExampleBatch& other, std::size_t index);
};

}  // namespace wukong
