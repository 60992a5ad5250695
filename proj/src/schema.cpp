#include "wukong/schema.hpp"

#include <set>

#include "wukong/errors.hpp"

namespace wukong {

void FeatureSchema::validate(std::size_t d) const {
  std::set<std::string> names;
  for (const auto& n : dense_features) {
    if (n.empty()) throw ConfigError("schema: dense feature with empty name");
    if (!names.insert(n).second) throw ConfigError("schema: duplicate feature name '" + n + "'");
  }
  for (const auto& f : categorical_features) {
    if (f.name.empty()) throw ConfigError("schema: categorical feature with empty name");
    if (!names.insert(f.name).second) throw ConfigError("schema: duplicate feature name '" + f.name + "'");
    if (f.cardinality < 1) throw ConfigError("schema: feature '" + f.name + "' has cardinality 0");
    if (f.importance == Importance::major) {
      if (f.num_embeddings < 1) {
        throw ConfigError("schema: major feature '" + f.name + "' needs num_embeddings >= 1");
      }
    } else {
      if (f.underlying_dim < 1 || f.underlying_dim > d) {
        throw ConfigError("schema: minor feature '" + f.name + "' underlying_dim " +
                          std::to_string(f.underlying_dim) + " not in [1, d=" + std::to_string(d) + "]");
      }
    }
  }
  if (has_minor() && (n_minor_out < 1 || minor_hidden < 1)) {
    throw ConfigError("schema: minor group needs n_minor_out >= 1 and minor_hidden >= 1");
  }
  if (has_dense() && m_dense < 1) throw ConfigError("schema: m_dense must be >= 1");
  if (num_embeddings() == 0) throw ConfigError("schema: no features produce embeddings");
}

bool FeatureSchema::has_minor() const {
  for (const auto& f : categorical_features)
    if (f.importance == Importance::minor) return true;
  return false;
}

std::size_t FeatureSchema::minor_concat_width() const {
  std::size_t w = 0;
  for (const auto& f : categorical_features)
    if (f.importance == Importance::minor) w += f.underlying_dim;
  return w;
}

std::size_t FeatureSchema::major_embedding_count() const {
  std::size_t n = 0;
  for (const auto& f : categorical_features)
    if (f.importance == Importance::major) n += f.num_embeddings;
  return n;
}

std::size_t FeatureSchema::num_embeddings() const {
  return major_embedding_count() + (has_minor() ? n_minor_out : 0) + (has_dense() ? m_dense : 0);
}

std::size_t FeatureSchema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < categorical_features.size(); ++i)
    if (categorical_features[i].name == name) return i;
  throw ConfigError("schema: unknown categorical feature '" + name + "'");
}

ExampleBatch ExampleBatch::empty_for(const FeatureSchema& schema) {
  ExampleBatch b;
  b.dense_width = schema.num_dense();
  b.categorical.resize(schema.categorical_features.size());
  return b;
}

void ExampleBatch::validate(const FeatureSchema& schema) const {
  const std::size_t n = size();
  if (dense_width != schema.num_dense() || dense.size() != n * dense_width) {
    throw DataError("batch: dense block has width " + std::to_string(dense_width) + ", schema expects " +
                    std::to_string(schema.num_dense()));
  }
  if (categorical.size() != schema.categorical_features.size()) {
    throw DataError("batch: " + std::to_string(categorical.size()) + " categorical columns, schema has " +
                    std::to_string(schema.categorical_features.size()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0) {
      throw DataError("batch: example " + std::to_string(i) + " has non-binary label " +
                      std::to_string(labels[i]));
    }
  }
  for (std::size_t f = 0; f < categorical.size(); ++f) {
    const auto& feat = schema.categorical_features[f];
    const MultiHot& mh = categorical[f];
    if (mh.size() != n) {
      throw DataError("batch: feature '" + feat.name + "' has " + std::to_string(mh.size()) +
                      " examples, expected " + std::to_string(n));
    }
    for (std::size_t b = 0; b < n; ++b) {
      for (std::uint64_t id : mh.of(b)) {
        if (id >= feat.cardinality) {
          throw DataError("feature '" + feat.name + "': example " + std::to_string(b) + " has id " +
                          std::to_string(id) + " outside [0, " + std::to_string(feat.cardinality) + ")");
        }
      }
    }
  }
}

ExampleBatch ExampleBatch::slice(std::size_t begin, std::size_t end) const {
  ExampleBatch out;
  out.dense_width = dense_width;
  out.categorical.resize(categorical.size());
  for (std::size_t i = begin; i < end && i < size(); ++i) out.append_example(*this, i);
  return out;
}

void ExampleBatch::append_example(const ExampleBatch& other, std::size_t index) {
  if (categorical.size() != other.categorical.size() || dense_width != other.dense_width) {
    throw DataError("batch: cannot append examples with a different layout");
  }
  labels.push_back(other.labels[index]);
  dense.insert(dense.end(), other.dense.begin() + index * dense_width,
               other.dense.begin() + (index + 1) * dense_width);
  for (std::size_t f = 0; f < categorical.size(); ++f) categorical[f].push(other.categorical[f].of(index));
}

void ExampleBatch::append(const ExampleBatch& other) {
  if (categorical.empty() && labels.empty() && dense_width == 0) {
    dense_width = other.dense_width;
    categorical.resize(other.categorical.size());
  }
  for (std::size_t i = 0; i < other.size(); ++i) append_example(other, i);
}

}  // namespace wukong
