#pragma once

// Example sources. Every stream yields the same sequence of examples no
// matter how callers chunk it, so batch size never changes what is read.

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "wukong/config.hpp"
#include "wukong/random.hpp"
#include "wukong/schema.hpp"

namespace wukong {

class ExampleStream {
 public:
  virtual ~ExampleStream() = default;
  virtual const FeatureSchema& schema() const = 0;
  // Up to max_examples examples; an empty batch marks the end.
  virtual ExampleBatch next(std::size_t max_examples) = 0;
  // Rewinds to the first example (file streams reopen their source).
  virtual void reset() = 0;
  virtual std::optional<std::size_t> size_hint() const { return std::nullopt; }
};

class MemoryStream final : public ExampleStream {
 public:
  MemoryStream(FeatureSchema schema, ExampleBatch data);
  const FeatureSchema& schema() const override { return schema_; }
  ExampleBatch next(std::size_t max_examples) override;
  void reset() override { cursor_ = 0; }
  std::optional<std::size_t> size_hint() const override { return data_.size(); }
  const ExampleBatch& data() const { return data_; }

 private:
  FeatureSchema schema_;
  ExampleBatch data_;
  std::size_t cursor_ = 0;
};

// Reads a whole stream into memory.
ExampleBatch read_all(ExampleStream& stream, std::size_t chunk = 4096);

// Planted-order target: y = 1 iff the product of hidden +-1 signs of the
// first target_order features is +1, then flipped with probability
// noise_rate. Signs come from seed; example draws from example_seed
// (defaults to seed), so a second split shares the same hidden rule.
struct SyntheticSpec {
  std::size_t num_features = 4;
  // One entry per feature, or a single entry used for all of them.
  std::vector<std::size_t> cardinalities{8};
  std::size_t target_order = 2;
  double noise_rate = 0.0;
  std::size_t num_examples = 1000;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> example_seed;

  void validate() const;
  std::size_t cardinality(std::size_t feature) const;
};

// Features "f0".."f{n-1}", all major with one embedding each.
FeatureSchema synthetic_schema(const SyntheticSpec& spec);

// Hidden sign table: signs[f][value] in {-1,+1} for the target features.
// Each table has ceil(C/2) positive and floor(C/2) negative entries, so
// with even cardinalities no lower-order marginal carries signal.
std::vector<std::vector<int>> synthetic_signs(const SyntheticSpec& spec);

class SyntheticStream final : public ExampleStream {
 public:
  explicit SyntheticStream(SyntheticSpec spec);
  const FeatureSchema& schema() const override { return schema_; }
  ExampleBatch next(std::size_t max_examples) override;
  void reset() override;
  std::optional<std::size_t> size_hint() const override { return spec_.num_examples; }
  const std::vector<std::vector<int>>& hidden_signs() const { return signs_; }

 private:
  SyntheticSpec spec_;
  FeatureSchema schema_;
  std::vector<std::vector<int>> signs_;
  Rng rng_{0};
  std::size_t produced_ = 0;
};

enum class DenseTransform { none, log1p };
enum class CategoricalEncoding { integer, fnv1a };

// Hashed id of a raw token: 1 + fnv1a64(token) mod (C-1), keeping 0 for
// missing values; a single-row table maps everything to 0.
std::uint64_t hash_token(std::string_view token, std::size_t cardinality);

// Criteo layout: label, 13 integer dense columns, 26 hex categorical
// columns, tab separated. Missing dense values read as 0; missing
// categoricals get id 0.
// dense I1..I13, categorical C1..C26 (major, one embedding, same cardinality).
FeatureSchema criteo_schema(std::size_t cardinality);

class CriteoStream final : public ExampleStream {
 public:
  static constexpr std::size_t kDense = 13;
  static constexpr std::size_t kCategorical = 26;

  CriteoStream(std::filesystem::path path, FeatureSchema schema, DenseTransform transform, bool skip_malformed);
  const FeatureSchema& schema() const override { return schema_; }
  ExampleBatch next(std::size_t max_examples) override;
  void reset() override;
  std::size_t skipped() const { return skipped_; }

 private:
  bool parse_line(const std::string& line, ExampleBatch& out);

  std::filesystem::path path_;
  FeatureSchema schema_;
  DenseTransform transform_;
  bool skip_malformed_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
  std::size_t skipped_ = 0;
};

// Comma separated with a header row. One column must map to "label"; the
// others map onto schema features, and an unmapped unknown column is a
// ConfigError. Multi-hot cells separate ids with `delimiter`. Cells are not
// quoted.
struct CsvOptions {
  std::map<std::string, std::string> header_map;  // column name -> feature name or "label"
  char delimiter = '^';
  CategoricalEncoding encoding = CategoricalEncoding::integer;
  DenseTransform transform = DenseTransform::none;
  bool skip_malformed = false;
};

class CsvStream final : public ExampleStream {
 public:
  CsvStream(std::filesystem::path path, FeatureSchema schema, CsvOptions options);
  const FeatureSchema& schema() const override { return schema_; }
  ExampleBatch next(std::size_t max_examples) override;
  void reset() override;
  std::size_t skipped() const { return skipped_; }

 private:
  struct Column {
    enum Kind { label, dense, categorical } kind = label;
    std::size_t index = 0;
  };
  void open();
  bool parse_line(const std::string& line, ExampleBatch& out);

  std::filesystem::path path_;
  FeatureSchema schema_;
  CsvOptions options_;
  std::vector<Column> columns_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
  std::size_t skipped_ = 0;
};

// Writes a batch as labeled CSV with integer ids ('^' between multi-hot ids).
void write_labeled_csv(const std::filesystem::path& path, const FeatureSchema& schema, const ExampleBatch& batch);

// Reads ahead on a separate thread into a bounded FIFO of chunks.
class PrefetchStream final : public ExampleStream {
 public:
  PrefetchStream(std::unique_ptr<ExampleStream> inner, std::size_t chunk, std::size_t capacity = 4);
  ~PrefetchStream() override;
  const FeatureSchema& schema() const override { return inner_->schema(); }
  ExampleBatch next(std::size_t max_examples) override;
  void reset() override;
  std::optional<std::size_t> size_hint() const override { return inner_->size_hint(); }

 private:
  void start();
  void stop();
  void run();

  std::unique_ptr<ExampleStream> inner_;
  std::size_t chunk_;
  std::size_t capacity_;
  std::thread worker_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<ExampleBatch> queue_;
  bool done_ = false;
  bool stopping_ = false;
  std::exception_ptr error_;
  ExampleBatch pending_;
  std::size_t pending_pos_ = 0;
};

enum class DatasetFormat { criteo_tsv, labeled_csv, synthetic };

struct DatasetSpec {
  DatasetFormat format = DatasetFormat::synthetic;
  std::filesystem::path path;
  SyntheticSpec synthetic;
  CsvOptions csv;
  DenseTransform transform = DenseTransform::log1p;  // criteo default
  bool skip_malformed = false;
  bool prefetch = false;
};

json dataset_spec_to_json(const DatasetSpec& s);
DatasetSpec dataset_spec_from_json(const json& j, const std::filesystem::path& base_dir = {});
// Accepts an inline JSON object, a path to a JSON file, "csv:PATH" or
// "criteo:PATH".
DatasetSpec parse_dataset_arg(const std::string& arg);

// Synthetic sources define their own schema; file sources use `schema`,
// whose cardinalities serve as the hashing moduli.
std::unique_ptr<ExampleStream> open_dataset(const DatasetSpec& spec, const FeatureSchema& schema);

}  // namespace wukong
