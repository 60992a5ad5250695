#include "wukong/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>

#include "wukong/errors.hpp"
#include "wukong/hash.hpp"

namespace wukong {

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool parse_label(std::string_view s, double& y) {
  if (s == "0") {
    y = 0.0;
    return true;
  }
  if (s == "1") {
    y = 1.0;
    return true;
  }
  return false;
}

double apply_transform(double x, DenseTransform t) {
  return t == DenseTransform::log1p ? std::log1p(std::max(x, 0.0)) : x;
}

const char* transform_name(DenseTransform t) { return t == DenseTransform::log1p ? "log1p" : "none"; }

DenseTransform parse_transform(const std::string& s) {
  if (s == "none") return DenseTransform::none;
  if (s == "log1p") return DenseTransform::log1p;
  throw ConfigError("dataset: unknown dense_transform '" + s + "' (none, log1p)");
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file '" + path.string() + "'");
  return in;
}

}  // namespace

MemoryStream::MemoryStream(FeatureSchema schema, ExampleBatch data)
    : schema_(std::move(schema)), data_(std::move(data)) {}

ExampleBatch MemoryStream::next(std::size_t max_examples) {
  const std::size_t end = std::min(data_.size(), cursor_ + max_examples);
  ExampleBatch out = data_.slice(cursor_, end);
  if (out.categorical.size() != schema_.categorical_features.size()) out = ExampleBatch::empty_for(schema_);
  cursor_ = end;
  return out;
}

ExampleBatch read_all(ExampleStream& stream, std::size_t chunk) {
  ExampleBatch all = ExampleBatch::empty_for(stream.schema());
  while (true) {
    ExampleBatch b = stream.next(chunk);
    if (b.size() == 0) break;
    all.append(b);
  }
  return all;
}

// ---- synthetic ----

void SyntheticSpec::validate() const {
  if (num_features < 1) throw ConfigError("synthetic: num_features must be >= 1");
  if (cardinalities.size() != 1 && cardinalities.size() != num_features) {
    throw ConfigError("synthetic: give one cardinality or one per feature (" + std::to_string(num_features) + ")");
  }
  for (std::size_t c : cardinalities) {
    if (c < 2) throw ConfigError("synthetic: cardinalities must be >= 2");
  }
  if (target_order < 1 || target_order > num_features) {
    throw ConfigError("synthetic: target_order must lie in [1, num_features]");
  }
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) throw ConfigError("synthetic: noise_rate must lie in [0, 1)");
}

std::size_t SyntheticSpec::cardinality(std::size_t feature) const {
  return cardinalities.size() == 1 ? cardinalities[0] : cardinalities.at(feature);
}

FeatureSchema synthetic_schema(const SyntheticSpec& spec) {
  spec.validate();
  FeatureSchema s;
  for (std::size_t f = 0; f < spec.num_features; ++f) {
    CategoricalFeature cf;
    cf.name = "f" + std::to_string(f);
    cf.cardinality = spec.cardinality(f);
    s.categorical_features.push_back(cf);
  }
  return s;
}

std::vector<std::vector<int>> synthetic_signs(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<std::vector<int>> signs(spec.target_order);
  for (std::size_t f = 0; f < spec.target_order; ++f) {
    const std::size_t c = spec.cardinality(f);
    std::vector<int>& s = signs[f];
    s.assign(c, -1);
    std::fill(s.begin(), s.begin() + static_cast<std::ptrdiff_t>((c + 1) / 2), 1);
    Rng rng(spec.seed, "synthetic.signs." + std::to_string(f));
    for (std::size_t i = c - 1; i > 0; --i) std::swap(s[i], s[rng.below(i + 1)]);
  }
  return signs;
}

SyntheticStream::SyntheticStream(SyntheticSpec spec)
    : spec_(std::move(spec)), schema_(synthetic_schema(spec_)), signs_(synthetic_signs(spec_)) {
  reset();
}

void SyntheticStream::reset() {
  rng_ = Rng(spec_.example_seed.value_or(spec_.seed), "synthetic.examples");
  produced_ = 0;
}

ExampleBatch SyntheticStream::next(std::size_t max_examples) {
  ExampleBatch out = ExampleBatch::empty_for(schema_);
  const std::size_t n = std::min(max_examples, spec_.num_examples - produced_);
  std::vector<std::uint64_t> values(spec_.num_features);
  for (std::size_t i = 0; i < n; ++i) {
    int sign = 1;
    for (std::size_t f = 0; f < spec_.num_features; ++f) {
      values[f] = rng_.below(spec_.cardinality(f));
      if (f < spec_.target_order) sign *= signs_[f][values[f]];
    }
    bool y = sign > 0;
    if (rng_.bernoulli(spec_.noise_rate)) y = !y;
    for (std::size_t f = 0; f < spec_.num_features; ++f) out.categorical[f].push_one(values[f]);
    out.labels.push_back(y ? 1.0 : 0.0);
  }
  produced_ += n;
  return out;
}

// ---- hashing ----

std::uint64_t hash_token(std::string_view token, std::size_t cardinality) {
  if (cardinality <= 1) return 0;
  return 1 + fnv1a64(token) % (cardinality - 1);
}

// ---- criteo ----

FeatureSchema criteo_schema(std::size_t cardinality) {
  FeatureSchema s;
  for (std::size_t i = 1; i <= CriteoStream::kDense; ++i) s.dense_features.push_back("I" + std::to_string(i));
  for (std::size_t i = 1; i <= CriteoStream::kCategorical; ++i) {
    CategoricalFeature f;
    f.name = "C" + std::to_string(i);
    f.cardinality = cardinality;
    s.categorical_features.push_back(f);
  }
  return s;
}

CriteoStream::CriteoStream(std::filesystem::path path, FeatureSchema schema, DenseTransform transform,
                           bool skip_malformed)
    : path_(std::move(path)), schema_(std::move(schema)), transform_(transform), skip_malformed_(skip_malformed) {
  if (schema_.num_dense() != kDense || schema_.categorical_features.size() != kCategorical) {
    throw ConfigError("criteo: schema must have 13 dense and 26 categorical features, got " +
                      std::to_string(schema_.num_dense()) + " and " +
                      std::to_string(schema_.categorical_features.size()));
  }
  reset();
}

void CriteoStream::reset() {
  in_ = open_input(path_);
  line_no_ = 0;
  skipped_ = 0;
}

bool CriteoStream::parse_line(const std::string& line, ExampleBatch& out) {
  const auto fields = split(line, '\t');
  const auto fail = [&](const std::string& why) {
    if (skip_malformed_) {
      ++skipped_;
      return false;
    }
    throw DataError(path_.string() + ":" + std::to_string(line_no_) + ": " + why);
  };
  if (fields.size() != 1 + kDense + kCategorical) {
    return fail("expected 40 tab-separated fields, found " + std::to_string(fields.size()));
  }
  double y = 0.0;
  if (!parse_label(fields[0], y)) return fail("label '" + std::string(fields[0]) + "' is not 0/1");
  double dense[kDense];
  for (std::size_t i = 0; i < kDense; ++i) {
    const std::string_view f = fields[1 + i];
    long long v = 0;
    if (!f.empty()) {
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        return fail("dense field I" + std::to_string(i + 1) + " '" + std::string(f) + "' is not an integer");
      }
    }
    dense[i] = apply_transform(static_cast<double>(v), transform_);
  }
  out.labels.push_back(y);
  out.dense.insert(out.dense.end(), dense, dense + kDense);
  for (std::size_t c = 0; c < kCategorical; ++c) {
    const std::string_view tok = fields[1 + kDense + c];
    const std::size_t card = schema_.categorical_features[c].cardinality;
    out.categorical[c].push_one(tok.empty() ? 0 : hash_token(tok, card));
  }
  return true;
}

ExampleBatch CriteoStream::next(std::size_t max_examples) {
  ExampleBatch out = ExampleBatch::empty_for(schema_);
  std::string line;
  while (out.size() < max_examples && std::getline(in_, line)) {
    ++line_no_;
    strip_cr(line);
    if (line.empty()) continue;
    parse_line(line, out);
  }
  return out;
}

// ---- csv ----

CsvStream::CsvStream(std::filesystem::path path, FeatureSchema schema, CsvOptions options)
    : path_(std::move(path)), schema_(std::move(schema)), options_(std::move(options)) {
  open();
}

void CsvStream::open() {
  in_ = open_input(path_);
  line_no_ = 0;
  skipped_ = 0;
  columns_.clear();
  std::string header;
  if (!std::getline(in_, header)) throw DataError(path_.string() + ": missing header row");
  ++line_no_;
  strip_cr(header);
  std::set<std::string> seen;
  bool have_label = false;
  for (std::string_view raw : split(header, ',')) {
    std::string name(raw);
    if (auto it = options_.header_map.find(name); it != options_.header_map.end()) name = it->second;
    if (!seen.insert(name).second) throw ConfigError("csv: column '" + name + "' appears twice");
    Column col;
    if (name == "label") {
      col.kind = Column::label;
      have_label = true;
    } else if (auto d = std::find(schema_.dense_features.begin(), schema_.dense_features.end(), name);
               d != schema_.dense_features.end()) {
      col.kind = Column::dense;
      col.index = static_cast<std::size_t>(d - schema_.dense_features.begin());
    } else {
      bool found = false;
      for (std::size_t i = 0; i < schema_.categorical_features.size(); ++i) {
        if (schema_.categorical_features[i].name == name) {
          col.kind = Column::categorical;
          col.index = i;
          found = true;
        }
      }
      if (!found) throw ConfigError("csv: unknown column '" + std::string(raw) + "' in " + path_.string());
    }
    columns_.push_back(col);
  }
  if (!have_label) throw ConfigError("csv: no label column in " + path_.string());
  for (const auto& n : schema_.dense_features) {
    if (!seen.count(n)) throw ConfigError("csv: schema feature '" + n + "' has no column");
  }
  for (const auto& f : schema_.categorical_features) {
    if (!seen.count(f.name)) throw ConfigError("csv: schema feature '" + f.name + "' has no column");
  }
}

void CsvStream::reset() { open(); }

bool CsvStream::parse_line(const std::string& line, ExampleBatch& out) {
  const auto cells = split(line, ',');
  const auto fail = [&](const std::string& why) {
    if (options_.skip_malformed) {
      ++skipped_;
      return false;
    }
    throw DataError(path_.string() + ":" + std::to_string(line_no_) + ": " + why);
  };
  if (cells.size() != columns_.size()) {
    return fail("expected " + std::to_string(columns_.size()) + " cells, found " + std::to_string(cells.size()));
  }
  double y = 0.0;
  std::vector<double> dense(schema_.num_dense(), 0.0);
  std::vector<std::vector<std::uint64_t>> ids(schema_.categorical_features.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const std::string_view cell = cells[c];
    const Column& col = columns_[c];
    switch (col.kind) {
      case Column::label:
        if (!parse_label(cell, y)) return fail("label '" + std::string(cell) + "' is not 0/1");
        break;
      case Column::dense: {
        double v = 0.0;
        if (!cell.empty()) {
          const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
          if (ec != std::errc() || ptr != cell.data() + cell.size()) {
            return fail("dense cell '" + std::string(cell) + "' is not a number");
          }
        }
        dense[col.index] = apply_transform(v, options_.transform);
        break;
      }
      case Column::categorical: {
        const CategoricalFeature& f = schema_.categorical_features[col.index];
        if (cell.empty()) {
          if (options_.encoding == CategoricalEncoding::fnv1a) ids[col.index].push_back(0);
          break;
        }
        for (std::string_view tok : split(cell, options_.delimiter)) {
          if (options_.encoding == CategoricalEncoding::fnv1a) {
            ids[col.index].push_back(tok.empty() ? 0 : hash_token(tok, f.cardinality));
            continue;
          }
          std::uint64_t id = 0;
          const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), id);
          if (ec != std::errc() || ptr != tok.data() + tok.size()) {
            return fail("feature '" + f.name + "': id '" + std::string(tok) + "' is not a non-negative integer");
          }
          if (id >= f.cardinality) {
            return fail("feature '" + f.name + "': id " + std::to_string(id) + " outside [0, " +
                        std::to_string(f.cardinality) + ")");
          }
          ids[col.index].push_back(id);
        }
        break;
      }
    }
  }
  out.labels.push_back(y);
  out.dense.insert(out.dense.end(), dense.begin(), dense.end());
  for (std::size_t f = 0; f < ids.size(); ++f) out.categorical[f].push(ids[f]);
  return true;
}

ExampleBatch CsvStream::next(std::size_t max_examples) {
  ExampleBatch out = ExampleBatch::empty_for(schema_);
  std::string line;
  while (out.size() < max_examples && std::getline(in_, line)) {
    ++line_no_;
    strip_cr(line);
    if (line.empty()) continue;
    parse_line(line, out);
  }
  return out;
}

void write_labeled_csv(const std::filesystem::path& path, const FeatureSchema& schema, const ExampleBatch& batch) {
  batch.validate(schema);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << "label";
  for (const auto& n : schema.dense_features) out << ',' << n;
  for (const auto& f : schema.categorical_features) out << ',' << f.name;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out << (batch.labels[i] == 1.0 ? '1' : '0');
    for (std::size_t j = 0; j < batch.dense_width; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", batch.dense[i * batch.dense_width + j]);
      out << ',' << buf;
    }
    for (const MultiHot& mh : batch.categorical) {
      out << ',';
      bool first = true;
      for (std::uint64_t id : mh.of(i)) {
        if (!first) out << '^';
        out << id;
        first = false;
      }
    }
    out << '\n';
  }
  if (!out) throw ConfigError("write failed for '" + path.string() + "'");
}

// ---- prefetch ----

PrefetchStream::PrefetchStream(std::unique_ptr<ExampleStream> inner, std::size_t chunk, std::size_t capacity)
    : inner_(std::move(inner)), chunk_(std::max<std::size_t>(chunk, 1)), capacity_(std::max<std::size_t>(capacity, 1)) {
  start();
}

PrefetchStream::~PrefetchStream() { stop(); }

void PrefetchStream::start() {
  queue_.clear();
  done_ = false;
  stopping_ = false;
  error_ = nullptr;
  pending_ = ExampleBatch::empty_for(inner_->schema());
  pending_pos_ = 0;
  worker_ = std::thread([this] { run(); });
}

void PrefetchStream::stop() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

void PrefetchStream::run() {
  while (true) {
    {
      std::unique_lock<std::mutex> lock(mu_);
      cv_.wait(lock, [&] { return stopping_ || queue_.size() < capacity_; });
      if (stopping_) return;
    }
    ExampleBatch b;
    try {
      b = inner_->next(chunk_);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu_);
      error_ = std::current_exception();
      done_ = true;
      cv_.notify_all();
      return;
    }
    std::lock_guard<std::mutex> lock(mu_);
    if (b.size() == 0) {
      done_ = true;
      cv_.notify_all();
      return;
    }
    queue_.push_back(std::move(b));
    cv_.notify_all();
  }
}

ExampleBatch PrefetchStream::next(std::size_t max_examples) {
  ExampleBatch out = ExampleBatch::empty_for(inner_->schema());
  while (out.size() < max_examples) {
    if (pending_pos_ < pending_.size()) {
      out.append_example(pending_, pending_pos_++);
      continue;
    }
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return !queue_.empty() || done_; });
    if (!queue_.empty()) {
      pending_ = std::move(queue_.front());
      queue_.pop_front();
      pending_pos_ = 0;
      cv_.notify_all();
      continue;
    }
    if (error_) std::rethrow_exception(error_);
    break;
  }
  return out;
}

void PrefetchStream::reset() {
  stop();
  inner_->reset();
  start();
}

// ---- dataset specs ----

namespace {

const char* format_name(DatasetFormat f) {
  switch (f) {
    case DatasetFormat::criteo_tsv:
      return "criteo_tsv";
    case DatasetFormat::labeled_csv:
      return "labeled_csv";
    case DatasetFormat::synthetic:
      return "synthetic";
  }
  return "?";
}

template <typename V>
V field(const json& j, const char* key, V fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<V>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("dataset: field '") + key + "': " + e.what());
  }
}

}  // namespace

json dataset_spec_to_json(const DatasetSpec& s) {
  json j{{"format", format_name(s.format)}};
  switch (s.format) {
    case DatasetFormat::synthetic: {
      const SyntheticSpec& y = s.synthetic;
      j["num_features"] = y.num_features;
      j["cardinalities"] = y.cardinalities;
      j["target_order"] = y.target_order;
      j["noise_rate"] = y.noise_rate;
      j["num_examples"] = y.num_examples;
      j["seed"] = y.seed;
      if (y.example_seed) j["example_seed"] = *y.example_seed;
      break;
    }
    case DatasetFormat::criteo_tsv:
      j["path"] = s.path.string();
      j["dense_transform"] = transform_name(s.transform);
      j["skip_malformed"] = s.skip_malformed;
      break;
    case DatasetFormat::labeled_csv:
      j["path"] = s.path.string();
      j["header_map"] = s.csv.header_map;
      j["delimiter"] = std::string(1, s.csv.delimiter);
      j["encoding"] = s.csv.encoding == CategoricalEncoding::fnv1a ? "fnv1a" : "integer";
      j["dense_transform"] = transform_name(s.csv.transform);
      j["skip_malformed"] = s.csv.skip_malformed;
      break;
  }
  if (s.prefetch) j["prefetch"] = true;
  return j;
}

DatasetSpec dataset_spec_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("dataset: expected a JSON object");
  DatasetSpec s;
  const std::string fmt = field<std::string>(j, "format", "");
  std::set<std::string> known{"format", "prefetch", "comment"};
  if (fmt == "synthetic") {
    s.format = DatasetFormat::synthetic;
    known.insert({"num_features", "cardinalities", "target_order", "noise_rate", "num_examples", "seed",
                  "example_seed"});
    SyntheticSpec& y = s.synthetic;
    y.num_features = field(j, "num_features", y.num_features);
    y.cardinalities = field(j, "cardinalities", y.cardinalities);
    y.target_order = field(j, "target_order", y.target_order);
    y.noise_rate = field(j, "noise_rate", y.noise_rate);
    y.num_examples = field(j, "num_examples", y.num_examples);
    y.seed = field(j, "seed", y.seed);
    if (j.contains("example_seed") && !j["example_seed"].is_null()) {
      y.example_seed = field<std::uint64_t>(j, "example_seed", 0);
    }
    y.validate();
  } else if (fmt == "criteo_tsv" || fmt == "labeled_csv") {
    known.insert({"path", "dense_transform", "skip_malformed"});
    const std::string p = field<std::string>(j, "path", "");
    if (p.empty()) throw ConfigError("dataset: '" + fmt + "' needs a path");
    s.path = std::filesystem::path(p);
    if (s.path.is_relative() && !base_dir.empty()) s.path = base_dir / s.path;
    if (fmt == "criteo_tsv") {
      s.format = DatasetFormat::criteo_tsv;
      s.transform = parse_transform(field<std::string>(j, "dense_transform", "log1p"));
      s.skip_malformed = field(j, "skip_malformed", false);
    } else {
      s.format = DatasetFormat::labeled_csv;
      known.insert({"header_map", "delimiter", "encoding"});
      s.csv.header_map = field(j, "header_map", s.csv.header_map);
      const std::string delim = field<std::string>(j, "delimiter", "^");
      if (delim.size() != 1) throw ConfigError("dataset: delimiter must be one character");
      s.csv.delimiter = delim[0];
      const std::string enc = field<std::string>(j, "encoding", "integer");
      if (enc == "integer") {
        s.csv.encoding = CategoricalEncoding::integer;
      } else if (enc == "fnv1a") {
        s.csv.encoding = CategoricalEncoding::fnv1a;
      } else {
        throw ConfigError("dataset: unknown encoding '" + enc + "' (integer, fnv1a)");
      }
      s.csv.transform = parse_transform(field<std::string>(j, "dense_transform", "none"));
      s.csv.skip_malformed = field(j, "skip_malformed", false);
    }
  } else {
    throw ConfigError("dataset: unknown format '" + fmt + "' (criteo_tsv, labeled_csv, synthetic)");
  }
  s.prefetch = field(j, "prefetch", false);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError("dataset: unknown field '" + it.key() + "'");
  }
  return s;
}

DatasetSpec parse_dataset_arg(const std::string& arg) {
  if (!arg.empty() && arg.front() == '{') {
    try {
      return dataset_spec_from_json(json::parse(arg));
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("dataset: bad inline JSON: ") + e.what());
    }
  }
  if (arg.rfind("csv:", 0) == 0) {
    DatasetSpec s;
    s.format = DatasetFormat::labeled_csv;
    s.path = arg.substr(4);
    return s;
  }
  if (arg.rfind("criteo:", 0) == 0) {
    DatasetSpec s;
    s.format = DatasetFormat::criteo_tsv;
    s.path = arg.substr(7);
    return s;
  }
  const std::filesystem::path p(arg);
  return dataset_spec_from_json(read_json_file(p), p.parent_path());
}

std::unique_ptr<ExampleStream> open_dataset(const DatasetSpec& spec, const FeatureSchema& schema) {
  std::unique_ptr<ExampleStream> s;
  switch (spec.format) {
    case DatasetFormat::synthetic:
      s = std::make_unique<SyntheticStream>(spec.synthetic);
      break;
    case DatasetFormat::criteo_tsv:
      s = std::make_unique<CriteoStream>(spec.path, schema, spec.transform, spec.skip_malformed);
      break;
    case DatasetFormat::labeled_csv:
      s = std::make_unique<CsvStream>(spec.path, schema, spec.csv);
      break;
  }
  if (spec.prefetch) s = std::make_unique<PrefetchStream>(std::move(s), 1024);
  return s;
}

}  // namespace wukong
