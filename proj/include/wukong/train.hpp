#pragma once

// Training loop and evaluation records.
//
// One-pass mode scores each batch before updating on it (progressive
// validation), so every example is evaluated exactly once while unseen.
// Multi-epoch mode re-opens the stream each epoch.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wukong/data.hpp"
#include "wukong/model.hpp"
#include "wukong/optim.hpp"

namespace wukong {

enum class TrainMode { one_pass, multi_epoch };

struct TrainOptions {
  TrainMode mode = TrainMode::one_pass;
  std::size_t epochs = 1;
  std::size_t batch_size = 256;
  AdamConfig adam;
  AdagradConfig adagrad;
  // Linear warmup over this fraction of the steps (of the first epoch in
  // multi-epoch mode): lr * s / warmup for 1-based step s < warmup.
  double warmup_fraction = 0.1;
  double clip_norm = 0.0;  // global-norm clipping, 0 = off
  // Examples between records; 0 emits one record at the end (one-pass) or
  // one per epoch (multi-epoch).
  std::size_t eval_window = 0;
  // Without an eval stream, the closing one-pass record covers this
  // trailing fraction of the stream.
  double trailing_fraction = 0.1;
  std::optional<std::size_t> max_steps;
  double budget_seconds = 0.0;  // 0 = unlimited
  bool record_wall_time = true;
  std::size_t eval_batch_size = 4096;

  void validate() const;
};

json train_options_to_json(const TrainOptions& o);
TrainOptions train_options_from_json(const json& j);

struct MetricsRecord {
  std::uint64_t examples_seen = 0;
  double logloss = 0.0;
  std::optional<double> auc;  // null when the window holds a single class
  double gflop_per_example = 0.0;
  std::uint64_t params_total = 0;
  double wall_seconds = 0.0;

  json to_json() const;
  static MetricsRecord from_json(const json& j);
};

// One JSON object per line, keys in a fixed order.
std::string metrics_jsonl_line(const MetricsRecord& r);
void write_metrics_jsonl(std::ostream& out, const std::vector<MetricsRecord>& records);

// Learning-rate multiplier for 1-based step s.
double warmup_scale(std::uint64_t step, std::uint64_t warmup_steps);

struct ScoredExamples {
  std::vector<double> logits;
  std::vector<double> labels;
};

template <typename T>
class Trainer {
 public:
  using Sink = std::function<void(const MetricsRecord&)>;

  Trainer(ModelParams<T>& model, TrainOptions options);

  // Forward, backward and one optimizer step. Returns the batch loss;
  // pre-update logits go to `logits` when given.
  double step(const ExampleBatch& batch, double lr_scale = 1.0, std::vector<double>* logits = nullptr);

  // Runs the configured schedule. Records are appended to the return value
  // and passed to `sink` as they are produced.
  std::vector<MetricsRecord> train(ExampleStream& data, ExampleStream* eval = nullptr, const Sink& sink = {});

  std::uint64_t steps_taken() const { return steps_; }
  std::uint64_t examples_seen() const { return examples_; }
  const Optimizer<T>& optimizer() const { return optimizer_; }
  const TrainOptions& options() const { return options_; }

 private:
  MetricsRecord make_record(const ScoredExamples& window, double wall) const;
  MetricsRecord eval_record(ExampleStream& eval, double wall) const;

  ModelParams<T>& model_;
  TrainOptions options_;
  Optimizer<T> optimizer_;
  std::uint64_t steps_ = 0;
  std::uint64_t examples_ = 0;
  double gflop_ = 0.0;
  std::uint64_t params_total_ = 0;
};

template <typename T>
ScoredExamples score_stream(const ModelParams<T>& model, ExampleStream& data, std::size_t batch_size = 4096);

// Logloss/AUC of a model over a whole stream (the stream is reset first).
template <typename T>
MetricsRecord evaluate(const ModelParams<T>& model, ExampleStream& data, std::size_t batch_size = 4096);

MetricsRecord metrics_from_scores(const ScoredExamples& s, const WukongConfig& config);

}  // namespace wukong
