#include "wukong/train.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <set>

#include "wukong/flops.hpp"
#include "wukong/metrics.hpp"

namespace wukong {

void TrainOptions::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (eval_batch_size < 1) throw ConfigError("train: eval_batch_size must be >= 1");
  if (mode == TrainMode::multi_epoch && epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) {
    throw ConfigError("train: warmup_fraction must lie in [0, 1]");
  }
  if (!(trailing_fraction > 0.0 && trailing_fraction <= 1.0)) {
    throw ConfigError("train: trailing_fraction must lie in (0, 1]");
  }
  if (!(clip_norm >= 0.0)) throw ConfigError("train: clip_norm must be >= 0");
  if (!(budget_seconds >= 0.0)) throw ConfigError("train: budget_seconds must be >= 0");
  adam.validate();
  adagrad.validate();
}

json train_options_to_json(const TrainOptions& o) {
  json j{{"mode", o.mode == TrainMode::one_pass ? "one_pass" : "multi_epoch"},
         {"epochs", o.epochs},
         {"batch_size", o.batch_size},
         {"dense_lr", o.adam.lr},
         {"beta1", o.adam.beta1},
         {"beta2", o.adam.beta2},
         {"adam_eps", o.adam.eps},
         {"sparse_lr", o.adagrad.lr},
         {"adagrad_eps", o.adagrad.eps},
         {"warmup_fraction", o.warmup_fraction},
         {"clip_norm", o.clip_norm},
         {"eval_window", o.eval_window},
         {"trailing_fraction", o.trailing_fraction},
         {"budget_seconds", o.budget_seconds},
         {"record_wall_time", o.record_wall_time},
         {"eval_batch_size", o.eval_batch_size}};
  j["max_steps"] = o.max_steps ? json(*o.max_steps) : json(nullptr);
  return j;
}

TrainOptions train_options_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("train: options must be a JSON object");
  static const std::set<std::string> known{
      "mode",      "epochs",      "batch_size",      "dense_lr",          "beta1",          "beta2",
      "adam_eps",  "sparse_lr",   "adagrad_eps",     "warmup_fraction",   "clip_norm",      "eval_window",
      "trailing_fraction", "budget_seconds", "record_wall_time", "eval_batch_size", "max_steps"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError("train: unknown option '" + it.key() + "'");
  }
  TrainOptions o;
  const auto get = [&](const char* key, auto& dst) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return;
    try {
      dst = it->get<std::decay_t<decltype(dst)>>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("train: option '") + key + "': " + e.what());
    }
  };
  std::string mode = "one_pass";
  get("mode", mode);
  if (mode == "one_pass") {
    o.mode = TrainMode::one_pass;
  } else if (mode == "multi_epoch") {
    o.mode = TrainMode::multi_epoch;
  } else {
    throw ConfigError("train: unknown mode '" + mode + "' (one_pass, multi_epoch)");
  }
  get("epochs", o.epochs);
  get("batch_size", o.batch_size);
  get("dense_lr", o.adam.lr);
  get("beta1", o.adam.beta1);
  get("beta2", o.adam.beta2);
  get("adam_eps", o.adam.eps);
  get("sparse_lr", o.adagrad.lr);
  get("adagrad_eps", o.adagrad.eps);
  get("warmup_fraction", o.warmup_fraction);
  get("clip_norm", o.clip_norm);
  get("eval_window", o.eval_window);
  get("trailing_fraction", o.trailing_fraction);
  get("budget_seconds", o.budget_seconds);
  get("record_wall_time", o.record_wall_time);
  get("eval_batch_size", o.eval_batch_size);
  if (auto it = j.find("max_steps"); it != j.end() && !it->is_null()) {
    std::size_t s = 0;
    get("max_steps", s);
    o.max_steps = s;
  }
  o.validate();
  return o;
}

json MetricsRecord::to_json() const {
  return json{{"examples_seen", examples_seen},
              {"logloss", logloss},
              {"auc", auc ? json(*auc) : json(nullptr)},
              {"gflop_per_example", gflop_per_example},
              {"params_total", params_total},
              {"wall_seconds", wall_seconds}};
}

MetricsRecord MetricsRecord::from_json(const json& j) {
  MetricsRecord r;
  r.examples_seen = j.at("examples_seen").get<std::uint64_t>();
  r.logloss = j.at("logloss").get<double>();
  if (!j.at("auc").is_null()) r.auc = j.at("auc").get<double>();
  r.gflop_per_example = j.at("gflop_per_example").get<double>();
  r.params_total = j.at("params_total").get<std::uint64_t>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  return r;
}

std::string metrics_jsonl_line(const MetricsRecord& r) {
  nlohmann::ordered_json j;
  j["examples_seen"] = r.examples_seen;
  j["logloss"] = r.logloss;
  j["auc"] = r.auc ? nlohmann::ordered_json(*r.auc) : nlohmann::ordered_json(nullptr);
  j["gflop_per_example"] = r.gflop_per_example;
  j["params_total"] = r.params_total;
  j["wall_seconds"] = r.wall_seconds;
  return j.dump();
}

void write_metrics_jsonl(std::ostream& out, const std::vector<MetricsRecord>& records) {
  for (const auto& r : records) out << metrics_jsonl_line(r) << '\n';
}

double warmup_scale(std::uint64_t step, std::uint64_t warmup_steps) {
  if (step < warmup_steps) return static_cast<double>(step) / static_cast<double>(warmup_steps);
  return 1.0;
}

MetricsRecord metrics_from_scores(const ScoredExamples& s, const WukongConfig& config) {
  MetricsRecord r;
  r.examples_seen = s.logits.size();
  r.logloss = logloss(s.logits, s.labels);
  try {
    r.auc = auc(s.logits, s.labels);
  } catch (const UndefinedMetricError&) {
    r.auc.reset();
  }
  const FlopReport f = count_flops(config);
  r.gflop_per_example = f.gflop_per_example();
  r.params_total = f.params_total;
  return r;
}

template <typename T>
ScoredExamples score_stream(const ModelParams<T>& model, ExampleStream& data, std::size_t batch_size) {
  ScoredExamples out;
  data.reset();
  while (true) {
    ExampleBatch b = data.next(batch_size);
    if (b.size() == 0) break;
    const Tensor<T> z = predict_logits(model, b);
    for (std::size_t i = 0; i < b.size(); ++i) {
      out.logits.push_back(static_cast<double>(z[i]));
      out.labels.push_back(b.labels[i]);
    }
  }
  return out;
}

template <typename T>
MetricsRecord evaluate(const ModelParams<T>& model, ExampleStream& data, std::size_t batch_size) {
  const ScoredExamples s = score_stream(model, data, batch_size);
  if (s.logits.empty()) throw UndefinedMetricError("evaluate: the stream is empty");
  return metrics_from_scores(s, model.config);
}

template <typename T>
Trainer<T>::Trainer(ModelParams<T>& model, TrainOptions options)
    : model_(model), options_(options), optimizer_(model.store, options.adam, options.adagrad) {
  options_.validate();
  const FlopReport f = count_flops(model_.config);
  gflop_ = f.gflop_per_example();
  params_total_ = f.params_total;
}

template <typename T>
double Trainer<T>::step(const ExampleBatch& batch, double lr_scale, std::vector<double>* logits) {
  try {
    batch.validate(model_.config.schema);
  } catch (const DataError& e) {
    throw DataError(std::string(e.what()) + " (batch starts at stream example " + std::to_string(examples_) + ")");
  }
  Graph<T> g;
  const Var z = forward(g, model_, batch);
  std::vector<T> y(batch.labels.begin(), batch.labels.end());
  g.set_component(Component::loss);
  const Var loss = g.bce_logits(z, Tensor<T>({batch.size()}, std::move(y)));
  if (logits) {
    const Tensor<T>& zv = g.value(z);
    for (std::size_t i = 0; i < zv.numel(); ++i) logits->push_back(static_cast<double>(zv[i]));
  }
  const double loss_value = static_cast<double>(g.value(loss)[0]);
  const GradientMap<T> grads = g.backward(loss);
  optimizer_.step(model_.store, grads, lr_scale, options_.clip_norm);
  ++steps_;
  examples_ += batch.size();
  return loss_value;
}

template <typename T>
MetricsRecord Trainer<T>::make_record(const ScoredExamples& window, double wall) const {
  MetricsRecord r;
  r.examples_seen = examples_;
  r.logloss = logloss(window.logits, window.labels);
  try {
    r.auc = auc(window.logits, window.labels);
  } catch (const UndefinedMetricError&) {
    r.auc.reset();
  }
  r.gflop_per_example = gflop_;
  r.params_total = params_total_;
  r.wall_seconds = options_.record_wall_time ? wall : 0.0;
  return r;
}

template <typename T>
MetricsRecord Trainer<T>::eval_record(ExampleStream& eval, double wall) const {
  const ScoredExamples s = score_stream(model_, eval, options_.eval_batch_size);
  if (s.logits.empty()) throw UndefinedMetricError("eval stream is empty");
  return make_record(s, wall);
}

namespace {

std::size_t count_examples(ExampleStream& s, std::size_t chunk) {
  if (auto h = s.size_hint()) return *h;
  s.reset();
  std::size_t n = 0;
  while (true) {
    const std::size_t got = s.next(chunk).size();
    if (got == 0) break;
    n += got;
  }
  return n;
}

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

void append_scores(ScoredExamples& dst, const std::vector<double>& logits, const ExampleBatch& b) {
  dst.logits.insert(dst.logits.end(), logits.begin(), logits.end());
  dst.labels.insert(dst.labels.end(), b.labels.begin(), b.labels.end());
}

}  // namespace

template <typename T>
std::vector<MetricsRecord> Trainer<T>::train(ExampleStream& data, ExampleStream* eval, const Sink& sink) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - t0).count(); };
  std::vector<MetricsRecord> records;
  const auto emit = [&](MetricsRecord r) {
    records.push_back(r);
    if (sink) sink(r);
  };
  const std::size_t bs = options_.batch_size;

  if (options_.max_steps && *options_.max_steps == 0) return records;

  // Steps that the warmup fraction refers to.
  std::uint64_t schedule_steps = ceil_div(count_examples(data, bs), bs);
  if (options_.mode == TrainMode::one_pass && options_.max_steps) {
    schedule_steps = std::min<std::uint64_t>(schedule_steps, *options_.max_steps);
  }
  const auto warmup =
      static_cast<std::uint64_t>(std::ceil(options_.warmup_fraction * static_cast<double>(schedule_steps)));

  const auto out_of_budget = [&] {
    if (options_.max_steps && steps_ >= *options_.max_steps) return true;
    return options_.budget_seconds > 0.0 && elapsed() >= options_.budget_seconds;
  };

  std::vector<double> logits;
  const std::size_t epochs = options_.mode == TrainMode::one_pass ? 1 : options_.epochs;
  for (std::size_t epoch = 0; epoch < epochs && !out_of_budget(); ++epoch) {
    data.reset();
    ScoredExamples window;  // since the last record
    ScoredExamples pass;    // whole pass, for the trailing window
    const std::uint64_t steps_before = steps_;
    while (!out_of_budget()) {
      ExampleBatch b = data.next(bs);
      if (b.size() == 0) break;
      logits.clear();
      step(b, warmup_scale(steps_ + 1, warmup), &logits);
      append_scores(window, logits, b);
      if (options_.mode == TrainMode::one_pass) append_scores(pass, logits, b);
      if (options_.mode == TrainMode::one_pass && options_.eval_window > 0 &&
          window.logits.size() >= options_.eval_window) {
        emit(eval ? eval_record(*eval, elapsed()) : make_record(window, elapsed()));
        window = {};
      }
    }
    if (steps_ == steps_before) break;
    if (eval) {
      emit(eval_record(*eval, elapsed()));
    } else if (options_.mode == TrainMode::one_pass) {
      const std::size_t n = pass.logits.size();
      const auto tail = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil(options_.trailing_fraction * static_cast<double>(n))));
      ScoredExamples t;
      t.logits.assign(pass.logits.end() - static_cast<std::ptrdiff_t>(tail), pass.logits.end());
      t.labels.assign(pass.labels.end() - static_cast<std::ptrdiff_t>(tail), pass.labels.end());
      emit(make_record(t, elapsed()));
    } else {
      emit(make_record(window, elapsed()));
    }
  }
  return records;
}

#define WUKONG_INSTANTIATE_TRAIN(T)                                                            \
  template class Trainer<T>;                                                                   \
  template ScoredExamples score_stream<T>(const ModelParams<T>&, ExampleStream&, std::size_t); \
  template MetricsRecord evaluate<T>(const ModelParams<T>&, ExampleStream&, std::size_t);

WUKONG_INSTANTIATE_TRAIN(float)
WUKONG_INSTANTIATE_TRAIN(double)

}  // namespace wukong
