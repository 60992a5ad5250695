#include "wukong/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <thread>

namespace wukong {

void apply_axis(WukongConfig& c, const std::string& field, std::size_t value) {
  if (field == "l") {
    c.l = value;
  } else if (field == "n_F") {
    c.n_F = value;
  } else if (field == "n_L") {
    c.n_L = value;
  } else if (field == "k") {
    c.k = value;
  } else if (field == "fmb_mlp.width") {
    if (c.fmb_mlp.empty()) {
      c.fmb_mlp = {value};
    } else {
      std::fill(c.fmb_mlp.begin(), c.fmb_mlp.end(), value);
    }
  } else {
    throw ConfigError("sweep: '" + field + "' is not a scaling knob (l, n_F, n_L, k, fmb_mlp.width)");
  }
}

void resolve_schema(WukongConfig& c, const DatasetSpec& data) {
  if (data.format != DatasetFormat::synthetic) return;
  const FeatureSchema s = synthetic_schema(data.synthetic);
  if (c.schema.categorical_features.empty() && c.schema.dense_features.empty()) {
    c.schema = s;
    return;
  }
  bool same = c.schema.dense_features.empty() &&
              c.schema.categorical_features.size() == s.categorical_features.size();
  for (std::size_t i = 0; same && i < s.categorical_features.size(); ++i) {
    same = c.schema.categorical_features[i].name == s.categorical_features[i].name &&
           c.schema.categorical_features[i].cardinality == s.categorical_features[i].cardinality;
  }
  if (!same) throw ConfigError("config schema does not match the synthetic dataset's features");
}

SweepSpec sweep_spec_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("sweep: spec must be a JSON object");
  static const std::set<std::string> known{"base_config", "axes",           "data",    "eval_data", "train",
                                           "steps",       "budget_seconds", "workers", "precision", "comment"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError("sweep: unknown field '" + it.key() + "'");
  }
  SweepSpec s;
  try {
    if (!j.contains("data")) throw ConfigError("sweep: 'data' is required");
    const json& d = j.at("data");
    s.data = d.is_string() ? parse_dataset_arg((base_dir / d.get<std::string>()).string())
                           : dataset_spec_from_json(d, base_dir);
    if (auto e = j.find("eval_data"); e != j.end() && !e->is_null()) {
      s.eval_data = e->is_string() ? parse_dataset_arg((base_dir / e->get<std::string>()).string())
                                   : dataset_spec_from_json(*e, base_dir);
    }
    const json& bc = j.at("base_config");
    if (bc.is_string()) {
      const std::filesystem::path p = base_dir / bc.get<std::string>();
      s.base = config_from_json(read_json_file(p), p.parent_path());
    } else {
      s.base = config_from_json(bc, base_dir);
    }
    resolve_schema(s.base, s.data);
    s.base.validate();
    if (auto it = j.find("train"); it != j.end()) s.train = train_options_from_json(*it);
    if (auto it = j.find("steps"); it != j.end()) s.train.max_steps = it->get<std::size_t>();
    if (auto it = j.find("budget_seconds"); it != j.end()) s.train.budget_seconds = it->get<double>();
    s.workers = j.value("workers", std::size_t{1});
    s.precision = j.value("precision", 32);
    if (auto it = j.find("axes"); it != j.end()) {
      for (const json& a : *it) {
        SweepAxis axis{a.at("field").get<std::string>(), a.at("values").get<std::vector<std::size_t>>()};
        if (axis.values.empty()) throw ConfigError("sweep: axis '" + axis.field + "' has no values");
        s.axes.push_back(std::move(axis));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sweep: ") + e.what());
  }
  if (s.precision != 32 && s.precision != 64) throw ConfigError("sweep: precision must be 32 or 64");
  if (s.workers < 1) throw ConfigError("sweep: workers must be >= 1");
  return s;
}

std::vector<SweepPoint> expand_sweep(const SweepSpec& spec) {
  std::vector<SweepPoint> points{SweepPoint{spec.base, json::object()}};
  for (const SweepAxis& axis : spec.axes) {
    std::vector<SweepPoint> next;
    for (const SweepPoint& p : points) {
      for (std::size_t v : axis.values) {
        SweepPoint q = p;
        apply_axis(q.config, axis.field, v);
        q.overrides[axis.field] = v;
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  for (const SweepPoint& p : points) {
    try {
      p.config.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("sweep point ") + p.overrides.dump() + ": " + e.what());
    }
  }
  return points;
}

double relative_logloss(double logloss, double baseline) { return 100.0 * (baseline - logloss) / baseline; }

namespace {

template <typename T>
MetricsRecord run_typed(const WukongConfig& config, const SweepSpec& spec) {
  ModelParams<T> model = build_model<T>(config);
  auto data = open_dataset(spec.data, config.schema);
  std::unique_ptr<ExampleStream> eval;
  if (spec.eval_data) eval = open_dataset(*spec.eval_data, config.schema);
  Trainer<T> trainer(model, spec.train);
  const auto records = trainer.train(*data, eval.get());
  if (records.empty()) throw ConfigError("run produced no metrics (zero steps)");
  return records.back();
}

}  // namespace

MetricsRecord run_single(const WukongConfig& config, const SweepSpec& spec) {
  return spec.precision == 64 ? run_typed<double>(config, spec) : run_typed<float>(config, spec);
}

SweepReport run_sweep(const SweepSpec& spec) {
  const std::vector<SweepPoint> points = expand_sweep(spec);
  // One run per distinct config.
  std::map<std::string, SweepRun> by_digest;
  for (const SweepPoint& p : points) {
    const std::string digest = config_digest(p.config);
    by_digest.try_emplace(digest, SweepRun{digest, p.overrides, p.config, {}, {}, {}});
  }
  SweepReport report;
  report.baseline_digest = config_digest(spec.base);
  const bool base_in_grid = by_digest.count(report.baseline_digest) != 0;

  std::vector<SweepRun*> jobs;
  for (auto& [digest, run] : by_digest) jobs.push_back(&run);
  SweepRun base_run{report.baseline_digest, json::object(), spec.base, {}, {}, {}};
  if (!base_in_grid) jobs.push_back(&base_run);

  std::atomic<std::size_t> cursor{0};
  const auto worker = [&] {
    while (true) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= jobs.size()) return;
      SweepRun& r = *jobs[i];
      try {
        r.record = run_single(r.config, spec);
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
  };
  const std::size_t n_threads = std::min(spec.workers, jobs.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  const SweepRun& base = base_in_grid ? by_digest.at(report.baseline_digest) : base_run;
  report.baseline = base.record;
  report.baseline_error = base.error;
  for (auto& [digest, run] : by_digest) {
    if (run.record && report.baseline) {
      run.relative_logloss = relative_logloss(run.record->logloss, report.baseline->logloss);
    }
    report.runs.push_back(std::move(run));
  }
  return report;
}

void write_sweep_jsonl(std::ostream& out, const SweepReport& report) {
  for (const SweepRun& r : report.runs) {
    nlohmann::ordered_json j;
    j["digest"] = r.digest;
    j["overrides"] = nlohmann::ordered_json::parse(r.overrides.dump());
    j["baseline"] = r.digest == report.baseline_digest;
    if (r.record) {
      const auto rec = nlohmann::ordered_json::parse(metrics_jsonl_line(*r.record));
      for (auto it = rec.begin(); it != rec.end(); ++it) j[it.key()] = it.value();
    }
    j["relative_logloss"] = r.relative_logloss ? nlohmann::ordered_json(*r.relative_logloss) : nullptr;
    j["error"] = r.error ? nlohmann::ordered_json(*r.error) : nullptr;
    out << j.dump() << '\n';
  }
}

void write_sweep_csv(std::ostream& out, const SweepReport& report) {
  out << "gflop_per_example,params_total,logloss,relative_logloss,auc\n";
  char buf[64];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const SweepRun& r : report.runs) {
    if (!r.record) continue;
    out << num(r.record->gflop_per_example) << ',' << r.record->params_total << ',' << num(r.record->logloss) << ','
        << (r.relative_logloss ? num(*r.relative_logloss) : "") << ',' << (r.record->auc ? num(*r.record->auc) : "")
        << '\n';
  }
}

}  // namespace wukong
