#pragma once

// Scaling sweeps: the Cartesian product of axis values applied to a base
// config, each run trained independently to the same budget.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wukong/data.hpp"
#include "wukong/train.hpp"

namespace wukong {

// field is one of l, n_F, n_L, k, fmb_mlp.width (sets every FMB hidden
// width, or adds one hidden layer when there is none).
struct SweepAxis {
  std::string field;
  std::vector<std::size_t> values;
};

struct SweepSpec {
  WukongConfig base;
  std::vector<SweepAxis> axes;
  DatasetSpec data;
  std::optional<DatasetSpec> eval_data;
  TrainOptions train;
  std::size_t workers = 1;
  int precision = 32;
};

// Keys: base_config (path or object), axes [{field, values}], data,
// eval_data, train, steps, budget_seconds, workers, precision.
SweepSpec sweep_spec_from_json(const json& j, const std::filesystem::path& base_dir = {});

void apply_axis(WukongConfig& c, const std::string& field, std::size_t value);

// Synthetic data defines its own schema: an empty config schema adopts it,
// a non-empty one must agree with it.
void resolve_schema(WukongConfig& c, const DatasetSpec& data);

struct SweepPoint {
  WukongConfig config;
  json overrides;  // axis field -> value
};

// Every combination, validated up front (ConfigError names the offender).
std::vector<SweepPoint> expand_sweep(const SweepSpec& spec);

struct SweepRun {
  std::string digest;
  json overrides;
  WukongConfig config;
  std::optional<MetricsRecord> record;
  std::optional<double> relative_logloss;
  std::optional<std::string> error;
};

struct SweepReport {
  std::vector<SweepRun> runs;  // ascending digest
  std::string baseline_digest;
  std::optional<MetricsRecord> baseline;
  std::optional<std::string> baseline_error;
};

// 100 * (baseline - logloss) / baseline
double relative_logloss(double logloss, double baseline);

SweepReport run_sweep(const SweepSpec& spec);

void write_sweep_jsonl(std::ostream& out, const SweepReport& report);
// Columns: gflop_per_example, params_total, logloss, relative_logloss, auc.
void write_sweep_csv(std::ostream& out, const SweepReport& report);

// Trains a single config to the spec's budget and returns its last record.
MetricsRecord run_single(const WukongConfig& config, const SweepSpec& spec);

}  // namespace wukong
