#include "wukong/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "wukong/checkpoint.hpp"
#include "wukong/flops.hpp"
#include "wukong/power_law.hpp"
#include "wukong/sweep.hpp"
#include "wukong/train.hpp"

namespace wukong {

namespace {

struct CommonArgs {
  std::string config;
  std::string data;
  std::string eval_data;
  std::string out;
  std::string checkpoint;
  std::string train_options;
  std::optional<std::size_t> steps;
  std::optional<double> budget_seconds;
  std::optional<std::uint64_t> seed;
  int precision = 32;
  bool linear_test_mode = false;
};

struct LoadedConfig {
  WukongConfig config;
  TrainOptions train;
};

LoadedConfig load_run_config(const CommonArgs& a, const DatasetSpec* data) {
  const std::filesystem::path path(a.config);
  const json j = read_json_file(path);
  LoadedConfig lc;
  lc.config = config_from_json(j, path.parent_path());
  if (auto it = j.find("train"); it != j.end()) lc.train = train_options_from_json(*it);
  if (!a.train_options.empty()) {
    const std::string& t = a.train_options;
    lc.train = train_options_from_json(t.front() == '{' ? json::parse(t) : read_json_file(t));
  }
  if (data) resolve_schema(lc.config, *data);
  if (a.seed) lc.config.seed = *a.seed;
  if (a.linear_test_mode) lc.config.linear_test_mode = true;
  if (a.steps) lc.train.max_steps = *a.steps;
  if (a.budget_seconds) lc.train.budget_seconds = *a.budget_seconds;
  lc.config.validate();
  return lc;
}

// Output goes to --out when given, else to the command's stdout.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
      if (!*file_) throw ConfigError("cannot write '" + path + "'");
      stream_ = file_.get();
    }
  }
  std::ostream& get() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

template <typename T>
int do_train(const CommonArgs& a, std::ostream& out, std::ostream& err) {
  const DatasetSpec data = parse_dataset_arg(a.data);
  const LoadedConfig lc = load_run_config(a, &data);
  ModelParams<T> model = build_model<T>(lc.config);
  auto stream = open_dataset(data, lc.config.schema);
  std::unique_ptr<ExampleStream> eval;
  if (!a.eval_data.empty()) eval = open_dataset(parse_dataset_arg(a.eval_data), lc.config.schema);
  Output o(a.out, out);
  Trainer<T> trainer(model, lc.train);
  const auto records = trainer.train(*stream, eval.get(), [&](const MetricsRecord& r) {
    o.get() << metrics_jsonl_line(r) << '\n';
    o.get().flush();
  });
  if (!a.checkpoint.empty()) save_checkpoint(model, a.checkpoint);
  err << "trained " << trainer.steps_taken() << " steps on " << trainer.examples_seen() << " examples, "
      << records.size() << " records\n";
  return kExitOk;
}

template <typename T>
int do_eval(const CommonArgs& a, std::ostream& out) {
  const ModelParams<T> model = load_checkpoint<T>(a.checkpoint);
  auto stream = open_dataset(parse_dataset_arg(a.data), model.config.schema);
  const MetricsRecord r = evaluate(model, *stream);
  Output o(a.out, out);
  o.get() << metrics_jsonl_line(r) << '\n';
  return kExitOk;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

int do_fit(const std::string& in_path, const std::string& xcol, const std::string& ycol, const std::string& out_path,
           std::ostream& out) {
  std::ifstream in(in_path);
  if (!in) throw ConfigError("cannot open '" + in_path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError(in_path + ": empty file");
  const auto header = split_csv_line(line);
  const auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError(in_path + ": no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t xi = col(xcol), yi = col(ycol);
  std::vector<double> xs, ys;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw DataError(in_path + ":" + std::to_string(line_no) + ": wrong cell count");
    if (cells[xi].empty() || cells[yi].empty()) continue;
    try {
      xs.push_back(std::stod(cells[xi]));
      ys.push_back(std::stod(cells[yi]));
    } catch (const std::exception&) {
      throw DataError(in_path + ":" + std::to_string(line_no) + ": not a number");
    }
  }
  const PowerLawFit fit = fit_power_law(xs, ys);
  Output o(out_path, out);
  o.get() << fit.to_json().dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wukong: stacked factorization-machine CTR models, training and scaling sweeps"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  CommonArgs a;
  const auto add_precision = [&](CLI::App* c) {
    c->add_option("--precision", a.precision, "Floating point width")->check(CLI::IsMember({32, 64}));
  };

  CLI::App* train = app.add_subcommand("train", "Train a model and emit metrics as JSON lines");
  train->add_option("--config", a.config, "Model config JSON")->required()->check(CLI::ExistingFile);
  train->add_option("--data", a.data, "Dataset spec: JSON file, inline JSON, csv:PATH or criteo:PATH")->required();
  train->add_option("--eval-data", a.eval_data, "Held-out dataset scored at every record");
  train->add_option("--train-options", a.train_options, "Training options (JSON file or inline)");
  train->add_option("--steps", a.steps, "Stop after N optimizer steps");
  train->add_option("--budget-seconds", a.budget_seconds, "Stop after S seconds");
  train->add_option("--seed", a.seed, "Override the config seed");
  train->add_option("--out", a.out, "Metrics JSONL path (default stdout)");
  train->add_option("--checkpoint", a.checkpoint, "Save the trained model here");
  train->add_flag("--linear-test-mode", a.linear_test_mode, "Identity activations, no LN, no biases");
  add_precision(train);

  CLI::App* eval = app.add_subcommand("eval", "Score a checkpoint on a dataset");
  eval->add_option("--checkpoint", a.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", a.data, "Dataset spec")->required();
  eval->add_option("--out", a.out, "Output path (default stdout)");
  std::optional<int> eval_precision;
  eval->add_option("--precision", eval_precision, "Defaults to the checkpoint's precision")
      ->check(CLI::IsMember({32, 64}));

  CLI::App* flops = app.add_subcommand("flops", "Print the FLOP and parameter report of a config");
  flops->add_option("--config", a.config, "Model config JSON")->required()->check(CLI::ExistingFile);
  flops->add_option("--data", a.data, "Dataset spec, used only to supply a synthetic schema");
  flops->add_flag("--linear-test-mode", a.linear_test_mode, "Count the linear test-mode model");
  flops->add_option("--out", a.out, "Output path (default stdout)");

  CLI::App* gen = app.add_subcommand("gen-data", "Write a synthetic dataset as labeled CSV");
  gen->add_option("--data", a.data, "Synthetic dataset spec")->required();
  gen->add_option("--seed", a.seed, "Override the spec seed");
  gen->add_option("--out", a.out, "CSV path")->required();

  std::string spec_path;
  std::vector<std::string> axes;
  std::size_t workers = 0;
  CLI::App* sweep = app.add_subcommand("sweep", "Train a grid of configs and report quality vs compute");
  sweep->add_option("--spec", spec_path, "Sweep spec JSON")->check(CLI::ExistingFile);
  sweep->add_option("--config", a.config, "Base config (when no --spec)")->check(CLI::ExistingFile);
  sweep->add_option("--data", a.data, "Dataset spec (when no --spec)");
  sweep->add_option("--eval-data", a.eval_data, "Held-out dataset");
  sweep->add_option("--axis", axes, "FIELD=V1,V2,... (repeatable)");
  sweep->add_option("--steps", a.steps, "Steps per run");
  sweep->add_option("--budget-seconds", a.budget_seconds, "Seconds per run");
  sweep->add_option("--workers", workers, "Parallel runs");
  sweep->add_option("--out", a.out, "Output prefix: writes PREFIX.jsonl and PREFIX.csv (default: JSONL to stdout)");
  add_precision(sweep);

  std::string fit_in, fit_x = "gflop_per_example", fit_y = "relative_logloss";
  CLI::App* fit = app.add_subcommand("fit", "Fit y = a + b x^c to two CSV columns");
  fit->add_option("--in", fit_in, "CSV file, e.g. a sweep curve")->required()->check(CLI::ExistingFile);
  fit->add_option("--x", fit_x, "x column");
  fit->add_option("--y", fit_y, "y column");
  fit->add_option("--out", a.out, "Output path (default stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) {
      return a.precision == 64 ? do_train<double>(a, out, err) : do_train<float>(a, out, err);
    }
    if (eval->parsed()) {
      const int p = eval_precision.value_or(read_checkpoint_info(a.checkpoint).dtype == "f64" ? 64 : 32);
      return p == 64 ? do_eval<double>(a, out) : do_eval<float>(a, out);
    }
    if (flops->parsed()) {
      std::optional<DatasetSpec> data;
      if (!a.data.empty()) data = parse_dataset_arg(a.data);
      const LoadedConfig lc = load_run_config(a, data ? &*data : nullptr);
      Output o(a.out, out);
      o.get() << count_flops(lc.config).to_json().dump(2) << '\n';
      return kExitOk;
    }
    if (gen->parsed()) {
      DatasetSpec spec = parse_dataset_arg(a.data);
      if (spec.format != DatasetFormat::synthetic) throw ConfigError("gen-data: --data must be a synthetic spec");
      if (a.seed) spec.synthetic.seed = *a.seed;
      SyntheticStream s(spec.synthetic);
      write_labeled_csv(a.out, s.schema(), read_all(s));
      return kExitOk;
    }
    if (sweep->parsed()) {
      SweepSpec spec;
      if (!spec_path.empty()) {
        spec = sweep_spec_from_json(read_json_file(spec_path), std::filesystem::path(spec_path).parent_path());
      } else {
        if (a.config.empty() || a.data.empty()) {
          err << "sweep: give --spec, or --config and --data\n";
          return kExitUsage;
        }
        spec.data = parse_dataset_arg(a.data);
        const LoadedConfig lc = load_run_config(a, &spec.data);
        spec.base = lc.config;
        spec.train = lc.train;
        if (!a.eval_data.empty()) spec.eval_data = parse_dataset_arg(a.eval_data);
      }
      for (const std::string& ax : axes) {
        const auto eq = ax.find('=');
        if (eq == std::string::npos) {
          err << "sweep: --axis expects FIELD=V1,V2,...\n";
          return kExitUsage;
        }
        SweepAxis axis{ax.substr(0, eq), {}};
        for (const std::string& v : split_csv_line(ax.substr(eq + 1))) {
          try {
            axis.values.push_back(std::stoull(v));
          } catch (const std::exception&) {
            err << "sweep: bad axis value '" << v << "'\n";
            return kExitUsage;
          }
        }
        spec.axes.push_back(axis);
      }
      if (a.steps) spec.train.max_steps = *a.steps;
      if (a.budget_seconds) spec.train.budget_seconds = *a.budget_seconds;
      if (workers > 0) spec.workers = workers;
      if (sweep->count("--precision")) spec.precision = a.precision;
      const SweepReport report = run_sweep(spec);
      if (a.out.empty()) {
        write_sweep_jsonl(out, report);
      } else {
        Output jl(a.out + ".jsonl", out);
        write_sweep_jsonl(jl.get(), report);
        Output csv(a.out + ".csv", out);
        write_sweep_csv(csv.get(), report);
      }
      std::size_t failed = 0;
      for (const auto& r : report.runs) failed += r.error.has_value();
      err << report.runs.size() << " runs, " << failed << " failed\n";
      return kExitOk;
    }
    if (fit->parsed()) return do_fit(fit_in, fit_x, fit_y, a.out, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const UndefinedMetricError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitUsage;
}

}  // namespace wukong
