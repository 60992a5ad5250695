#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "wukong/checkpoint.hpp"
#include "wukong/flops.hpp"
#include "wukong/interaction.hpp"
#include "wukong/metrics.hpp"
#include "wukong/power_law.hpp"
#include "wukong/sweep.hpp"
#include "wukong/train.hpp"

namespace py = pybind11;
using namespace wukong;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor<double> to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor<double>(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor<double>& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

// batch: {"categorical": [feature][example][ids], "dense": [[...], ...], "labels": [...]}
ExampleBatch batch_from_py(const FeatureSchema& schema, const py::dict& d) {
  ExampleBatch b = ExampleBatch::empty_for(schema);
  const auto cats = d["categorical"].cast<std::vector<std::vector<std::vector<std::uint64_t>>>>();
  if (cats.size() != schema.categorical_features.size()) throw ConfigError("batch: wrong number of features");
  const std::size_t n = cats.empty() ? 0 : cats[0].size();
  for (std::size_t f = 0; f < cats.size(); ++f) {
    if (cats[f].size() != n) throw ConfigError("batch: ragged example counts");
    for (const auto& ids : cats[f]) b.categorical[f].push(ids);
  }
  if (d.contains("dense")) {
    for (const auto& row : d["dense"].cast<std::vector<std::vector<double>>>()) {
      b.dense.insert(b.dense.end(), row.begin(), row.end());
    }
  }
  if (d.contains("labels")) {
    b.labels = d["labels"].cast<std::vector<double>>();
  } else {
    b.labels.assign(n, 0.0);
  }
  return b;
}

class PyModel {
 public:
  explicit PyModel(const std::string& config_json)
      : params_(build_model<double>(config_from_json(json::parse(config_json)))) {}
  explicit PyModel(ModelParams<double> p) : params_(std::move(p)) {}

  Array predict(const py::dict& batch) const {
    return to_array(predict_logits(params_, batch_from_py(params_.config.schema, batch)));
  }
  std::vector<std::string> parameter_names() const {
    std::vector<std::string> names;
    for (const auto& e : params_.store.entries()) names.push_back(e.name);
    return names;
  }
  Array parameter(const std::string& name) const { return to_array(params_.store.get(name)); }
  std::string config() const { return config_to_json(params_.config).dump(); }
  std::string digest() const { return config_digest(params_.config); }
  void save(const std::string& path) const { save_checkpoint(params_, path); }

 private:
  ModelParams<double> params_;
};

}  // namespace

PYBIND11_MODULE(_wukong, m) {
  m.doc() = "Wukong core bindings";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<UndefinedMetricError>(m, "UndefinedMetricError", PyExc_ValueError);

  m.def("fnv1a64", [](const std::string& s) { return fnv1a64(s); });
  m.def("hash_token", &hash_token, py::arg("token"), py::arg("cardinality"));

  m.def("count_flops", [](const std::string& config_json) {
    WukongConfig c = config_from_json(json::parse(config_json));
    c.validate();
    return count_flops(c).to_json().dump();
  });

  m.def("fm_basic", [](const Array& x) { return to_array(fm_basic(to_tensor(x))); });
  m.def("fm_lowrank", [](const Array& x, const Array& y) { return to_array(fm_lowrank(to_tensor(x), to_tensor(y))); });

  m.def("logloss", [](const std::vector<double>& z, const std::vector<double>& y) { return logloss(z, y); });
  m.def("auc", [](const std::vector<double>& s, const std::vector<double>& y) { return auc(s, y); });

  m.def("fit_power_law", [](const std::vector<double>& x, const std::vector<double>& y) {
    return fit_power_law(x, y).to_json().dump();
  });

  m.def(
      "train",
      [](const std::string& config_json, const std::string& data_json, const std::string& options_json) {
        const DatasetSpec data = dataset_spec_from_json(json::parse(data_json));
        WukongConfig c = config_from_json(json::parse(config_json));
        resolve_schema(c, data);
        c.validate();
        ModelParams<double> model = build_model<double>(c);
        auto stream = open_dataset(data, c.schema);
        TrainOptions opts = train_options_from_json(json::parse(options_json));
        Trainer<double> trainer(model, opts);
        std::vector<std::string> lines;
        {
          py::gil_scoped_release release;
          for (const auto& r : trainer.train(*stream)) lines.push_back(metrics_jsonl_line(r));
        }
        return std::make_pair(lines, PyModel(std::move(model)));
      },
      py::arg("config_json"), py::arg("data_json"), py::arg("options_json") = "{}");

  py::class_<PyModel>(m, "Model")
      .def(py::init<const std::string&>(), py::arg("config_json"))
      .def("predict", &PyModel::predict)
      .def("parameter_names", &PyModel::parameter_names)
      .def("parameter", &PyModel::parameter)
      .def("config_json", &PyModel::config)
      .def("digest", &PyModel::digest)
      .def("save", &PyModel::save)
      .def_static("load", [](const std::string& path) { return PyModel(load_checkpoint<double>(path)); });
}
