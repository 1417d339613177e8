// Python view of the library: synthetic data, preprocessing, thresholding,
// metrics, the model, FedAvg and both training drivers. Arrays cross the
// boundary as copies.

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fednilm/checkpoint.hpp"
#include "fednilm/error.hpp"
#include "fednilm/federation.hpp"

namespace py = pybind11;
using namespace fednilm;

namespace {

template <typename T>
py::array_t<T> to_array(std::span<const T> v) {
  py::array_t<T> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

template <typename T>
py::array_t<T> to_array(const std::vector<T>& v) {
  return to_array<T>(std::span<const T>(v));
}

template <typename T>
std::vector<T> from_array(const py::array_t<T, py::array::c_style | py::array::forcecast>& a) {
  return {a.data(), a.data() + a.size()};
}

Tensor<float> batch_input(const py::array_t<float, py::array::c_style | py::array::forcecast>& x) {
  if (x.ndim() != 2) throw DimensionError("batch", "expected a [batch, window] array");
  return Tensor<float>(static_cast<std::size_t>(x.shape(0)), 1, static_cast<std::size_t>(x.shape(1)),
                       from_array<float>(x));
}

py::array_t<float> tensor_array(const Tensor<float>& t) {
  py::array_t<float> out({t.batch(), t.channels(), t.length()});
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

/// Float model with its parameters addressable from Python.
class PyModel {
 public:
  explicit PyModel(const ModelConfig& c) : model_(c) {}

  std::size_t param_count() const { return model_.params().size(); }
  py::array_t<float> params() const { return to_array<float>(model_.params()); }
  void set_params(const py::array_t<float, py::array::c_style | py::array::forcecast>& v) {
    if (static_cast<std::size_t>(v.size()) != param_count()) {
      throw StructuralError("expected " + std::to_string(param_count()) + " parameters");
    }
    std::copy(v.data(), v.data() + v.size(), model_.params().begin());
  }
  py::array_t<float> logits(const py::array_t<float, py::array::c_style | py::array::forcecast>& x) {
    model_.set_training(false);
    return tensor_array(model_.forward(batch_input(x)));
  }
  py::array_t<float> predict_states(const py::array_t<float, py::array::c_style | py::array::forcecast>& x) {
    return tensor_array(model_.predict_states(batch_input(x)));
  }
  std::vector<ScoreSet> score(const std::vector<WindowSample>& windows) { return score_windows(model_, windows); }

 private:
  NilmModel<float> model_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Federated appliance-state detection from aggregate household power";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<StructuralError>(m, "StructuralError", PyExc_ValueError);
  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<ApplianceSpec>(m, "ApplianceSpec")
      .def(py::init<>())
      .def_readwrite("name", &ApplianceSpec::name)
      .def_readwrite("max_power_w", &ApplianceSpec::max_power_w)
      .def_readwrite("power_threshold_w", &ApplianceSpec::power_threshold_w)
      .def_readwrite("min_on_s", &ApplianceSpec::min_on_s)
      .def_readwrite("min_off_s", &ApplianceSpec::min_off_s);
  m.def("default_appliances", &default_appliances);
  m.def("appliance_spec", &spec_for, py::arg("name"));
  m.def(
      "threshold_states",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& watts, const ApplianceSpec& spec) {
        const auto s = threshold_states(from_array<double>(watts), spec);
        return to_array<std::uint8_t>(s);
      },
      py::arg("watts"), py::arg("spec"), "ON/OFF states of a 6 s power series after duration filtering.");

  py::class_<ConfusionCounts>(m, "ConfusionCounts")
      .def(py::init<>())
      .def_readwrite("tp", &ConfusionCounts::tp)
      .def_readwrite("tn", &ConfusionCounts::tn)
      .def_readwrite("fp", &ConfusionCounts::fp)
      .def_readwrite("fn", &ConfusionCounts::fn)
      .def("__repr__", [](const ConfusionCounts& c) {
        return "ConfusionCounts(tp=" + std::to_string(c.tp) + ", tn=" + std::to_string(c.tn) +
               ", fp=" + std::to_string(c.fp) + ", fn=" + std::to_string(c.fn) + ")";
      });
  py::class_<ScoreSet>(m, "ScoreSet")
      .def_readonly("accuracy", &ScoreSet::accuracy)
      .def_readonly("precision", &ScoreSet::precision)
      .def_readonly("recall", &ScoreSet::recall)
      .def_readonly("f1", &ScoreSet::f1)
      .def_readonly("degenerate", &ScoreSet::degenerate);
  m.def(
      "confusion",
      [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& predicted,
         const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& truth) {
        return confusion(from_array<std::uint8_t>(predicted), from_array<std::uint8_t>(truth));
      },
      py::arg("predicted"), py::arg("truth"));
  m.def("scores", &scores, py::arg("counts"));

  py::class_<WindowSample>(m, "WindowSample")
      .def_property_readonly("aggregate", [](const WindowSample& w) { return to_array<float>(w.aggregate); })
      .def_property_readonly("labels", [](const WindowSample& w) { return to_array<std::uint8_t>(w.labels); })
      .def_readonly("household_id", &WindowSample::household_id)
      .def_readonly("start_time", &WindowSample::start_time);
  py::class_<HouseholdWindows>(m, "HouseholdWindows")
      .def_readonly("household_id", &HouseholdWindows::household_id)
      .def_readonly("train", &HouseholdWindows::train)
      .def_readonly("validation", &HouseholdWindows::validation)
      .def_readonly("test", &HouseholdWindows::test);
  py::class_<PreparedDataset>(m, "PreparedDataset")
      .def_readonly("appliance_names", &PreparedDataset::appliance_names)
      .def_readonly("window_len", &PreparedDataset::window_len)
      .def_readonly("households", &PreparedDataset::households)
      .def_property_readonly("mean_w", [](const PreparedDataset& d) { return d.report.mean_w; });
  m.def(
      "synthetic_dataset",
      [](std::uint64_t seed, double days, std::size_t households, const std::string& split, std::size_t unseen_case) {
        SynthOptions o;
        o.seed = seed;
        o.days = days;
        o.households = households;
        std::vector<HouseholdRaw> raws;
        for (auto& h : synth_households(o)) raws.push_back(std::move(h.raw));
        PreprocessOptions po;
        po.mode = parse_split_mode(split);
        po.unseen_case = unseen_case;
        const auto specs = default_appliances();
        py::gil_scoped_release release;
        return preprocess(raws, specs, po);
      },
      py::arg("seed") = 0, py::arg("days") = 14.0, py::arg("households") = 3, py::arg("split") = "seen",
      py::arg("unseen_case") = 1, "Generate synthetic households and preprocess them into windows.");

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("window_len", &ModelConfig::window_len)
      .def_readwrite("appliance_count", &ModelConfig::appliance_count)
      .def_readwrite("dropout_p", &ModelConfig::dropout_p)
      .def_readwrite("init_seed", &ModelConfig::init_seed);
  py::class_<PyModel>(m, "Model")
      .def(py::init<const ModelConfig&>(), py::arg("config") = ModelConfig{})
      .def_property_readonly("param_count", &PyModel::param_count)
      .def("params", &PyModel::params)
      .def("set_params", &PyModel::set_params, py::arg("values"))
      .def("logits", &PyModel::logits, py::arg("batch"), "[B, L] normalized windows -> [B, 2I, L] logits.")
      .def("predict_states", &PyModel::predict_states, py::arg("batch"))
      .def("score", &PyModel::score, py::arg("windows"), py::call_guard<py::gil_scoped_release>());

  m.def(
      "fedavg",
      [](const std::vector<py::array_t<float, py::array::c_style | py::array::forcecast>>& updates) {
        if (updates.empty()) throw ParameterError("fedavg needs at least one update");
        auto layout = std::make_shared<ParamLayout>();
        layout->add("flat", "values", {static_cast<std::size_t>(updates[0].size())});
        std::vector<ParamVector<float>> ps;
        for (const auto& u : updates) ps.push_back({layout, from_array<float>(u)});
        return to_array<float>(fedavg(ps).values);
      },
      py::arg("updates"), "Unweighted elementwise mean, summed in list order.");

  py::class_<FederationConfig>(m, "FederationConfig")
      .def(py::init<>())
      .def_readwrite("clients", &FederationConfig::clients)
      .def_readwrite("global_rounds", &FederationConfig::global_rounds)
      .def_readwrite("local_epochs", &FederationConfig::local_epochs)
      .def_readwrite("local_batch", &FederationConfig::local_batch)
      .def_readwrite("global_batch", &FederationConfig::global_batch)
      .def_readwrite("eta", &FederationConfig::eta)
      .def_readwrite("rho", &FederationConfig::rho)
      .def_readwrite("global_seed", &FederationConfig::global_seed)
      .def_readwrite("client_seeds", &FederationConfig::client_seeds)
      .def_readwrite("threads", &FederationConfig::threads)
      .def_readwrite("model", &FederationConfig::model)
      .def("validate", &FederationConfig::validate)
      .def("initial_model", &FederationConfig::initial_model)
      .def("hash", &FederationConfig::hash);

  py::class_<ClientRoundStat>(m, "ClientRoundStat")
      .def_readonly("client_id", &ClientRoundStat::client_id)
      .def_readonly("loss", &ClientRoundStat::loss)
      .def_readonly("batches", &ClientRoundStat::batches)
      .def_readonly("excluded", &ClientRoundStat::excluded)
      .def_readonly("note", &ClientRoundStat::note);
  py::class_<RoundReport>(m, "RoundReport")
      .def_readonly("round", &RoundReport::round)
      .def_readonly("clients", &RoundReport::clients)
      .def_readonly("elapsed_seconds", &RoundReport::elapsed_seconds);
  py::class_<TrainingResult>(m, "TrainingResult")
      .def_property_readonly("params", [](const TrainingResult& r) { return to_array<float>(r.params.values); })
      .def_readonly("rounds", &TrainingResult::rounds)
      .def(
          "model",
          [](const TrainingResult& r, const FederationConfig& c) {
            PyModel model(c.initial_model());
            model.set_params(to_array<float>(r.params.values));
            return model;
          },
          py::arg("config"));

  m.def(
      "run_federated",
      [](const FederationConfig& c, const std::vector<std::vector<WindowSample>>& datasets) {
        py::gil_scoped_release release;
        return run_federated(c, datasets);
      },
      py::arg("config"), py::arg("datasets"), "In-process FedAvg; datasets[n] belongs to client n.");
  m.def(
      "run_centralized",
      [](const FederationConfig& c, std::vector<WindowSample> pooled, std::size_t epochs) {
        py::gil_scoped_release release;
        return run_centralized(c, std::move(pooled), epochs);
      },
      py::arg("config"), py::arg("windows"), py::arg("epochs"));

  m.def(
      "load_checkpoint",
      [](const std::string& path) {
        const auto c = load_checkpoint(path);
        PyModel model(c.model);
        model.set_params(to_array<float>(c.params.values));
        return py::make_tuple(std::move(model), c.mean_w);
      },
      py::arg("path"), "Returns (model, normalization mean in watts).");
}
