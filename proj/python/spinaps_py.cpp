#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "spinaps/cli.hpp"
#include "spinaps/perf_model.hpp"
#include "spinaps/quant_pipeline.hpp"

namespace py = pybind11;
using namespace spinaps;

namespace {

py::dict decision_dict(const FtsDecision& d) {
  py::dict out;
  out["predicted"] = d.predicted_class;
  out["t_d"] = d.spiked() ? py::object(py::int_(d.decision_time)) : py::object(py::none());
  out["fallback"] = d.fallback_used;
  return out;
}

py::dict cdf_dict(const LatencyCdf& c) {
  py::dict out;
  out["cdf"] = c.cdf;
  out["no_spike"] = c.no_spike;
  out["count"] = c.count;
  return out;
}

py::dict model_dict(const ModelArtifact& a) {
  py::dict out;
  out["seed"] = a.provenance.seed;
  out["epochs"] = a.provenance.epochs;
  if (a.is_quantized()) {
    const auto& q = a.quantized_model();
    out["bits"] = q.bits;
    out["n_inputs"] = q.n_inputs;
    out["n_outputs"] = q.n_outputs;
    out["T"] = q.presentation_time;
    out["tau"] = q.window;
    out["weight_codes"] = q.weight_codes;
    out["bias_codes"] = q.bias_codes;
    out["weight_step"] = q.weight_step;
    out["bias_step"] = q.bias_step;
  } else {
    const auto& m = a.float_model();
    out["bits"] = py::none();
    out["n_inputs"] = m.n_inputs;
    out["n_outputs"] = m.n_outputs;
    out["T"] = m.presentation_time;
    out["tau"] = m.window;
    out["weights"] = m.weights;
    out["biases"] = m.biases;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "First-to-spike GLM SNN training, quantization and core simulation.";

  py::class_<cli::RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("dataset", &cli::RunConfig::dataset)
      .def_readwrite("data_dir", &cli::RunConfig::data_dir)
      .def_readwrite("out_dir", &cli::RunConfig::out_dir)
      .def_readwrite("model", &cli::RunConfig::model)
      .def_readwrite("perf_config", &cli::RunConfig::perf_config)
      .def_readwrite("seed", &cli::RunConfig::seed)
      .def_readwrite("epochs", &cli::RunConfig::epochs)
      .def_readwrite("T", &cli::RunConfig::presentation_time)
      .def_readwrite("tau", &cli::RunConfig::window)
      .def_readwrite("bits", &cli::RunConfig::bits)
      .def_readwrite("learning_rate", &cli::RunConfig::learning_rate)
      .def_readwrite("batch_size", &cli::RunConfig::batch_size)
      .def_readwrite("limit", &cli::RunConfig::limit)
      .def_readwrite("test_limit", &cli::RunConfig::test_limit)
      .def_readwrite("export_image", &cli::RunConfig::export_image)
      .def_readwrite("quiet", &cli::RunConfig::quiet);

  m.def(
      "train",
      [](cli::RunConfig c) {
        c.command = "train";
        const auto out = cli::cmd_train(c);
        py::list history;
        for (const auto& e : out.result.history) {
          py::dict row;
          row["epoch"] = e.epoch;
          row["train_accuracy"] = e.train_accuracy;
          row["test_accuracy"] = e.test_accuracy;
          row["mean_loss"] = e.mean_loss;
          history.append(row);
        }
        py::dict d;
        d["artifact"] = out.artifact;
        d["metrics_csv"] = out.metrics_csv;
        d["history"] = history;
        return d;
      },
      py::arg("config"));

  m.def(
      "quantize",
      [](cli::RunConfig c) {
        c.command = "quantize";
        const auto out = cli::cmd_quantize(c);
        py::list rows;
        for (const auto& r : out.rows) {
          py::dict row;
          row["bits"] = r.bits;
          row["accuracy"] = r.accuracy;
          row["degenerate"] = r.degenerate;
          row["artifact"] = r.artifact;
          rows.append(row);
        }
        py::dict d;
        d["float_accuracy"] = out.float_accuracy;
        d["rows"] = rows;
        d["csv"] = out.csv;
        return d;
      },
      py::arg("config"));

  m.def(
      "simulate",
      [](cli::RunConfig c) {
        c.command = "simulate";
        const auto out = cli::cmd_simulate(c);
        py::list decisions;
        for (const auto& d : out.decisions) decisions.append(decision_dict(d));
        py::dict d;
        d["decisions"] = decisions;
        d["labels"] = out.labels;
        d["accuracy"] = out.accuracy;
        d["cdf_all"] = cdf_dict(out.cdf_all);
        d["cdf_correct"] = out.cdf_correct ? py::object(cdf_dict(*out.cdf_correct)) : py::object(py::none());
        d["mean_reads_per_step"] = out.mean_reads_per_step;
        d["total_reads"] = out.total_reads;
        d["trace_csv"] = out.trace_csv;
        d["decisions_csv"] = out.decisions_csv;
        d["cdf_csv"] = out.cdf_csv;
        return d;
      },
      py::arg("config"));

  m.def(
      "perf",
      [](cli::RunConfig c) {
        c.command = "perf";
        c.quiet = true;
        const auto out = cli::cmd_perf(c);
        py::dict d;
        d["json"] = out.json;
        d["table"] = out.table;
        d["ratios_ok"] = out.ratios_ok;
        return d;
      },
      py::arg("config"));

  m.def("default_perf_config", [] {
    std::ostringstream s;
    perf::write_config(s, perf::default_config());
    return s.str();
  }, "Built-in performance configuration as text.");

  m.def("load_model", [](const std::filesystem::path& p) { return model_dict(load_model(p)); }, py::arg("path"));

  m.def("quantize_values", [](const std::vector<double>& v, int bits) {
    const auto q = quantize_uniform(v, bits);
    return py::make_tuple(q.codes, q.step, q.degenerate);
  }, py::arg("values"), py::arg("bits"), "Symmetric uniform quantization: (codes, step, degenerate).");
  m.def("clip_to_fixed", &clip_to_fixed, py::arg("u"), "Saturating 1.4.3 fixed-point code of a potential.");
  m.def("pwl_sigmoid", [](std::int32_t q) {
    if (q < kPotentialMinCode || q > kPotentialMaxCode) throw py::value_error("code out of range");
    return static_cast<int>(pwl_sigmoid(q));
  }, py::arg("code"));
  m.def("lfsr_next", &lfsr_next, py::arg("state"));
  m.def("lfsr_seed_for", &cli::lfsr_seed_for, py::arg("seed"));
}
