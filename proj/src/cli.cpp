#include "spinaps/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "spinaps/perf_model.hpp"

namespace spinaps::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Independent streams derived from the run seed.
enum Stream : std::uint64_t { kEvalStream = 101, kSimStream = 102 };

Rng stream_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

void log(const RunConfig& config, const std::string& line) {
  if (!config.quiet) std::cerr << line << '\n';
}

std::string fmt(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

fs::path first_existing(const fs::path& dir, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    if (fs::exists(dir / n)) return dir / n;
  }
  throw DataError("none of the expected files found in " + dir.string() + " (first: " + *names.begin() + ")", 0);
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string(), 0);
  return out;
}

void write_resolved_config(const RunConfig& config, const ordered_json& extra = {}) {
  ordered_json j;
  j["command"] = config.command;
  j["dataset"] = config.dataset;
  j["data_dir"] = config.data_dir.string();
  j["out_dir"] = config.out_dir.string();
  j["model"] = config.model.string();
  j["perf_config"] = config.perf_config.string();
  j["seed"] = config.seed;
  j["epochs"] = config.epochs;
  j["T"] = config.presentation_time;
  j["tau"] = config.window;
  j["bits"] = config.bits;
  j["learning_rate"] = config.learning_rate;
  j["batch_size"] = config.batch_size;
  j["limit"] = config.limit;
  j["test_limit"] = config.test_limit;
  j["export_image"] = config.export_image;
  if (!extra.is_null()) j["resolved"] = extra;
  auto out = open_out(config.out_dir / "run_config.json");
  out << j.dump(2) << '\n';
}

LabelledSet load_eval_split(const RunConfig& config) {
  RunConfig c = config;
  c.limit = 0;
  return load_dataset(c).test;
}

ModelArtifact load_input_model(const RunConfig& config) {
  if (config.model.empty()) throw UsageError(config.command + ": --model is required");
  if (!fs::exists(config.model)) throw ArtifactError("model artifact not found: " + config.model.string());
  return load_model(config.model);
}

}  // namespace

void RunConfig::validate() const {
  if (dataset != "digits" && dataset != "har") throw UsageError("--dataset must be digits or har");
  if (command == "train" && epochs == 0) throw UsageError("--epochs must be at least 1");
  if (presentation_time == 0) throw UsageError("--T must be at least 1");
  if (window == 0) throw UsageError("--tau must be at least 1");
  if (window > presentation_time) throw UsageError("--tau must not exceed --T");
  if (batch_size == 0) throw UsageError("--batch must be at least 1");
  if (!(learning_rate >= 0.0)) throw UsageError("--lr must be non-negative");
  if (command == "quantize" && bits.empty()) throw UsageError("--bits needs at least one value");
  for (int b : bits) {
    if (b < 1 || b > 16) throw UsageError("--bits values must lie in 1..16");
  }
}

std::uint16_t lfsr_seed_for(std::uint64_t seed) { return static_cast<std::uint16_t>(1 + seed % 65535); }

LoadedData load_dataset(const RunConfig& config) {
  Dataset train_raw;
  Dataset test_raw;
  if (config.dataset == "digits") {
    const auto& d = config.data_dir;
    train_raw = load_digits(first_existing(d, {"train-images-idx3-ubyte.gz", "train-images-idx3-ubyte"}),
                            first_existing(d, {"train-labels-idx1-ubyte.gz", "train-labels-idx1-ubyte"}),
                            Split::Train);
    test_raw = load_digits(first_existing(d, {"t10k-images-idx3-ubyte.gz", "t10k-images-idx3-ubyte"}),
                           first_existing(d, {"t10k-labels-idx1-ubyte.gz", "t10k-labels-idx1-ubyte"}),
                           Split::Test);
  } else {
    const auto& d = config.data_dir;
    train_raw = load_har(first_existing(d, {"train/X_train.txt", "X_train.txt"}),
                         first_existing(d, {"train/y_train.txt", "y_train.txt"}), Split::Train);
    test_raw = load_har(first_existing(d, {"test/X_test.txt", "X_test.txt"}),
                        first_existing(d, {"test/y_test.txt", "y_test.txt"}), Split::Test);
  }
  if (config.limit > 0) train_raw.truncate(config.limit);
  if (config.test_limit > 0) test_raw.truncate(config.test_limit);
  if (train_raw.n_features != test_raw.n_features) {
    throw DataError("train and test feature counts differ", 0);
  }
  const Normalizer norm = config.dataset == "digits" ? Normalizer::fixed(train_raw.n_features, 255.0)
                                                     : Normalizer::fit(train_raw);
  LoadedData out{norm.apply(train_raw), norm.apply(test_raw)};
  out.train.n_classes = out.test.n_classes = std::max(train_raw.n_classes, test_raw.n_classes);
  return out;
}

TrainOutputs cmd_train(const RunConfig& config) {
  config.validate();
  const LoadedData data = load_dataset(config);
  fs::create_directories(config.out_dir);

  TrainConfig tc;
  tc.epochs = config.epochs;
  tc.learning_rate = config.learning_rate;
  tc.batch_size = config.batch_size;
  tc.seed = config.seed;
  tc.presentation_time = config.presentation_time;
  tc.window = config.window;
  tc.validate();

  write_resolved_config(config, {{"train_samples", data.train.size()},
                                 {"test_samples", data.test.size()},
                                 {"n_features", data.train.n_features},
                                 {"n_classes", data.train.n_classes}});

  TrainOutputs out;
  out.result = train(data.train, data.test, tc, [&](const EpochMetrics& m) {
    log(config, "epoch " + std::to_string(m.epoch) + " train " + fmt(m.train_accuracy, 4) + " test " +
                    fmt(m.test_accuracy, 4) + " loss " + fmt(m.mean_loss, 5));
  });

  out.metrics_csv = config.out_dir / "metrics.csv";
  {
    auto f = open_out(out.metrics_csv);
    write_metrics_csv(f, out.result.history);
  }
  ModelArtifact artifact;
  artifact.provenance = {config.seed, static_cast<std::uint32_t>(config.epochs),
                         static_cast<std::uint32_t>(config.presentation_time),
                         static_cast<std::uint32_t>(config.window), 0};
  artifact.payload = out.result.model;
  out.artifact = config.out_dir / "model.spnm";
  save_model(artifact, out.artifact);
  return out;
}

QuantizeOutputs cmd_quantize(const RunConfig& config) {
  config.validate();
  const ModelArtifact input = load_input_model(config);
  if (input.is_quantized()) throw ArtifactError("quantize expects a float model artifact");
  const GlmModel& model = input.float_model();
  const LabelledSet test = load_eval_split(config);
  if (test.n_features != model.n_inputs) throw DataError("dataset feature count does not match the model", 0);
  fs::create_directories(config.out_dir);
  write_resolved_config(config, {{"test_samples", test.size()}, {"T", model.presentation_time}});

  QuantizeOutputs out;
  {
    Rng rng = stream_rng(config.seed, kEvalStream);
    out.float_accuracy = evaluate_fts(model, test, model.presentation_time, rng);
  }
  log(config, "float accuracy " + fmt(out.float_accuracy, 4));

  for (int b : config.bits) {
    const QuantizedModel qm = quantize_model(model, b);
    Rng rng = stream_rng(config.seed, kEvalStream);
    Lfsr lfsr(lfsr_seed_for(config.seed));
    std::size_t correct = 0;
    for (std::size_t s = 0; s < test.size(); ++s) {
      const SpikeTrain st = rate_encode(test.sample(s), qm.presentation_time, rng);
      if (infer_fts_quantized(qm, st, lfsr).predicted_class == test.labels[s]) ++correct;
    }
    QuantizeRow row{b, test.size() ? static_cast<double>(correct) / static_cast<double>(test.size()) : 0.0,
                    qm.degenerate, config.out_dir / ("model_b" + std::to_string(b) + ".spnm")};
    ModelArtifact artifact;
    artifact.provenance = input.provenance;
    artifact.provenance.bits = static_cast<std::uint32_t>(b);
    artifact.payload = qm;
    save_model(artifact, row.artifact);
    log(config, "b=" + std::to_string(b) + " accuracy " + fmt(row.accuracy, 4) + (row.degenerate ? " (degenerate)" : ""));
    out.rows.push_back(row);
  }

  out.csv = config.out_dir / "accuracy_vs_bits.csv";
  auto f = open_out(out.csv);
  f << "bits,accuracy,float_accuracy,degenerate\n";
  for (const auto& r : out.rows) {
    f << r.bits << ',' << fmt(r.accuracy) << ',' << fmt(out.float_accuracy) << ',' << (r.degenerate ? 1 : 0) << '\n';
  }
  return out;
}

SimulateOutputs cmd_simulate(const RunConfig& config) {
  config.validate();
  const ModelArtifact input = load_input_model(config);
  if (!input.is_quantized()) throw GeometryError("simulate expects a quantized model artifact");
  const QuantizedModel& qm = input.quantized_model();
  if (qm.bits != 8) throw GeometryError("the core stores 8-bit synapses; artifact has b=" + std::to_string(qm.bits));
  const LabelledSet test = load_eval_split(config);
  if (test.n_features != qm.n_inputs) throw GeometryError("dataset feature count does not match the model inputs");

  const CoreGeometry geometry = CoreGeometry::for_model(qm);
  const CoreMemoryImage image = map_model_to_memory(qm, geometry);
  fs::create_directories(config.out_dir);
  write_resolved_config(config, {{"samples", test.size()},
                                 {"T", qm.presentation_time},
                                 {"tau", qm.window},
                                 {"lfsr_seed", lfsr_seed_for(config.seed)},
                                 {"used_wordlines", geometry.used_wordlines()},
                                 {"array_rows", geometry.array_rows()}});
  if (config.export_image) {
    auto f = open_out(config.out_dir / "memory_image.bin", std::ios::binary);
    image.write(f);
  }

  SimulateOutputs out;
  out.trace_csv = config.out_dir / "trace.csv";
  out.decisions_csv = config.out_dir / "decisions.csv";
  out.cdf_csv = config.out_dir / "latency_cdf.csv";
  auto trace = open_out(out.trace_csv);
  auto decisions = open_out(out.decisions_csv);
  write_trace_csv_header(trace);
  decisions << "sample_id,label,predicted,t_d,fallback\n";

  Rng rng = stream_rng(config.seed, kSimStream);
  CoreState state(geometry, lfsr_seed_for(config.seed));
  std::vector<FtsDecision> correct_only;
  std::size_t correct = 0;
  std::size_t steps_run = 0;
  for (std::size_t s = 0; s < test.size(); ++s) {
    const SpikeTrain st = rate_encode(test.sample(s), qm.presentation_time, rng);
    const CoreRun run = run_first_to_spike(state, image, st);
    write_trace_csv(trace, s, run);
    const auto& d = run.decision;
    decisions << s << ',' << test.labels[s] << ',' << d.predicted_class << ','
              << (d.spiked() ? std::to_string(d.decision_time) : std::string("none")) << ','
              << (d.fallback_used ? 1 : 0) << '\n';
    out.decisions.push_back(d);
    out.labels.push_back(test.labels[s]);
    out.total_reads += run.trace.total_reads();
    steps_run += run.trace.steps.size();
    if (d.predicted_class == test.labels[s]) {
      ++correct;
      correct_only.push_back(d);
    }
  }
  if (out.decisions.empty()) throw DataError("simulate: evaluation split is empty", 0);
  out.accuracy = static_cast<double>(correct) / static_cast<double>(out.decisions.size());
  out.mean_reads_per_step = steps_run ? static_cast<double>(out.total_reads) / static_cast<double>(steps_run) : 0.0;
  out.cdf_all = latency_cdf(out.decisions, qm.presentation_time);
  if (!correct_only.empty()) out.cdf_correct = latency_cdf(correct_only, qm.presentation_time);

  auto cdf = open_out(out.cdf_csv);
  cdf << "t,cdf_all,cdf_correct\n";
  for (std::size_t t = 0; t < out.cdf_all.cdf.size(); ++t) {
    cdf << t + 1 << ',' << fmt(out.cdf_all.cdf[t]) << ','
        << (out.cdf_correct ? fmt(out.cdf_correct->cdf[t]) : std::string("")) << '\n';
  }
  cdf << "none," << fmt(out.cdf_all.no_spike) << ','
      << (out.cdf_correct ? fmt(out.cdf_correct->no_spike) : std::string("")) << '\n';

  ordered_json summary;
  summary["samples"] = out.decisions.size();
  summary["accuracy"] = out.accuracy;
  summary["total_wordline_reads"] = out.total_reads;
  summary["mean_wordlines_per_step"] = out.mean_reads_per_step;
  summary["cdf_all"] = out.cdf_all.cdf;
  summary["no_spike_all"] = out.cdf_all.no_spike;
  if (out.cdf_correct) summary["cdf_correct"] = out.cdf_correct->cdf;
  auto sf = open_out(config.out_dir / "summary.json");
  sf << summary.dump(2) << '\n';
  log(config, "accuracy " + fmt(out.accuracy, 4) + "  mean word lines/step " + fmt(out.mean_reads_per_step, 2));
  if (out.cdf_all.cdf.size() >= 4) log(config, "CDF(4) all " + fmt(out.cdf_all.cdf[3], 4));
  return out;
}

PerfOutputs cmd_perf(const RunConfig& config) {
  const perf::PerfConfig pc =
      config.perf_config.empty() ? perf::default_config() : perf::load_config(config.perf_config.string());
  const perf::PerfReport report = perf::make_report(pc);
  fs::create_directories(config.out_dir);
  write_resolved_config(config);

  PerfOutputs out;
  out.json = config.out_dir / "perf_report.json";
  out.table = config.out_dir / "perf_table.txt";
  {
    auto f = open_out(out.json);
    perf::write_report_json(f, report, pc);
  }
  std::ostringstream table;
  perf::write_report_table(table, report);
  out.ratios_ok = true;
  for (const auto& row : report.rows) {
    const bool ok = row.area_efficiency_ratio >= 3.0 && row.area_efficiency_ratio <= 4.1;
    out.ratios_ok = out.ratios_ok && ok;
    table << "b=" << row.bits << " STT-RAM/SRAM area efficiency " << fmt(row.area_efficiency_ratio, 2) << "x  "
          << (ok ? "within" : "outside") << " [3.0, 4.1]\n";
  }
  {
    auto f = open_out(out.table);
    f << table.str();
  }
  if (!config.quiet) std::cout << table.str();
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"First-to-spike GLM network: training, quantization, core simulation, performance model"};
  app.require_subcommand(1);
  RunConfig config;
  std::string write_default;
  std::string bits_text;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", config.out_dir, "Output directory");
    sub->add_option("--seed", config.seed, "Seed for every random stream");
    sub->add_flag("--quiet", config.quiet, "Suppress progress output");
  };
  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--dataset", config.dataset, "digits or har")->check(CLI::IsMember({"digits", "har"}));
    sub->add_option("--data-dir", config.data_dir, "Directory holding the dataset files");
    sub->add_option("--limit", config.limit, "Cap on training samples (0: all)");
    sub->add_option("--test-limit", config.test_limit, "Cap on evaluation samples (0: all)");
  };

  auto* train_cmd = app.add_subcommand("train", "Train a float model");
  add_common(train_cmd);
  add_data(train_cmd);
  train_cmd->add_option("--epochs", config.epochs, "Training epochs");
  train_cmd->add_option("--T", config.presentation_time, "Presentation time steps");
  train_cmd->add_option("--tau", config.window, "Kernel window length");
  train_cmd->add_option("--lr", config.learning_rate, "Learning rate");
  train_cmd->add_option("--batch", config.batch_size, "Minibatch size");

  auto* quant_cmd = app.add_subcommand("quantize", "Quantize a float model and sweep precisions");
  add_common(quant_cmd);
  add_data(quant_cmd);
  quant_cmd->add_option("--model", config.model, "Float model artifact")->required();
  quant_cmd->add_option("--bits", bits_text, "Comma-separated precisions (default 5,6,7,8)");

  auto* sim_cmd = app.add_subcommand("simulate", "Run the core simulator over the evaluation split");
  add_common(sim_cmd);
  add_data(sim_cmd);
  sim_cmd->add_option("--model", config.model, "8-bit quantized model artifact")->required();
  sim_cmd->add_flag("--export-image", config.export_image, "Write the memory image");

  auto* perf_cmd = app.add_subcommand("perf", "Evaluate the performance model");
  add_common(perf_cmd);
  perf_cmd->add_option("--perf-config", config.perf_config, "Performance configuration file");
  perf_cmd->add_option("--write-default-config", write_default, "Write the calibrated default configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    config.command = app.get_subcommands().front()->get_name();
    if (!bits_text.empty()) {
      config.bits.clear();
      std::stringstream ss(bits_text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        try {
          std::size_t used = 0;
          config.bits.push_back(std::stoi(item, &used));
          if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
          throw UsageError("--bits: not an integer: '" + item + "'");
        }
      }
    }
    config.validate();
    if (config.command == "train") {
      cmd_train(config);
    } else if (config.command == "quantize") {
      cmd_quantize(config);
    } else if (config.command == "simulate") {
      cmd_simulate(config);
    } else {
      if (!write_default.empty()) {
        std::ofstream f(write_default, std::ios::trunc);
        if (!f) throw DataError("cannot write " + write_default, 0);
        perf::write_config(f, perf::default_config());
      }
      cmd_perf(config);
    }
    return kOk;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const TrainingDivergence& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const EncodingError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const std::domain_error& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace spinaps::cli
