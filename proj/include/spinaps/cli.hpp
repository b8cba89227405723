#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spinaps/core_sim.hpp"
#include "spinaps/data_io.hpp"
#include "spinaps/fts_trainer.hpp"

namespace spinaps::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericFailure = 3 };

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  std::string command;
  std::string dataset = "digits";  // digits | har
  std::filesystem::path data_dir = "data/digits";
  std::filesystem::path out_dir = "out";
  std::filesystem::path model;        // input artifact for quantize / simulate
  std::filesystem::path perf_config;  // empty: built-in defaults
  std::uint64_t seed = 1;
  std::size_t epochs = 200;
  std::size_t presentation_time = 8;
  std::size_t window = 8;
  std::vector<int> bits{5, 6, 7, 8};
  double learning_rate = 0.3;
  std::size_t batch_size = 32;
  std::size_t limit = 0;       // 0: no cap on training samples
  std::size_t test_limit = 0;  // 0: no cap on evaluation samples
  bool export_image = false;
  bool quiet = false;

  void validate() const;
};

/// Normalized train/test sets for the configured dataset.
struct LoadedData {
  LabelledSet train;
  LabelledSet test;
};
LoadedData load_dataset(const RunConfig& config);

struct TrainOutputs {
  std::filesystem::path artifact;
  std::filesystem::path metrics_csv;
  TrainResult result;
};
TrainOutputs cmd_train(const RunConfig& config);

struct QuantizeRow {
  int bits;
  double accuracy;
  bool degenerate;
  std::filesystem::path artifact;
};
struct QuantizeOutputs {
  double float_accuracy = 0;
  std::vector<QuantizeRow> rows;
  std::filesystem::path csv;
};
QuantizeOutputs cmd_quantize(const RunConfig& config);

struct SimulateOutputs {
  std::vector<FtsDecision> decisions;
  std::vector<std::size_t> labels;
  LatencyCdf cdf_all;
  std::optional<LatencyCdf> cdf_correct;
  double accuracy = 0;
  double mean_reads_per_step = 0;
  std::size_t total_reads = 0;
  std::filesystem::path trace_csv;
  std::filesystem::path decisions_csv;
  std::filesystem::path cdf_csv;
};
SimulateOutputs cmd_simulate(const RunConfig& config);

struct PerfOutputs {
  std::filesystem::path json;
  std::filesystem::path table;
  bool ratios_ok = false;
};
PerfOutputs cmd_perf(const RunConfig& config);

/// Seed of the core's LFSR derived from the run seed; never zero.
std::uint16_t lfsr_seed_for(std::uint64_t seed);

/// Parse argv and dispatch; returns the process exit code.
int run(int argc, char** argv);

}  // namespace spinaps::cli
