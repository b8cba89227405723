#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "spinaps/fts_trainer.hpp"
#include "spinaps/glm_model.hpp"
#include "spinaps/quant_pipeline.hpp"

namespace spinaps {

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Shape of one core. Word line (j, d) holds the b-bit synapses of input j at
/// window tap d for every output; one extra line holds the biases.
struct CoreGeometry {
  std::size_t n_inputs = 256;
  std::size_t n_outputs = 256;
  std::size_t window = 7;
  int bits = 8;

  std::size_t word_width() const { return n_outputs * static_cast<std::size_t>(bits); }
  std::size_t kernel_wordlines() const { return n_inputs * window; }
  std::size_t used_wordlines() const { return kernel_wordlines() + 1; }
  /// Physical rows: used lines rounded up to a multiple of 256.
  std::size_t array_rows() const { return (used_wordlines() + 255) / 256 * 256; }
  std::size_t bias_line() const { return kernel_wordlines(); }
  std::size_t kernel_line(std::size_t input, std::size_t tap) const { return input * window + tap; }

  /// Geometry sized exactly to a quantized model.
  static CoreGeometry for_model(const QuantizedModel& qm);
  bool operator==(const CoreGeometry&) const = default;
};

/// Binary device array of the core, rows of word_width bits.
class CoreMemoryImage {
 public:
  CoreMemoryImage() = default;
  CoreMemoryImage(CoreGeometry geometry, std::size_t active_outputs, double weight_step, double bias_step);

  const CoreGeometry& geometry() const { return geometry_; }
  std::size_t rows() const { return geometry_.array_rows(); }
  std::size_t words_per_row() const { return words_per_row_; }
  /// Outputs that carry a mapped neuron; the rest never fire.
  std::size_t active_outputs() const { return active_outputs_; }
  double weight_step() const { return weight_step_; }
  double bias_step() const { return bias_step_; }

  bool bit(std::size_t row, std::size_t col) const;
  void set_bit(std::size_t row, std::size_t col, bool value);
  std::span<const std::uint64_t> row(std::size_t r) const;

  /// Sign-magnitude code of output i on word line `row`.
  std::int32_t read_code(std::size_t row, std::size_t output) const;
  void write_code(std::size_t row, std::size_t output, std::int32_t code);
  /// Decode every output code of one word line.
  void decode_row(std::size_t row, std::span<std::int32_t> out) const;

  bool operator==(const CoreMemoryImage&) const = default;

  /// Raw export: header then row-major word lines, little-endian.
  void write(std::ostream& out) const;
  static CoreMemoryImage read(std::istream& in);

 private:
  CoreGeometry geometry_;
  std::size_t active_outputs_ = 0;
  double weight_step_ = 0.0;
  double bias_step_ = 0.0;
  std::size_t words_per_row_ = 0;
  std::vector<std::uint64_t> bits_;
};

CoreMemoryImage map_model_to_memory(const QuantizedModel& qm, const CoreGeometry& geometry);
/// Inverse of map_model_to_memory; scales come back from the image registers.
QuantizedModel unpack_memory(const CoreMemoryImage& image, std::size_t n_inputs, std::size_t presentation_time);

/// Window generated from the input shift register at 1-based step t.
/// `seen` holds s_1..s_{t-1}.
SpikeWindow spike_window(std::span<const std::uint8_t> seen, std::size_t t, std::size_t tau);

/// Addresses to read this step: (j, d) for every set window bit in input
/// order, then the bias line.
std::vector<std::size_t> gather_active_wordlines(const CoreGeometry& geometry, std::span<const SpikeWindow> windows);

/// Saturating 18-bit signed accumulator.
class Accumulator18 {
 public:
  static constexpr std::int32_t kMax = (1 << 17) - 1;
  static constexpr std::int32_t kMin = -(1 << 17);

  void reset() { value_ = 0; saturated_ = false; }
  void add(std::int32_t v);
  std::int32_t value() const { return value_; }
  bool saturated() const { return saturated_; }

 private:
  std::int32_t value_ = 0;
  bool saturated_ = false;
};

struct CoreState {
  explicit CoreState(const CoreGeometry& geometry, std::uint16_t lfsr_seed = 0xACE1u);

  /// Clear registers and accumulators between samples; the LFSR keeps running.
  void reset_sample(std::size_t steps);

  std::size_t steps = 0;
  std::size_t t = 0;  // steps executed for the current sample
  std::vector<std::vector<std::uint8_t>> input_registers;  // per input, spikes latched so far
  std::vector<std::size_t> address_registers;
  std::vector<Accumulator18> accumulators;
  Lfsr lfsr;
};

struct StepResult {
  std::vector<std::uint8_t> spikes;        // per output
  std::vector<std::int32_t> accumulators;  // weight sum in weight-step units, pre-bias
  std::vector<std::int32_t> bias_codes;
  std::vector<double> potentials;          // real potential before the clip
  std::vector<std::int32_t> clipped;       // 1.4.3 codes
  std::vector<std::uint8_t> pwl;
  std::vector<std::size_t> wordlines;      // addresses read this step
};

/// One processor time step: latch `input_spikes` (spikes at step t), read the
/// active word lines, accumulate, clip, apply the PWL and sample each active
/// output with the shared LFSR in index order.
StepResult core_step(CoreState& state, const CoreMemoryImage& image, std::span<const std::uint8_t> input_spikes,
                     std::span<const std::int8_t> signs);

struct TraceStep {
  std::size_t step = 0;
  std::vector<std::size_t> wordlines;
};

struct AccessTrace {
  std::vector<TraceStep> steps;
  std::size_t total_reads() const;
};

struct CoreRun {
  FtsDecision decision;
  AccessTrace trace;
};

/// Iterate core_step until the first output spike or T steps.
CoreRun run_first_to_spike(CoreState& state, const CoreMemoryImage& image, const SpikeTrain& train);

/// Fraction of decisions with t_d <= t for t = 1..steps; no_spike is the
/// fraction decided by the fallback.
struct LatencyCdf {
  std::vector<double> cdf;
  double no_spike = 0.0;
  std::size_t count = 0;
};
LatencyCdf latency_cdf(std::span<const FtsDecision> decisions, std::size_t steps);

/// CSV columns: sample_id,step,wordlines_read,decided,class,t_d.
void write_trace_csv_header(std::ostream& out);
void write_trace_csv(std::ostream& out, std::size_t sample_id, const CoreRun& run);

}  // namespace spinaps
