#include "spinaps/core_sim.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>

#include "binary_io.hpp"

namespace spinaps {

namespace {

constexpr char kImageMagic[8] = {'S', 'P', 'N', 'I', 'M', 'G', '\0', '\0'};
constexpr std::uint32_t kImageVersion = 1;

}  // namespace

CoreGeometry CoreGeometry::for_model(const QuantizedModel& qm) {
  return CoreGeometry{qm.n_inputs, qm.n_outputs, qm.window, qm.bits};
}

CoreMemoryImage::CoreMemoryImage(CoreGeometry geometry, std::size_t active_outputs, double weight_step,
                                 double bias_step)
    : geometry_(geometry),
      active_outputs_(active_outputs),
      weight_step_(weight_step),
      bias_step_(bias_step),
      words_per_row_((geometry.word_width() + 63) / 64),
      bits_(geometry.array_rows() * words_per_row_, 0) {
  if (geometry.bits < 1 || geometry.bits > 16) throw GeometryError("core geometry: bits must be in [1, 16]");
  if (active_outputs > geometry.n_outputs) throw GeometryError("core geometry: more active outputs than columns");
}

bool CoreMemoryImage::bit(std::size_t row, std::size_t col) const {
  return (bits_[row * words_per_row_ + col / 64] >> (col % 64)) & 1u;
}

void CoreMemoryImage::set_bit(std::size_t row, std::size_t col, bool value) {
  auto& w = bits_[row * words_per_row_ + col / 64];
  const std::uint64_t mask = std::uint64_t{1} << (col % 64);
  w = value ? (w | mask) : (w & ~mask);
}

std::span<const std::uint64_t> CoreMemoryImage::row(std::size_t r) const {
  return std::span(bits_).subspan(r * words_per_row_, words_per_row_);
}

// Field of output i: bits [i*b, i*b + b). Magnitude in the low b-1 bits, sign on top.
std::int32_t CoreMemoryImage::read_code(std::size_t row, std::size_t output) const {
  const int b = geometry_.bits;
  const std::size_t base = output * static_cast<std::size_t>(b);
  std::int32_t mag = 0;
  for (int k = 0; k < b - 1; ++k) mag |= static_cast<std::int32_t>(bit(row, base + k)) << k;
  return bit(row, base + b - 1) ? -mag : mag;
}

void CoreMemoryImage::write_code(std::size_t row, std::size_t output, std::int32_t code) {
  const int b = geometry_.bits;
  const std::int32_t limit = max_code(b);
  if (code > limit || code < -limit) {
    throw std::out_of_range("code " + std::to_string(code) + " does not fit " + std::to_string(b) + " bits");
  }
  const std::size_t base = output * static_cast<std::size_t>(b);
  const std::int32_t mag = code < 0 ? -code : code;
  for (int k = 0; k < b - 1; ++k) set_bit(row, base + k, (mag >> k) & 1);
  set_bit(row, base + b - 1, code < 0);
}

void CoreMemoryImage::decode_row(std::size_t row, std::span<std::int32_t> out) const {
  const int b = geometry_.bits;
  const auto words = this->row(row);
  const std::uint64_t mag_mask = (std::uint64_t{1} << (b - 1)) - 1;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t base = i * static_cast<std::size_t>(b);
    const std::size_t w = base / 64;
    const std::size_t off = base % 64;
    std::uint64_t field = words[w] >> off;
    if (off + b > 64) field |= words[w + 1] << (64 - off);
    const auto mag = static_cast<std::int32_t>(field & mag_mask);
    out[i] = (field >> (b - 1)) & 1u ? -mag : mag;
  }
}

void CoreMemoryImage::write(std::ostream& out) const {
  std::string buf;
  detail::ByteWriter w(buf);
  w.bytes(kImageMagic, sizeof kImageMagic);
  w.u32(kImageVersion);
  w.u32(static_cast<std::uint32_t>(geometry_.n_inputs));
  w.u32(static_cast<std::uint32_t>(geometry_.n_outputs));
  w.u32(static_cast<std::uint32_t>(geometry_.window));
  w.u32(static_cast<std::uint32_t>(geometry_.bits));
  w.u32(static_cast<std::uint32_t>(active_outputs_));
  w.u32(static_cast<std::uint32_t>(rows()));
  w.u32(static_cast<std::uint32_t>(geometry_.word_width()));
  w.f64(weight_step_);
  w.f64(bias_step_);
  const std::size_t row_bytes = (geometry_.word_width() + 7) / 8;
  for (std::size_t r = 0; r < rows(); ++r) {
    const auto words = row(r);
    for (std::size_t k = 0; k < row_bytes; ++k) w.u8(static_cast<std::uint8_t>(words[k / 8] >> (8 * (k % 8))));
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

CoreMemoryImage CoreMemoryImage::read(std::istream& in) {
  const std::string buf = detail::slurp(in);
  detail::ByteReader r(buf);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (!std::equal(magic, magic + 8, kImageMagic)) throw std::runtime_error("memory image: bad magic");
  if (const auto v = r.u32(); v != kImageVersion) {
    throw std::runtime_error("memory image: unsupported version " + std::to_string(v));
  }
  CoreGeometry g;
  g.n_inputs = r.u32();
  g.n_outputs = r.u32();
  g.window = r.u32();
  g.bits = static_cast<int>(r.u32());
  const std::size_t active = r.u32();
  const std::size_t rows = r.u32();
  const std::size_t width = r.u32();
  if (rows != g.array_rows() || width != g.word_width()) throw std::runtime_error("memory image: inconsistent header");
  const double ws = r.f64();
  const double bs = r.f64();
  CoreMemoryImage image(g, active, ws, bs);
  const std::size_t row_bytes = (width + 7) / 8;
  for (std::size_t row = 0; row < rows; ++row) {
    for (std::size_t k = 0; k < row_bytes; ++k) {
      image.bits_[row * image.words_per_row_ + k / 8] |= std::uint64_t{r.u8()} << (8 * (k % 8));
    }
  }
  if (r.remaining() != 0) throw std::runtime_error("memory image: trailing bytes");
  return image;
}

CoreMemoryImage map_model_to_memory(const QuantizedModel& qm, const CoreGeometry& geometry) {
  qm.validate();
  if (qm.bits != geometry.bits) {
    throw GeometryError("map_model_to_memory: model has " + std::to_string(qm.bits) + "-bit codes, core stores " +
                        std::to_string(geometry.bits));
  }
  if (qm.window != geometry.window) {
    throw GeometryError("map_model_to_memory: model window " + std::to_string(qm.window) + " != core window " +
                        std::to_string(geometry.window));
  }
  if (qm.n_inputs > geometry.n_inputs || qm.n_outputs > geometry.n_outputs) {
    throw GeometryError("map_model_to_memory: model " + std::to_string(qm.n_inputs) + "x" +
                        std::to_string(qm.n_outputs) + " does not fit a " + std::to_string(geometry.n_inputs) + "x" +
                        std::to_string(geometry.n_outputs) + " core");
  }
  if (qm.window != geometry.window) throw GeometryError("map_model_to_memory: window length mismatch");

  CoreMemoryImage image(geometry, qm.n_outputs, qm.weight_step, qm.bias_step);
  for (std::size_t j = 0; j < qm.n_inputs; ++j) {
    for (std::size_t d = 0; d < qm.window; ++d) {
      const std::size_t line = geometry.kernel_line(j, d);
      for (std::size_t i = 0; i < qm.n_outputs; ++i) image.write_code(line, i, qm.weight_code(j, i, d));
    }
  }
  for (std::size_t i = 0; i < qm.n_outputs; ++i) image.write_code(geometry.bias_line(), i, qm.bias_codes[i]);
  return image;
}

QuantizedModel unpack_memory(const CoreMemoryImage& image, std::size_t n_inputs, std::size_t presentation_time) {
  const auto& g = image.geometry();
  if (n_inputs > g.n_inputs) throw GeometryError("unpack_memory: more inputs than the core holds");
  QuantizedModel qm;
  qm.bits = g.bits;
  qm.n_inputs = n_inputs;
  qm.n_outputs = image.active_outputs();
  qm.window = g.window;
  qm.presentation_time = presentation_time;
  qm.weight_step = image.weight_step();
  qm.bias_step = image.bias_step();
  qm.weight_codes.assign(qm.n_inputs * qm.n_outputs * qm.window, 0);
  qm.bias_codes.assign(qm.n_outputs, 0);
  std::vector<std::int32_t> row(g.n_outputs);
  for (std::size_t j = 0; j < n_inputs; ++j) {
    for (std::size_t d = 0; d < g.window; ++d) {
      image.decode_row(g.kernel_line(j, d), row);
      for (std::size_t i = 0; i < qm.n_outputs; ++i) qm.weight_codes[qm.weight_index(j, i, d)] = row[i];
    }
  }
  image.decode_row(g.bias_line(), row);
  std::copy_n(row.begin(), qm.n_outputs, qm.bias_codes.begin());
  return qm;
}

SpikeWindow spike_window(std::span<const std::uint8_t> seen, std::size_t t, std::size_t tau) {
  SpikeWindow w;
  w.bits.assign(tau, 0);
  for (std::size_t d = 1; d <= tau && d < t; ++d) {
    const std::size_t step = t - d;  // 1-based
    if (step <= seen.size()) w.bits[d - 1] = seen[step - 1] ? 1 : 0;
  }
  return w;
}

std::vector<std::size_t> gather_active_wordlines(const CoreGeometry& geometry, std::span<const SpikeWindow> windows) {
  if (windows.size() > geometry.n_inputs) throw GeometryError("gather_active_wordlines: too many inputs");
  std::vector<std::size_t> lines;
  for (std::size_t j = 0; j < windows.size(); ++j) {
    if (windows[j].bits.size() != geometry.window) throw GeometryError("gather_active_wordlines: window length");
    for (std::size_t d = 0; d < geometry.window; ++d) {
      if (windows[j].bits[d]) lines.push_back(geometry.kernel_line(j, d));
    }
  }
  lines.push_back(geometry.bias_line());
  return lines;
}

void Accumulator18::add(std::int32_t v) {
  const std::int64_t sum = std::int64_t{value_} + v;
  if (sum > kMax) {
    value_ = kMax;
    saturated_ = true;
  } else if (sum < kMin) {
    value_ = kMin;
    saturated_ = true;
  } else {
    value_ = static_cast<std::int32_t>(sum);
  }
}

CoreState::CoreState(const CoreGeometry& geometry, std::uint16_t lfsr_seed)
    : input_registers(geometry.n_inputs), accumulators(geometry.n_outputs), lfsr(lfsr_seed) {}

void CoreState::reset_sample(std::size_t n_steps) {
  steps = n_steps;
  t = 0;
  for (auto& reg : input_registers) {
    reg.clear();
    reg.reserve(n_steps);
  }
  address_registers.clear();
  for (auto& a : accumulators) a.reset();
}

StepResult core_step(CoreState& state, const CoreMemoryImage& image, std::span<const std::uint8_t> input_spikes,
                     std::span<const std::int8_t> signs) {
  const auto& g = image.geometry();
  const std::size_t n_in = input_spikes.size();
  if (n_in > g.n_inputs || signs.size() != n_in) throw GeometryError("core_step: input width mismatch");
  if (state.input_registers.size() != g.n_inputs || state.accumulators.size() != g.n_outputs) {
    throw GeometryError("core_step: state built for a different geometry");
  }

  state.t += 1;
  const std::size_t t = state.t;
  std::vector<SpikeWindow> windows(n_in);
  for (std::size_t j = 0; j < n_in; ++j) {
    state.input_registers[j].push_back(input_spikes[j] ? 1 : 0);
    windows[j] = spike_window(state.input_registers[j], t, g.window);
  }
  state.address_registers = gather_active_wordlines(g, windows);

  const std::size_t n_out = image.active_outputs();
  for (auto& a : state.accumulators) a.reset();
  std::vector<std::int32_t> codes(g.n_outputs);
  StepResult result;
  for (const std::size_t line : state.address_registers) {
    image.decode_row(line, codes);
    if (line == g.bias_line()) {
      result.bias_codes.assign(codes.begin(), codes.begin() + static_cast<std::ptrdiff_t>(n_out));
      continue;
    }
    const bool flip = signs[line / g.window] < 0;
    for (std::size_t i = 0; i < n_out; ++i) state.accumulators[i].add(flip ? -codes[i] : codes[i]);
  }

  result.wordlines = state.address_registers;
  result.accumulators.resize(n_out);
  result.potentials.resize(n_out);
  result.clipped.resize(n_out);
  result.pwl.resize(n_out);
  result.spikes.assign(n_out, 0);
  for (std::size_t i = 0; i < n_out; ++i) {
    result.accumulators[i] = state.accumulators[i].value();
    result.potentials[i] = static_cast<double>(result.accumulators[i]) * image.weight_step() +
                           static_cast<double>(result.bias_codes[i]) * image.bias_step();
    result.clipped[i] = clip_to_fixed(result.potentials[i]);
    result.pwl[i] = pwl_sigmoid(result.clipped[i]);
    result.spikes[i] = spike_decision(result.pwl[i], state.lfsr) ? 1 : 0;
  }
  return result;
}

std::size_t AccessTrace::total_reads() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.wordlines.size();
  return n;
}

CoreRun run_first_to_spike(CoreState& state, const CoreMemoryImage& image, const SpikeTrain& train) {
  const auto& g = image.geometry();
  if (g.bits != 8) throw GeometryError("run_first_to_spike: the core datapath is 8-bit");
  if (train.n_inputs > g.n_inputs) throw GeometryError("run_first_to_spike: spike train wider than the core");
  state.reset_sample(train.steps);

  CoreRun run;
  std::vector<std::uint8_t> column(train.n_inputs);
  std::vector<double> last;
  for (std::size_t t = 0; t < train.steps; ++t) {
    for (std::size_t j = 0; j < train.n_inputs; ++j) column[j] = train.spike(j, t);
    auto step = core_step(state, image, column, train.sign);
    run.trace.steps.push_back(TraceStep{t + 1, std::move(step.wordlines)});
    const auto first = std::find(step.spikes.begin(), step.spikes.end(), 1);
    if (first != step.spikes.end()) {
      run.decision = FtsDecision{static_cast<std::size_t>(first - step.spikes.begin()), t + 1, false};
      return run;
    }
    last.assign(step.clipped.begin(), step.clipped.end());
  }
  run.decision = FtsDecision{last.empty() ? 0 : argmax_lowest(last), FtsDecision::kNoSpike, true};
  return run;
}

LatencyCdf latency_cdf(std::span<const FtsDecision> decisions, std::size_t steps) {
  if (decisions.empty()) throw std::invalid_argument("latency_cdf: no decisions");
  LatencyCdf out;
  out.count = decisions.size();
  std::vector<std::size_t> hist(steps + 1, 0);
  std::size_t none = 0;
  for (const auto& d : decisions) {
    if (!d.spiked()) {
      ++none;
    } else if (d.decision_time >= 1 && d.decision_time <= steps) {
      ++hist[d.decision_time];
    } else {
      throw std::out_of_range("latency_cdf: decision time beyond T");
    }
  }
  out.cdf.resize(steps);
  std::size_t running = 0;
  const auto n = static_cast<double>(decisions.size());
  for (std::size_t t = 1; t <= steps; ++t) {
    running += hist[t];
    out.cdf[t - 1] = static_cast<double>(running) / n;
  }
  out.no_spike = static_cast<double>(none) / n;
  return out;
}

void write_trace_csv_header(std::ostream& out) { out << "sample_id,step,wordlines_read,decided,class,t_d\n"; }

void write_trace_csv(std::ostream& out, std::size_t sample_id, const CoreRun& run) {
  const auto& d = run.decision;
  for (std::size_t k = 0; k < run.trace.steps.size(); ++k) {
    const auto& s = run.trace.steps[k];
    const bool last = k + 1 == run.trace.steps.size();
    const bool decided = last && d.spiked();
    out << sample_id << ',' << s.step << ',' << s.wordlines.size() << ',' << (decided ? 1 : 0) << ',';
    if (last) {
      out << d.predicted_class << ',';
      if (d.spiked()) {
        out << d.decision_time;
      } else {
        out << "none";
      }
    } else {
      out << ',';
    }
    out << '\n';
  }
}

}  // namespace spinaps
