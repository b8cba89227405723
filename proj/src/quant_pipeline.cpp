#include "spinaps/quant_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace spinaps {

double FixedPointFormat::resolution() const { return std::ldexp(1.0, -frac_bits); }

double FixedPointFormat::max_value() const {
  return std::ldexp(1.0, int_bits) - resolution();
}

double FixedPointFormat::min_value() const { return sign_bits ? -max_value() : 0.0; }

std::int64_t round_away(double v) {
  return static_cast<std::int64_t>(v < 0.0 ? -std::floor(-v + 0.5) : std::floor(v + 0.5));
}

std::int32_t max_code(int bits) {
  if (bits < 1 || bits > 16) throw std::invalid_argument("bit width must be in [1, 16]");
  return (std::int32_t{1} << (bits - 1)) - 1;
}

QuantizedTensor quantize_uniform(std::span<const double> values, int bits) {
  if (values.empty()) return quantize_uniform(values, bits, 0.0, 0.0);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  // A sign-magnitude code reaches about +-(max - min) only when the range
  // contains zero; a one-sided range would saturate every value.
  return quantize_uniform(values, bits, std::min(*lo, 0.0), std::max(*hi, 0.0));
}

QuantizedTensor quantize_uniform(std::span<const double> values, int bits, double min, double max) {
  const std::int32_t limit = max_code(bits);
  if (!std::isfinite(min) || !std::isfinite(max) || max < min) {
    throw std::invalid_argument("quantize_uniform: invalid range");
  }
  QuantizedTensor q;
  q.min = min;
  q.max = max;
  q.codes.assign(values.size(), 0);
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("quantize_uniform: non-finite value");
  }
  if (max == min || limit == 0) {
    q.degenerate = true;
    q.step = max == min ? 0.0 : (max - min);
    return q;
  }
  q.step = (max - min) / std::ldexp(1.0, bits - 1);
  for (std::size_t k = 0; k < values.size(); ++k) {
    const std::int64_t c = round_away(values[k] / q.step);
    q.codes[k] = static_cast<std::int32_t>(std::clamp<std::int64_t>(c, -limit, limit));
  }
  return q;
}

void QuantizedModel::validate() const {
  const std::int32_t limit = max_code(bits);
  if (weight_codes.size() != n_inputs * n_outputs * window) throw DimensionError("quantized model: weight codes size");
  if (bias_codes.size() != n_outputs) throw DimensionError("quantized model: bias codes size");
  auto in_range = [limit](std::int32_t c) { return c >= -limit && c <= limit; };
  if (!std::all_of(weight_codes.begin(), weight_codes.end(), in_range) ||
      !std::all_of(bias_codes.begin(), bias_codes.end(), in_range)) {
    throw std::domain_error("quantized model: code exceeds " + std::to_string(bits) + "-bit sign-magnitude range");
  }
}

GlmModel QuantizedModel::dequantized() const {
  GlmModel m = GlmModel::zeros(n_inputs, n_outputs, presentation_time, window);
  for (std::size_t k = 0; k < weight_codes.size(); ++k) m.weights[k] = weight_codes[k] * weight_step;
  for (std::size_t k = 0; k < bias_codes.size(); ++k) m.biases[k] = bias_codes[k] * bias_step;
  return m;
}

QuantizedModel quantize_model(const GlmModel& model, int bits) {
  model.validate();
  if (!model.basis.is_identity()) {
    throw std::invalid_argument("quantize_model: only identity-basis models map one weight per word line");
  }
  const auto w = quantize_uniform(model.weights, bits);
  const auto g = quantize_uniform(model.biases, bits);
  QuantizedModel qm;
  qm.bits = bits;
  qm.n_inputs = model.n_inputs;
  qm.n_outputs = model.n_outputs;
  qm.presentation_time = model.presentation_time;
  qm.window = model.window;
  qm.weight_codes = w.codes;
  qm.bias_codes = g.codes;
  qm.weight_step = w.step;
  qm.bias_step = g.step;
  qm.weight_min = w.min;
  qm.weight_max = w.max;
  qm.bias_min = g.min;
  qm.bias_max = g.max;
  qm.degenerate = w.degenerate || g.degenerate;
  return qm;
}

std::int32_t clip_to_fixed(double u) {
  if (std::isnan(u)) return 0;
  if (u >= 8.0) return kPotentialMaxCode;
  if (u <= -8.0) return kPotentialMinCode;
  return static_cast<std::int32_t>(std::clamp<std::int64_t>(round_away(u * 8.0), kPotentialMinCode,
                                                            kPotentialMaxCode));
}

std::uint32_t pwl_sigmoid_generic(std::int64_t q, int frac_bits, int out_bits) {
  if (frac_bits < 0 || frac_bits > 16 || out_bits < 1 || out_bits > 16) {
    throw std::invalid_argument("pwl_sigmoid: unsupported widths");
  }
  const std::uint64_t mag = static_cast<std::uint64_t>(q < 0 ? -q : q);
  const std::uint64_t n = mag >> frac_bits;                        // integer part
  const std::uint64_t f = mag & ((std::uint64_t{1} << frac_bits) - 1);  // fraction, in 2^-F
  // y(-|x|) = (1/2 - f/2^(F+2)) / 2^n = (2^(F+1) - f) / 2^(F+2+n)
  const std::uint64_t num = ((std::uint64_t{1} << (frac_bits + 1)) - f) << out_bits;
  const std::uint64_t shift = static_cast<std::uint64_t>(frac_bits + 2) + n;
  const std::uint32_t full = std::uint32_t{1} << out_bits;
  std::uint64_t low_floor = 0, low_ceil = 0;
  if (shift < 63) {
    low_floor = num >> shift;
    low_ceil = (num + (std::uint64_t{1} << shift) - 1) >> shift;
  } else {
    low_ceil = num ? 1 : 0;
  }
  if (q <= 0) return std::min<std::uint32_t>(static_cast<std::uint32_t>(low_floor), full - 1);
  // y(x) = 1 - y(-x); floor(2^B - v) = 2^B - ceil(v)
  return std::min<std::uint32_t>(full - static_cast<std::uint32_t>(low_ceil), full - 1);
}

std::uint8_t pwl_sigmoid(std::int32_t q) {
  q = std::clamp(q, kPotentialMinCode, kPotentialMaxCode);
  return static_cast<std::uint8_t>(pwl_sigmoid_generic(q, 3, 8));
}

std::uint16_t lfsr_next(std::uint16_t s) {
  const std::uint16_t bit = ((s >> 0) ^ (s >> 2) ^ (s >> 3) ^ (s >> 5)) & 1u;
  return static_cast<std::uint16_t>((s >> 1) | (bit << 15));
}

Lfsr::Lfsr(std::uint16_t seed) : state_(seed) {
  if (seed == 0) throw std::invalid_argument("LFSR seed must be nonzero");
}

std::uint16_t Lfsr::next() {
  state_ = lfsr_next(state_);
  return state_;
}

bool spike_decision(std::uint8_t pwl, Lfsr& lfsr) {
  const bool spike = pwl > (lfsr.state() & 0xFFu);
  lfsr.next();
  return spike;
}

bool spike_decision(std::uint32_t pwl, int bits, Lfsr& lfsr) {
  const std::uint32_t mask = (std::uint32_t{1} << bits) - 1;
  const bool spike = pwl > (lfsr.state() & mask);
  lfsr.next();
  return spike;
}

QuantizedPotential quantize_potential(double u, int bits) {
  const int frac = bits - 5;
  std::int64_t lo, hi;
  double scaled;
  if (frac >= 0) {
    lo = -(std::int64_t{8} << frac);
    hi = (std::int64_t{8} << frac) - 1;
    scaled = std::ldexp(u, frac);
  } else {
    const std::int64_t span = std::int64_t{8} >> (-frac);
    lo = -std::max<std::int64_t>(1, span);
    hi = std::max<std::int64_t>(0, span - 1);
    scaled = std::ldexp(u, frac);
  }
  if (std::isnan(scaled)) scaled = 0.0;
  scaled = std::clamp(scaled, static_cast<double>(lo) - 1.0, static_cast<double>(hi) + 1.0);
  return {std::clamp(round_away(scaled), lo, hi), frac};
}

std::vector<PotentialParts> quantized_potential_parts(const QuantizedModel& qm, const SpikeTrain& train,
                                                      std::size_t t) {
  std::vector<PotentialParts> parts(qm.n_outputs);
  for (std::size_t i = 0; i < qm.n_outputs; ++i) parts[i].bias_code = qm.bias_codes[i];
  for (std::size_t j = 0; j < qm.n_inputs; ++j) {
    const std::int64_t s = train.sign[j] < 0 ? -1 : 1;
    for (std::size_t d = 1; d <= qm.window && d < t; ++d) {
      if (!train.spike(j, t - d - 1)) continue;
      for (std::size_t i = 0; i < qm.n_outputs; ++i) parts[i].weight_sum += s * qm.weight_code(j, i, d - 1);
    }
  }
  return parts;
}

FtsDecision infer_fts_quantized(const QuantizedModel& qm, const SpikeTrain& train, Lfsr& lfsr) {
  if (train.n_inputs != qm.n_inputs) throw DimensionError("infer_fts_quantized: input count mismatch");
  const int bits = qm.bits;
  std::vector<double> last(qm.n_outputs, 0.0);
  for (std::size_t t = 1; t <= train.steps; ++t) {
    const auto parts = quantized_potential_parts(qm, train, t);
    std::size_t winner = FtsDecision::kNoSpike;
    for (std::size_t i = 0; i < qm.n_outputs; ++i) {
      const double u = static_cast<double>(parts[i].weight_sum) * qm.weight_step +
                       static_cast<double>(parts[i].bias_code) * qm.bias_step;
      const auto pot = quantize_potential(u, bits);
      const std::int64_t q = pot.frac_bits >= 0 ? pot.code : pot.code * (std::int64_t{1} << -pot.frac_bits);
      const std::uint32_t y = pwl_sigmoid_generic(q, std::max(pot.frac_bits, 0), bits);
      last[i] = std::ldexp(static_cast<double>(pot.code), -pot.frac_bits);
      if (spike_decision(y, bits, lfsr) && winner == FtsDecision::kNoSpike) winner = i;
    }
    if (winner != FtsDecision::kNoSpike) return FtsDecision{winner, t, false};
  }
  return FtsDecision{argmax_lowest(last), FtsDecision::kNoSpike, true};
}

}  // namespace spinaps
