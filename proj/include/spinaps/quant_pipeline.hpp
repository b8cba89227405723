#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "spinaps/fts_trainer.hpp"
#include "spinaps/glm_model.hpp"

namespace spinaps {

/// Widths of a fixed-point word: sign, integer and fraction bits.
struct FixedPointFormat {
  int sign_bits = 1;
  int int_bits = 4;
  int frac_bits = 3;

  int total_bits() const { return sign_bits + int_bits + frac_bits; }
  double resolution() const;
  /// Largest / smallest magnitude representable as sign-magnitude.
  double max_value() const;
  double min_value() const;
};

/// Membrane-potential format of the neuron datapath.
inline constexpr FixedPointFormat kPotentialFormat{1, 4, 3};

/// Saturation limits applied by the neuron before the PWL, in 1/8 units.
inline constexpr std::int32_t kPotentialMinCode = -64;  // -8.0
inline constexpr std::int32_t kPotentialMaxCode = 63;   // +7.875

/// Result of uniform post-training quantization of one tensor.
struct QuantizedTensor {
  std::vector<std::int32_t> codes;
  double step = 0.0;
  double min = 0.0;
  double max = 0.0;
  bool degenerate = false;  // max == min: all codes are 0 and step is 0

  double dequantize(std::size_t k) const { return static_cast<double>(codes[k]) * step; }
};

/// Round half away from zero.
std::int64_t round_away(double v);

/// Largest sign-magnitude code for b bits: 2^(b-1) - 1.
std::int32_t max_code(int bits);

/// step = (max - min) / 2^(b-1), code = clamp(round(v / step), +-(2^(b-1)-1)).
/// The range is taken from the values themselves, widened to include zero.
QuantizedTensor quantize_uniform(std::span<const double> values, int bits);
QuantizedTensor quantize_uniform(std::span<const double> values, int bits, double min, double max);

/// Weights and biases of a GlmModel in sign-magnitude b-bit codes.
struct QuantizedModel {
  int bits = 8;
  std::size_t n_inputs = 0;
  std::size_t n_outputs = 0;
  std::size_t presentation_time = 0;
  std::size_t window = 0;
  std::vector<std::int32_t> weight_codes;  // [n_inputs][n_outputs][window]
  std::vector<std::int32_t> bias_codes;    // [n_outputs]
  double weight_step = 0.0;
  double bias_step = 0.0;
  double weight_min = 0.0, weight_max = 0.0;
  double bias_min = 0.0, bias_max = 0.0;
  bool degenerate = false;

  std::size_t weight_index(std::size_t j, std::size_t i, std::size_t d) const {
    return (j * n_outputs + i) * window + d;
  }
  std::int32_t weight_code(std::size_t j, std::size_t i, std::size_t d) const {
    return weight_codes[weight_index(j, i, d)];
  }
  void validate() const;
  bool operator==(const QuantizedModel&) const = default;

  /// Float model carrying the dequantized parameters.
  GlmModel dequantized() const;
};

/// Quantize a trained model. Only the identity basis maps onto word lines.
QuantizedModel quantize_model(const GlmModel& model, int bits);

/// Saturate a real potential to [-8, +7.875] and round to 1/8 (ties away
/// from zero). Returns the code in 1/8 units.
std::int32_t clip_to_fixed(double u);
inline double fixed_to_double(std::int32_t code) { return static_cast<double>(code) / 8.0; }

/// Shift-and-add sigmoid: input code x = q / 8 in [-8, 7.875], output
/// floor(y * 256) capped at 255.
std::uint8_t pwl_sigmoid(std::int32_t q);

/// Same approximation for an input on a 2^-frac_bits grid and an output of
/// out_bits bits: floor(y * 2^out_bits) capped at 2^out_bits - 1.
std::uint32_t pwl_sigmoid_generic(std::int64_t q, int frac_bits, int out_bits);

/// 16-bit Fibonacci LFSR with taps 16, 14, 13, 11 (x^16 + x^14 + x^13 + x^11 + 1).
class Lfsr {
 public:
  static constexpr std::uint32_t kPeriod = 65535;

  explicit Lfsr(std::uint16_t seed = 0xACE1u);

  std::uint16_t state() const { return state_; }
  std::uint16_t next();  // advance once and return the new state

  bool operator==(const Lfsr&) const = default;

 private:
  std::uint16_t state_;
};

std::uint16_t lfsr_next(std::uint16_t state);

/// Compare the PWL output with the low 8 bits of the current state, then advance.
bool spike_decision(std::uint8_t pwl, Lfsr& lfsr);
/// b-bit variant: compare with the low `bits` bits.
bool spike_decision(std::uint32_t pwl, int bits, Lfsr& lfsr);

/// Potential after the b-bit datapath: the exact sum on the weight and bias
/// grids is clipped to [-8, 8) on a 2^-(b-5) grid. Returns the code and the
/// number of fraction bits of that grid (negative for b < 5).
struct QuantizedPotential {
  std::int64_t code;
  int frac_bits;
};
QuantizedPotential quantize_potential(double u, int bits);

/// First-to-spike inference with every quantity at b bits: weights and
/// biases from the quantized model, potential clipped to b bits, PWL output at
/// b bits, one LFSR draw per output per step in index order. At b = 8 this is
/// the core datapath.
FtsDecision infer_fts_quantized(const QuantizedModel& qm, const SpikeTrain& train, Lfsr& lfsr);

/// Exact potential sum in integer units for one output at one step:
/// weight_sum counts weight steps, bias_code counts bias steps.
struct PotentialParts {
  std::int64_t weight_sum = 0;
  std::int32_t bias_code = 0;
};
std::vector<PotentialParts> quantized_potential_parts(const QuantizedModel& qm, const SpikeTrain& train,
                                                      std::size_t t);

}  // namespace spinaps
