#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace spinaps {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EncodingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Every random draw in the library goes through this engine so a single seed
/// reproduces a run.
using Rng = std::mt19937_64;

/// Binary basis matrix A of shape [tau][n_basis], stored row-major.
class Basis {
 public:
  Basis() = default;
  Basis(std::size_t tau, std::size_t n_basis, std::vector<std::uint8_t> bits);

  static Basis identity(std::size_t tau);

  std::size_t tau() const { return tau_; }
  std::size_t n_basis() const { return n_basis_; }
  std::uint8_t at(std::size_t tap, std::size_t k) const { return bits_[tap * n_basis_ + k]; }
  bool is_identity() const;

  bool operator==(const Basis&) const = default;

 private:
  std::size_t tau_ = 0;
  std::size_t n_basis_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Two-layer GLM network: stimulus weights w[j][i][k] over the basis, biases
/// gamma[i]. The feedback path is not modelled.
struct GlmModel {
  std::size_t n_inputs = 0;
  std::size_t n_outputs = 0;
  std::size_t presentation_time = 0;  // T
  std::size_t window = 0;             // tau
  Basis basis;
  std::vector<double> weights;  // [n_inputs][n_outputs][n_basis]
  std::vector<double> biases;   // [n_outputs]

  static GlmModel zeros(std::size_t n_inputs, std::size_t n_outputs, std::size_t presentation_time,
                        std::size_t window);

  std::size_t n_basis() const { return basis.n_basis(); }
  std::size_t weight_index(std::size_t j, std::size_t i, std::size_t k) const {
    return (j * n_outputs + i) * n_basis() + k;
  }
  double& weight(std::size_t j, std::size_t i, std::size_t k) { return weights[weight_index(j, i, k)]; }
  double weight(std::size_t j, std::size_t i, std::size_t k) const { return weights[weight_index(j, i, k)]; }

  /// Throws DimensionError or std::domain_error when an invariant is broken.
  void validate() const;

  bool operator==(const GlmModel&) const = default;
};

/// N_X x T raster plus a sign per input channel.
struct SpikeTrain {
  std::size_t n_inputs = 0;
  std::size_t steps = 0;
  std::vector<std::uint8_t> raster;  // [n_inputs][steps]
  std::vector<std::int8_t> sign;     // [n_inputs], +1 or -1

  SpikeTrain() = default;
  SpikeTrain(std::size_t n_inputs, std::size_t steps);

  std::uint8_t spike(std::size_t j, std::size_t t) const { return raster[j * steps + t]; }
  std::uint8_t& spike(std::size_t j, std::size_t t) { return raster[j * steps + t]; }

  bool operator==(const SpikeTrain&) const = default;
};

/// Input window for one channel at one step. bits[0] is the spike at t-1,
/// bits[tau-1] the spike at t-tau.
struct SpikeWindow {
  std::vector<std::uint8_t> bits;

  bool empty() const;
};

/// Bernoulli rate encoding of magnitudes in [0,1]; the sign of each entry is
/// carried separately. Throws EncodingError on non-finite or |x| > 1.
SpikeTrain rate_encode(std::span<const double> x, std::size_t steps, Rng& rng);

/// Window of `train` channel j as seen at 1-based step t.
SpikeWindow window_at(const SpikeTrain& train, std::size_t j, std::size_t t, std::size_t tau);

/// alpha = A w.
std::vector<double> expand_kernel(const Basis& basis, std::span<const double> w);

/// u_{i,t} = sum_j sign_j * alpha_{j,i} . window_j + gamma_i
double membrane_potential(const GlmModel& model, std::span<const SpikeWindow> windows,
                          std::span<const std::int8_t> signs, std::size_t i);

/// Membrane potentials of every output at every step, shape [n_outputs][steps].
std::vector<double> membrane_potentials(const GlmModel& model, const SpikeTrain& train);

double sigmoid(double u);
double log_sigmoid(double u);  // log g(u)
double log_sigmoid_complement(double u);  // log (1 - g(u))

}  // namespace spinaps
