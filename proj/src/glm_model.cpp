#include "spinaps/glm_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace spinaps {

Basis::Basis(std::size_t tau, std::size_t n_basis, std::vector<std::uint8_t> bits)
    : tau_(tau), n_basis_(n_basis), bits_(std::move(bits)) {
  if (bits_.size() != tau_ * n_basis_) {
    throw DimensionError("basis: expected " + std::to_string(tau_ * n_basis_) + " entries, got " +
                         std::to_string(bits_.size()));
  }
  if (n_basis_ > tau_) throw DimensionError("basis: more basis vectors than window taps");
  for (auto b : bits_) {
    if (b > 1) throw std::domain_error("basis: entries must be binary");
  }
}

Basis Basis::identity(std::size_t tau) {
  std::vector<std::uint8_t> bits(tau * tau, 0);
  for (std::size_t d = 0; d < tau; ++d) bits[d * tau + d] = 1;
  return Basis(tau, tau, std::move(bits));
}

bool Basis::is_identity() const {
  if (tau_ != n_basis_) return false;
  for (std::size_t r = 0; r < tau_; ++r) {
    for (std::size_t c = 0; c < n_basis_; ++c) {
      if (at(r, c) != (r == c ? 1 : 0)) return false;
    }
  }
  return true;
}

GlmModel GlmModel::zeros(std::size_t n_inputs, std::size_t n_outputs, std::size_t presentation_time,
                         std::size_t window) {
  GlmModel m;
  m.n_inputs = n_inputs;
  m.n_outputs = n_outputs;
  m.presentation_time = presentation_time;
  m.window = window;
  m.basis = Basis::identity(window);
  m.weights.assign(n_inputs * n_outputs * window, 0.0);
  m.biases.assign(n_outputs, 0.0);
  return m;
}

void GlmModel::validate() const {
  if (basis.tau() != window) throw DimensionError("model: basis rows must equal the window length");
  if (weights.size() != n_inputs * n_outputs * n_basis()) throw DimensionError("model: weight tensor size");
  if (biases.size() != n_outputs) throw DimensionError("model: bias vector size");
  if (window == 0 || presentation_time == 0) throw DimensionError("model: T and tau must be positive");
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(weights.begin(), weights.end(), finite) ||
      !std::all_of(biases.begin(), biases.end(), finite)) {
    throw std::domain_error("model: non-finite parameter");
  }
}

SpikeTrain::SpikeTrain(std::size_t n_inputs, std::size_t steps)
    : n_inputs(n_inputs), steps(steps), raster(n_inputs * steps, 0), sign(n_inputs, 1) {}

bool SpikeWindow::empty() const {
  return std::none_of(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; });
}

SpikeTrain rate_encode(std::span<const double> x, std::size_t steps, Rng& rng) {
  SpikeTrain train(x.size(), steps);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double v = x[j];
    if (!std::isfinite(v)) throw EncodingError("rate_encode: non-finite input at channel " + std::to_string(j));
    const double p = std::abs(v);
    if (p > 1.0) throw EncodingError("rate_encode: |x| > 1 at channel " + std::to_string(j));
    train.sign[j] = v < 0.0 ? -1 : 1;
    // Draw even for p in {0,1} so the stream position depends only on the shape.
    for (std::size_t t = 0; t < steps; ++t) train.spike(j, t) = uniform(rng) < p ? 1 : 0;
  }
  return train;
}

SpikeWindow window_at(const SpikeTrain& train, std::size_t j, std::size_t t, std::size_t tau) {
  SpikeWindow w;
  w.bits.assign(tau, 0);
  for (std::size_t d = 1; d <= tau && d < t; ++d) {
    const std::size_t step = t - d;  // 1-based
    if (step <= train.steps) w.bits[d - 1] = train.spike(j, step - 1);
  }
  return w;
}

std::vector<double> expand_kernel(const Basis& basis, std::span<const double> w) {
  if (w.size() != basis.n_basis()) {
    throw DimensionError("expand_kernel: basis has " + std::to_string(basis.n_basis()) +
                         " columns, weight vector has " + std::to_string(w.size()));
  }
  std::vector<double> alpha(basis.tau(), 0.0);
  for (std::size_t d = 0; d < basis.tau(); ++d) {
    double acc = 0.0;
    for (std::size_t k = 0; k < basis.n_basis(); ++k) {
      if (basis.at(d, k)) acc += w[k];
    }
    alpha[d] = acc;
  }
  return alpha;
}

double membrane_potential(const GlmModel& model, std::span<const SpikeWindow> windows,
                          std::span<const std::int8_t> signs, std::size_t i) {
  if (windows.size() != model.n_inputs || signs.size() != model.n_inputs) {
    throw DimensionError("membrane_potential: one window and one sign per input required");
  }
  if (i >= model.n_outputs) throw DimensionError("membrane_potential: output index out of range");
  double u = 0.0;
  const std::size_t k = model.n_basis();
  for (std::size_t j = 0; j < model.n_inputs; ++j) {
    if (windows[j].bits.size() != model.window) throw DimensionError("membrane_potential: window length");
    if (windows[j].empty()) continue;
    const auto alpha = expand_kernel(model.basis, std::span(model.weights).subspan(model.weight_index(j, i, 0), k));
    double dot = 0.0;
    for (std::size_t d = 0; d < model.window; ++d) {
      if (windows[j].bits[d]) dot += alpha[d];
    }
    u += signs[j] < 0 ? -dot : dot;
  }
  return u + model.biases[i];
}

std::vector<double> membrane_potentials(const GlmModel& model, const SpikeTrain& train) {
  if (train.n_inputs != model.n_inputs) throw DimensionError("membrane_potentials: input count mismatch");
  const std::size_t steps = train.steps;
  const std::size_t tau = model.window;
  const std::size_t n_out = model.n_outputs;

  // alpha[j][i][d], expanded once.
  std::vector<double> alpha;
  const bool identity = model.basis.is_identity();
  if (!identity) {
    alpha.resize(model.n_inputs * n_out * tau);
    for (std::size_t j = 0; j < model.n_inputs; ++j) {
      for (std::size_t i = 0; i < n_out; ++i) {
        const auto a = expand_kernel(model.basis,
                                     std::span(model.weights).subspan(model.weight_index(j, i, 0), model.n_basis()));
        std::copy(a.begin(), a.end(), alpha.begin() + (j * n_out + i) * tau);
      }
    }
  }
  const std::vector<double>& taps = identity ? model.weights : alpha;

  std::vector<double> u(n_out * steps, 0.0);
  std::vector<double> acc(n_out);
  for (std::size_t t = 1; t <= steps; ++t) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t j = 0; j < model.n_inputs; ++j) {
      const double s = train.sign[j] < 0 ? -1.0 : 1.0;
      for (std::size_t d = 1; d <= tau && d < t; ++d) {
        if (!train.spike(j, t - d - 1)) continue;
        const double* row = taps.data() + j * n_out * tau + (d - 1);
        for (std::size_t i = 0; i < n_out; ++i) acc[i] += s * row[i * tau];
      }
    }
    for (std::size_t i = 0; i < n_out; ++i) u[i * steps + (t - 1)] = acc[i] + model.biases[i];
  }
  return u;
}

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

double log_sigmoid(double u) {
  // -softplus(-u)
  if (u >= 0.0) return -std::log1p(std::exp(-u));
  return u - std::log1p(std::exp(u));
}

double log_sigmoid_complement(double u) { return log_sigmoid(-u); }

}  // namespace spinaps
