#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "spinaps/glm_model.hpp"

namespace spinaps {

class TrainingDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  std::size_t epochs = 200;
  double learning_rate = 0.3;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  std::size_t presentation_time = 8;  // T
  std::size_t window = 8;             // tau
  double init_scale = 0.01;

  void validate() const;
};

/// Outcome of first-to-spike inference. decision_time is 1-based; kNoSpike
/// marks samples where no output fired within T and the fallback decided.
struct FtsDecision {
  static constexpr std::size_t kNoSpike = std::numeric_limits<std::size_t>::max();

  std::size_t predicted_class = 0;
  std::size_t decision_time = kNoSpike;
  bool fallback_used = false;

  bool spiked() const { return decision_time != kNoSpike; }
  bool operator==(const FtsDecision&) const = default;
};

/// Row-major view of membrane potentials [n_outputs][steps].
struct PotentialView {
  std::span<const double> u;
  std::size_t n_outputs;
  std::size_t steps;

  double at(std::size_t i, std::size_t t) const { return u[i * steps + t]; }  // t 0-based
};

/// log p_t: labelled neuron c fires first at step t (1-based) and nobody fired
/// earlier.
double fts_log_prob(const PotentialView& u, std::size_t c, std::size_t t);

/// log sum_{t=1..T} p_t.
double fts_objective(const GlmModel& model, const SpikeTrain& train, std::size_t c);
double fts_objective(const PotentialView& u, std::size_t c);

struct Gradient {
  std::vector<double> weights;  // same layout as GlmModel::weights
  std::vector<double> biases;

  static Gradient zeros_like(const GlmModel& model);
  void add_scaled(const Gradient& other, double scale);
};

/// dL/du for every potential; same layout as the PotentialView.
std::vector<double> fts_potential_gradient(const PotentialView& u, std::size_t c);

/// Exact gradient of fts_objective with respect to (w, gamma). Returns the
/// objective value through `objective` when non-null.
Gradient fts_gradient(const GlmModel& model, const SpikeTrain& train, std::size_t c, double* objective = nullptr);

/// Sample outputs as Bernoulli(g(u)) step by step and stop at the first spike.
FtsDecision infer_fts_float(const GlmModel& model, const SpikeTrain& train, Rng& rng);

/// Lowest-index argmax, used as the no-spike fallback.
std::size_t argmax_lowest(std::span<const double> values);

/// Normalized samples as consumed by the trainer: magnitudes in [0,1] with sign.
struct LabelledSet {
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
  std::vector<double> features;  // [n_samples][n_features]
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> sample(std::size_t s) const {
    return std::span(features).subspan(s * n_features, n_features);
  }
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double mean_loss = 0.0;  // mean of -L over the epoch's training samples
};

struct TrainResult {
  GlmModel model;
  std::vector<EpochMetrics> history;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Minibatch stochastic gradient ascent on fts_objective with fresh Bernoulli
/// encodings every epoch. Throws TrainingDivergence on a non-finite loss.
TrainResult train(const LabelledSet& train_set, const LabelledSet& test_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Accuracy of stochastic first-to-spike inference, one encoding per sample.
double evaluate_fts(const GlmModel& model, const LabelledSet& set, std::size_t steps, Rng& rng);

void write_metrics_csv(std::ostream& out, std::span<const EpochMetrics> history);

}  // namespace spinaps
