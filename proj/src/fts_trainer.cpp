#include "spinaps/fts_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

namespace spinaps {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_label(const PotentialView& u, std::size_t c) {
  if (c >= u.n_outputs) {
    throw std::out_of_range("label " + std::to_string(c) + " out of range for " + std::to_string(u.n_outputs) +
                            " outputs");
  }
}

// log p_t for t = 1..steps, computed with running sums.
std::vector<double> all_log_probs(const PotentialView& u, std::size_t c) {
  std::vector<double> out(u.steps);
  double silent = 0.0;  // log-probability that nobody fired in steps < t
  for (std::size_t t = 0; t < u.steps; ++t) {
    double others = 0.0;
    for (std::size_t i = 0; i < u.n_outputs; ++i) {
      if (i != c) others += log_sigmoid_complement(u.at(i, t));
    }
    out[t] = silent + others + log_sigmoid(u.at(c, t));
    silent += others + log_sigmoid_complement(u.at(c, t));
  }
  return out;
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

Rng derived_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("train config: learning_rate must be finite and non-negative");
  }
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (window < 1 || presentation_time < window) throw std::invalid_argument("train config: need T >= tau >= 1");
}

double fts_log_prob(const PotentialView& u, std::size_t c, std::size_t t) {
  check_label(u, c);
  if (t < 1 || t > u.steps) throw std::out_of_range("fts_log_prob: step " + std::to_string(t) + " out of range");
  double lp = log_sigmoid(u.at(c, t - 1));
  for (std::size_t tp = 0; tp < t; ++tp) {
    for (std::size_t i = 0; i < u.n_outputs; ++i) {
      if (i != c) lp += log_sigmoid_complement(u.at(i, tp));
    }
    if (tp + 1 < t) lp += log_sigmoid_complement(u.at(c, tp));
  }
  return lp;
}

double fts_objective(const PotentialView& u, std::size_t c) {
  check_label(u, c);
  const auto lp = all_log_probs(u, c);
  return log_sum_exp(lp);
}

double fts_objective(const GlmModel& model, const SpikeTrain& train, std::size_t c) {
  const auto u = membrane_potentials(model, train);
  return fts_objective(PotentialView{u, model.n_outputs, train.steps}, c);
}

Gradient Gradient::zeros_like(const GlmModel& model) {
  return Gradient{std::vector<double>(model.weights.size(), 0.0), std::vector<double>(model.biases.size(), 0.0)};
}

void Gradient::add_scaled(const Gradient& other, double scale) {
  for (std::size_t k = 0; k < weights.size(); ++k) weights[k] += scale * other.weights[k];
  for (std::size_t k = 0; k < biases.size(); ++k) biases[k] += scale * other.biases[k];
}

std::vector<double> fts_potential_gradient(const PotentialView& u, std::size_t c) {
  check_label(u, c);
  std::vector<double> grad(u.n_outputs * u.steps, 0.0);
  const auto lp = all_log_probs(u, c);
  const double total = log_sum_exp(lp);
  if (total == kNegInf) return grad;

  // r_t: posterior weight of "c fires first at t"; tail[t] = sum_{t' >= t} r_t'.
  std::vector<double> r(u.steps);
  for (std::size_t t = 0; t < u.steps; ++t) r[t] = std::exp(lp[t] - total);
  std::vector<double> tail(u.steps + 1, 0.0);
  for (std::size_t t = u.steps; t-- > 0;) tail[t] = tail[t + 1] + r[t];

  for (std::size_t i = 0; i < u.n_outputs; ++i) {
    for (std::size_t t = 0; t < u.steps; ++t) {
      const double g = sigmoid(u.at(i, t));
      if (i == c) {
        grad[i * u.steps + t] = r[t] * (1.0 - g) - g * tail[t + 1];
      } else {
        grad[i * u.steps + t] = -g * tail[t];
      }
    }
  }
  return grad;
}

Gradient fts_gradient(const GlmModel& model, const SpikeTrain& train, std::size_t c, double* objective) {
  if (train.n_inputs != model.n_inputs) throw DimensionError("fts_gradient: input count mismatch");
  const auto u = membrane_potentials(model, train);
  const PotentialView view{u, model.n_outputs, train.steps};
  const auto du = fts_potential_gradient(view, c);
  if (objective) *objective = fts_objective(view, c);

  Gradient grad = Gradient::zeros_like(model);
  const std::size_t tau = model.window;
  const std::size_t n_out = model.n_outputs;
  for (std::size_t i = 0; i < n_out; ++i) {
    for (std::size_t t = 0; t < train.steps; ++t) grad.biases[i] += du[i * train.steps + t];
  }

  // dL/dalpha[j][i][d] = sign_j * sum_t du[i][t] * x_j(t - d)
  std::vector<double> dalpha(tau * n_out);
  const bool identity = model.basis.is_identity();
  for (std::size_t j = 0; j < model.n_inputs; ++j) {
    std::fill(dalpha.begin(), dalpha.end(), 0.0);
    bool any = false;
    for (std::size_t t = 1; t <= train.steps; ++t) {
      for (std::size_t d = 1; d <= tau && d < t; ++d) {
        if (!train.spike(j, t - d - 1)) continue;
        any = true;
        for (std::size_t i = 0; i < n_out; ++i) dalpha[i * tau + (d - 1)] += du[i * train.steps + (t - 1)];
      }
    }
    if (!any) continue;
    const double s = train.sign[j] < 0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n_out; ++i) {
      for (std::size_t k = 0; k < model.n_basis(); ++k) {
        double acc = 0.0;
        if (identity) {
          acc = dalpha[i * tau + k];
        } else {
          for (std::size_t d = 0; d < tau; ++d) {
            if (model.basis.at(d, k)) acc += dalpha[i * tau + d];
          }
        }
        grad.weights[model.weight_index(j, i, k)] = s * acc;
      }
    }
  }
  return grad;
}

std::size_t argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

FtsDecision infer_fts_float(const GlmModel& model, const SpikeTrain& train, Rng& rng) {
  const auto u = membrane_potentials(model, train);
  const std::size_t steps = train.steps;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (std::size_t t = 0; t < steps; ++t) {
    std::size_t winner = FtsDecision::kNoSpike;
    for (std::size_t i = 0; i < model.n_outputs; ++i) {
      const bool fired = uniform(rng) < sigmoid(u[i * steps + t]);
      if (fired && winner == FtsDecision::kNoSpike) winner = i;
    }
    if (winner != FtsDecision::kNoSpike) return FtsDecision{winner, t + 1, false};
  }
  std::vector<double> last(model.n_outputs);
  for (std::size_t i = 0; i < model.n_outputs; ++i) last[i] = u[i * steps + (steps - 1)];
  return FtsDecision{argmax_lowest(last), FtsDecision::kNoSpike, true};
}

double evaluate_fts(const GlmModel& model, const LabelledSet& set, std::size_t steps, Rng& rng) {
  if (set.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t s = 0; s < set.size(); ++s) {
    const auto train = rate_encode(set.sample(s), steps, rng);
    if (infer_fts_float(model, train, rng).predicted_class == set.labels[s]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

TrainResult train(const LabelledSet& train_set, const LabelledSet& test_set, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.size() == 0) throw std::invalid_argument("train: empty training set");
  if (test_set.size() > 0 && test_set.n_features != train_set.n_features) {
    throw DimensionError("train: train/test feature counts differ");
  }

  TrainResult result;
  GlmModel& model = result.model;
  model = GlmModel::zeros(train_set.n_features, train_set.n_classes, config.presentation_time, config.window);

  Rng init_rng = derived_rng(config.seed, 0);
  Rng data_rng = derived_rng(config.seed, 1);
  Rng eval_rng = derived_rng(config.seed, 2);
  std::normal_distribution<double> init(0.0, config.init_scale);
  for (auto& w : model.weights) w = init(init_rng);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), data_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      Gradient batch = Gradient::zeros_like(model);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t s = order[k];
        const auto spikes = rate_encode(train_set.sample(s), config.presentation_time, data_rng);
        double objective = 0.0;
        const auto g = fts_gradient(model, spikes, train_set.labels[s], &objective);
        if (!std::isfinite(objective)) {
          std::ostringstream msg;
          msg << "non-finite loss at epoch " << epoch << ", sample " << s;
          throw TrainingDivergence(msg.str());
        }
        loss_sum -= objective;
        batch.add_scaled(g, 1.0);
      }
      const double step = config.learning_rate / static_cast<double>(end - start);
      if (step != 0.0) {
        for (std::size_t k = 0; k < model.weights.size(); ++k) model.weights[k] += step * batch.weights[k];
        for (std::size_t k = 0; k < model.biases.size(); ++k) model.biases[k] += step * batch.biases[k];
      }
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.mean_loss = loss_sum / static_cast<double>(train_set.size());
    if (!std::isfinite(m.mean_loss)) throw TrainingDivergence("non-finite mean loss at epoch " + std::to_string(epoch));
    m.train_accuracy = evaluate_fts(model, train_set, config.presentation_time, eval_rng);
    m.test_accuracy = evaluate_fts(model, test_set, config.presentation_time, eval_rng);
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return result;
}

void write_metrics_csv(std::ostream& out, std::span<const EpochMetrics> history) {
  out << "epoch,train_acc,test_acc,mean_loss\n";
  for (const auto& m : history) {
    out << m.epoch << ',' << m.train_accuracy << ',' << m.test_accuracy << ',' << m.mean_loss << '\n';
  }
}

}  // namespace spinaps
