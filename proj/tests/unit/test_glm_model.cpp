#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "spinaps/glm_model.hpp"

using namespace spinaps;

namespace {

GlmModel random_model(std::size_t nx, std::size_t ny, std::size_t steps, std::size_t tau, Rng& rng) {
  GlmModel m = GlmModel::zeros(nx, ny, steps, tau);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& w : m.weights) w = n(rng);
  for (auto& g : m.biases) g = n(rng);
  return m;
}

SpikeTrain random_train(std::size_t nx, std::size_t steps, Rng& rng) {
  SpikeTrain s(nx, steps);
  std::bernoulli_distribution b(0.5);
  for (auto& v : s.raster) v = b(rng) ? 1 : 0;
  for (auto& v : s.sign) v = b(rng) ? 1 : -1;
  return s;
}

}  // namespace

TEST_CASE("rate_encode: zero and one rates are deterministic") {
  Rng rng(7);
  const std::vector<double> x{0.0, 1.0, -1.0};
  const auto s = rate_encode(x, 8, rng);
  for (std::size_t t = 0; t < 8; ++t) {
    CHECK(s.spike(0, t) == 0);
    CHECK(s.spike(1, t) == 1);
    CHECK(s.spike(2, t) == 1);
  }
  CHECK(s.sign[0] == 1);
  CHECK(s.sign[1] == 1);
  CHECK(s.sign[2] == -1);
}

TEST_CASE("rate_encode: empirical rate at 0.5 within three sigma") {
  Rng rng(11);
  const std::vector<double> x{0.5};
  const auto s = rate_encode(x, 10000, rng);
  double count = 0;
  for (auto v : s.raster) count += v;
  const double sigma = std::sqrt(0.25 / 10000.0);
  CHECK(std::abs(count / 10000.0 - 0.5) < 3 * sigma);
}

TEST_CASE("rate_encode: rejects out-of-range and non-finite input") {
  Rng rng(1);
  CHECK_THROWS_AS(rate_encode(std::vector<double>{1.5}, 4, rng), EncodingError);
  CHECK_THROWS_AS(rate_encode(std::vector<double>{NAN}, 4, rng), EncodingError);
  CHECK_THROWS_AS(rate_encode(std::vector<double>{INFINITY}, 4, rng), EncodingError);
}

TEST_CASE("rate_encode: same seed, same train") {
  Rng a(5), b(5);
  const std::vector<double> x{0.1, 0.7, -0.3, 0.9};
  CHECK(rate_encode(x, 16, a) == rate_encode(x, 16, b));
}

TEST_CASE("expand_kernel: identity basis and zero weights") {
  const auto id = Basis::identity(7);
  const std::vector<double> w{1, 2, 3, 4, 5, 6, 7};
  CHECK(expand_kernel(id, w) == w);
  CHECK(expand_kernel(id, std::vector<double>(7, 0.0)) == std::vector<double>(7, 0.0));
}

TEST_CASE("expand_kernel: random binary basis against matvec") {
  Rng rng(3);
  std::bernoulli_distribution bit(0.5);
  std::uniform_real_distribution<double> val(-2, 2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint8_t> bits(4 * 2);
    for (auto& b : bits) b = bit(rng) ? 1 : 0;
    const Basis a(4, 2, bits);
    const std::vector<double> w{val(rng), val(rng)};
    const auto alpha = expand_kernel(a, w);
    for (std::size_t d = 0; d < 4; ++d) {
      CHECK(alpha[d] == doctest::Approx(bits[d * 2] * w[0] + bits[d * 2 + 1] * w[1]));
    }
  }
}

TEST_CASE("expand_kernel: dimension mismatch") {
  CHECK_THROWS_AS(expand_kernel(Basis::identity(3), std::vector<double>{1, 2}), DimensionError);
  CHECK_THROWS_AS(Basis(3, 2, std::vector<std::uint8_t>(5)), DimensionError);
}

TEST_CASE("membrane_potential: empty windows give the bias") {
  GlmModel m = GlmModel::zeros(3, 2, 4, 4);
  m.weights.assign(m.weights.size(), 0.7);
  m.biases = {0.25, -1.5};
  std::vector<SpikeWindow> w(3, SpikeWindow{std::vector<std::uint8_t>(4, 0)});
  const std::vector<std::int8_t> signs{1, -1, 1};
  CHECK(membrane_potential(m, w, signs, 0) == 0.25);
  CHECK(membrane_potential(m, w, signs, 1) == -1.5);
}

TEST_CASE("membrane_potential: one-hot window picks one tap") {
  Rng rng(9);
  GlmModel m = random_model(3, 2, 6, 4, rng);
  m.biases = {0.0, 0.0};
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t d = 0; d < 4; ++d) {
      std::vector<SpikeWindow> w(3, SpikeWindow{std::vector<std::uint8_t>(4, 0)});
      w[j].bits[d] = 1;
      const std::vector<std::int8_t> signs(3, 1);
      CHECK(membrane_potential(m, w, signs, 1) == m.weight(j, 1, d));
    }
  }
}

TEST_CASE("membrane_potentials: random instances match the triple loop") {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const GlmModel m = random_model(3, 3, 7, 4, rng);
    const SpikeTrain s = random_train(3, 7, rng);
    const auto u = membrane_potentials(m, s);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t t = 1; t <= 7; ++t) {
        CHECK(u[i * 7 + t - 1] == doctest::Approx(oracle::potential(m, s, i, t)).epsilon(1e-12));
        std::vector<SpikeWindow> windows;
        for (std::size_t j = 0; j < 3; ++j) windows.push_back(window_at(s, j, t, 4));
        CHECK(membrane_potential(m, windows, s.sign, i) == doctest::Approx(u[i * 7 + t - 1]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("membrane_potentials: non-identity basis matches the oracle") {
  Rng rng(4);
  GlmModel m = random_model(2, 2, 6, 4, rng);
  m.basis = Basis(4, 2, {1, 0, 1, 1, 0, 1, 0, 0});
  m.weights.resize(2 * 2 * 2);
  const SpikeTrain s = random_train(2, 6, rng);
  const auto u = membrane_potentials(m, s);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t t = 1; t <= 6; ++t) CHECK(u[i * 6 + t - 1] == doctest::Approx(oracle::potential(m, s, i, t)));
  }
}

TEST_CASE("window_at: spike at t-d lands in bit d-1") {
  SpikeTrain s(1, 5);
  s.spike(0, 0) = 1;  // step 1
  s.spike(0, 2) = 1;  // step 3
  CHECK(window_at(s, 0, 1, 4).bits == std::vector<std::uint8_t>{0, 0, 0, 0});
  CHECK(window_at(s, 0, 4, 4).bits == std::vector<std::uint8_t>{1, 0, 1, 0});
  CHECK(window_at(s, 0, 5, 2).bits == std::vector<std::uint8_t>{0, 1});
}

TEST_CASE("sigmoid: fixed points and extreme arguments") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-1.5) == doctest::Approx(0.18242552380635635).epsilon(1e-14));
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) >= 0.0);
  double prev = 0.0;
  for (double u = -40; u <= 40; u += 0.25) {
    CHECK(sigmoid(u) >= prev);
    prev = sigmoid(u);
  }
  CHECK(log_sigmoid(-800.0) == doctest::Approx(-800.0));
  CHECK(log_sigmoid_complement(800.0) == doctest::Approx(-800.0));
  for (double u : {-3.0, -0.2, 0.0, 1.1, 5.0}) {
    CHECK(log_sigmoid(u) == doctest::Approx(static_cast<double>(std::log(oracle::sigmoid(u)))));
    CHECK(log_sigmoid_complement(u) == doctest::Approx(static_cast<double>(std::log(1 - oracle::sigmoid(u)))));
  }
}

TEST_CASE("GlmModel::validate catches shape and value errors") {
  GlmModel m = GlmModel::zeros(2, 2, 4, 4);
  CHECK_NOTHROW(m.validate());
  m.biases.push_back(0);
  CHECK_THROWS_AS(m.validate(), DimensionError);
  m.biases.pop_back();
  m.weights[0] = NAN;
  CHECK_THROWS_AS(m.validate(), std::domain_error);
}
