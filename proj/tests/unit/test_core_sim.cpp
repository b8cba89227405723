#include <doctest.h>

#include <bit>
#include <cmath>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "spinaps/core_sim.hpp"

using namespace spinaps;

namespace {

QuantizedModel random_qm(std::size_t nx, std::size_t ny, std::size_t steps, std::size_t tau, Rng& rng) {
  QuantizedModel qm;
  qm.bits = 8;
  qm.n_inputs = nx;
  qm.n_outputs = ny;
  qm.presentation_time = steps;
  qm.window = tau;
  std::uniform_int_distribution<std::int32_t> code(-127, 127);
  qm.weight_codes.resize(nx * ny * tau);
  for (auto& c : qm.weight_codes) c = code(rng);
  qm.bias_codes.resize(ny);
  for (auto& c : qm.bias_codes) c = code(rng);
  qm.weight_step = 0.0078125;
  qm.bias_step = 0.03125;
  return qm;
}

QuantizedModel zero_qm(std::size_t nx, std::size_t ny, std::size_t steps, std::size_t tau) {
  QuantizedModel qm;
  qm.n_inputs = nx;
  qm.n_outputs = ny;
  qm.presentation_time = steps;
  qm.window = tau;
  qm.weight_codes.assign(nx * ny * tau, 0);
  qm.bias_codes.assign(ny, 0);
  qm.weight_step = 0.01;
  qm.bias_step = 0.01;
  return qm;
}

SpikeWindow window_of(const char* bits) {
  SpikeWindow w;
  for (const char* p = bits; *p; ++p) w.bits.push_back(*p == '1' ? 1 : 0);
  return w;
}

}  // namespace

TEST_CASE("CoreGeometry: the published 256x256 core") {
  const CoreGeometry g;
  CHECK(g.kernel_wordlines() == 1792);
  CHECK(g.used_wordlines() == 1793);
  CHECK(g.word_width() == 2048);
  CHECK(g.array_rows() == 2048);
  CHECK(g.bias_line() == 1792);
  CHECK(g.kernel_line(1, 3) == 10);
}

TEST_CASE("map_model_to_memory: full-size model fills 1793 lines of 2048 bits") {
  Rng rng(1);
  const auto qm = random_qm(256, 256, 8, 7, rng);
  const auto image = map_model_to_memory(qm, CoreGeometry{});
  CHECK(image.rows() == 2048);
  CHECK(image.words_per_row() == 32);
  CHECK(unpack_memory(image, 256, 8) == qm);
  for (std::size_t r = 1793; r < 2048; ++r) {
    for (auto w : image.row(r)) CHECK(w == 0);
  }
}

TEST_CASE("map_model_to_memory: zero model gives a zero image") {
  const auto image = map_model_to_memory(zero_qm(5, 3, 4, 3), CoreGeometry{5, 3, 3, 8});
  for (std::size_t r = 0; r < image.rows(); ++r) {
    for (auto w : image.row(r)) CHECK(w == 0);
  }
}

TEST_CASE("map_model_to_memory: random round trips, other widths, bad geometry") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto qm = random_qm(1 + trial % 9, 1 + trial % 7, 6, 1 + trial % 5, rng);
    CHECK(unpack_memory(map_model_to_memory(qm, CoreGeometry::for_model(qm)), qm.n_inputs, 6) == qm);
  }
  QuantizedModel five = zero_qm(3, 5, 4, 2);
  five.bits = 5;
  for (std::size_t k = 0; k < five.weight_codes.size(); ++k) five.weight_codes[k] = static_cast<std::int32_t>(k % 31) - 15;
  CHECK(unpack_memory(map_model_to_memory(five, CoreGeometry::for_model(five)), 3, 4) == five);
  CHECK_THROWS_AS(map_model_to_memory(five, CoreGeometry{3, 5, 2, 8}), GeometryError);
  CHECK_THROWS_AS(map_model_to_memory(zero_qm(4, 2, 4, 3), CoreGeometry{3, 2, 3, 8}), GeometryError);
  CHECK_THROWS_AS(map_model_to_memory(zero_qm(4, 2, 4, 3), CoreGeometry{4, 2, 2, 8}), GeometryError);
}

TEST_CASE("CoreMemoryImage: sign-magnitude fields and raw export") {
  CoreMemoryImage image(CoreGeometry{2, 9, 2, 8}, 9, 0.5, 0.25);
  image.write_code(1, 0, -1);
  CHECK(image.bit(1, 0));
  CHECK(image.bit(1, 7));
  CHECK_FALSE(image.bit(1, 1));
  image.write_code(2, 7, 127);  // spans the 64-bit word boundary
  CHECK(image.read_code(2, 7) == 127);
  CHECK_THROWS(image.write_code(0, 0, 128));
  std::stringstream buf;
  image.write(buf);
  const auto back = CoreMemoryImage::read(buf);
  CHECK(back == image);
  std::string bytes = buf.str();
  bytes[0] = 'X';
  std::istringstream bad(bytes);
  CHECK_THROWS(CoreMemoryImage::read(bad));
  std::istringstream truncated(buf.str().substr(0, 40));
  CHECK_THROWS(CoreMemoryImage::read(truncated));
}

TEST_CASE("spike_window: shift register examples") {
  const std::vector<std::uint8_t> none;
  CHECK(spike_window(none, 1, 7).bits == window_of("0000000").bits);
  const std::vector<std::uint8_t> two{1, 0};  // s1 = 1, s2 = 0
  CHECK(spike_window(two, 3, 7).bits == window_of("0100000").bits);
  const std::vector<std::uint8_t> s{0, 1};
  CHECK(spike_window(s, 3, 7).bits == window_of("1000000").bits);
  const std::vector<std::uint8_t> ones(7, 1);
  CHECK(spike_window(ones, 8, 7).bits == window_of("1111111").bits);
}

TEST_CASE("gather_active_wordlines: example, empty windows, popcount") {
  const CoreGeometry g{3, 4, 7, 8};
  std::vector<SpikeWindow> w{window_of("1010010"), window_of("0000000"), window_of("0000000")};
  CHECK(gather_active_wordlines(g, w) == std::vector<std::size_t>{0, 2, 5, g.bias_line()});
  w[0] = window_of("0000000");
  CHECK(gather_active_wordlines(g, w) == std::vector<std::size_t>{g.bias_line()});
  Rng rng(3);
  std::bernoulli_distribution b(0.4);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t pop = 0;
    for (auto& win : w) {
      for (auto& bit : win.bits) {
        bit = b(rng) ? 1 : 0;
        pop += bit;
      }
    }
    const auto lines = gather_active_wordlines(g, w);
    CHECK(lines.size() == pop + 1);
    CHECK(lines.back() == g.bias_line());
  }
}

TEST_CASE("Accumulator18 saturates at the 18-bit limits") {
  Accumulator18 a;
  for (int k = 0; k < 2000; ++k) a.add(127);
  CHECK(a.value() == Accumulator18::kMax);
  CHECK(a.saturated());
  a.reset();
  for (int k = 0; k < 2000; ++k) a.add(-127);
  CHECK(a.value() == Accumulator18::kMin);
  a.reset();
  a.add(5);
  CHECK(a.value() == 5);
  CHECK_FALSE(a.saturated());
}

TEST_CASE("Accumulator18: a full 256x7 window at max code exceeds the range") {
  // 1792 kernel lines at 127 sum to 227584, above 2^17 - 1.
  const CoreGeometry g;
  CHECK(static_cast<std::int64_t>(g.kernel_wordlines()) * 127 > Accumulator18::kMax);
}

TEST_CASE("core_step: zero image fires at rate one half") {
  const auto qm = zero_qm(4, 8, 4, 3);
  const auto image = map_model_to_memory(qm, CoreGeometry::for_model(qm));
  CoreState state(image.geometry());
  const std::vector<std::uint8_t> in(4, 0);
  const std::vector<std::int8_t> signs(4, 1);
  std::size_t spikes = 0, draws = 0;
  for (int k = 0; k < 2000; ++k) {
    state.reset_sample(4);
    const auto r = core_step(state, image, in, signs);
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(r.pwl[i] == 128);
      spikes += r.spikes[i];
      ++draws;
    }
  }
  CHECK(std::abs(static_cast<double>(spikes) / draws - 0.5) < 0.02);
}

TEST_CASE("core_step: one active line reproduces code times step plus bias") {
  Rng rng(5);
  const auto qm = random_qm(3, 6, 4, 3, rng);
  const auto image = map_model_to_memory(qm, CoreGeometry::for_model(qm));
  CoreState state(image.geometry());
  state.reset_sample(4);
  const std::vector<std::int8_t> signs{1, 1, 1};
  core_step(state, image, std::vector<std::uint8_t>{0, 1, 0}, signs);  // spike of input 1 at step 1
  const auto r = core_step(state, image, std::vector<std::uint8_t>{0, 0, 0}, signs);
  CHECK(r.wordlines == std::vector<std::size_t>{image.geometry().kernel_line(1, 0), image.geometry().bias_line()});
  for (std::size_t i = 0; i < 6; ++i) {
    const double u = qm.weight_code(1, i, 0) * qm.weight_step + qm.bias_codes[i] * qm.bias_step;
    CHECK(r.accumulators[i] == qm.weight_code(1, i, 0));
    CHECK(r.potentials[i] == doctest::Approx(u));
    CHECK(r.clipped[i] == clip_to_fixed(u));
    CHECK(r.pwl[i] == pwl_sigmoid(clip_to_fixed(u)));
  }
}

TEST_CASE("core_step: saturation path reaches 7.875 and PWL 255") {
  QuantizedModel qm = zero_qm(4, 2, 8, 3);
  qm.weight_codes.assign(qm.weight_codes.size(), 127);
  qm.weight_step = 0.1;
  const auto image = map_model_to_memory(qm, CoreGeometry::for_model(qm));
  CoreState state(image.geometry());
  state.reset_sample(8);
  const std::vector<std::uint8_t> ones(4, 1);
  const std::vector<std::int8_t> signs(4, 1);
  StepResult r;
  for (int t = 0; t < 4; ++t) r = core_step(state, image, ones, signs);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(r.accumulators[i] == 127 * 12);
    CHECK(fixed_to_double(r.clipped[i]) == 7.875);
    CHECK(r.pwl[i] == 255);
  }
}

TEST_CASE("core_step: accumulators equal the float potential on dequantized weights") {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto qm = random_qm(5, 4, 6, 3, rng);
    const auto dq = qm.dequantized();
    const auto image = map_model_to_memory(qm, CoreGeometry::for_model(qm));
    SpikeTrain s(5, 6);
    std::bernoulli_distribution b(0.5);
    for (auto& v : s.raster) v = b(rng) ? 1 : 0;
    for (auto& v : s.sign) v = b(rng) ? 1 : -1;
    CoreState state(image.geometry());
    state.reset_sample(6);
    std::vector<std::uint8_t> col(5);
    for (std::size_t t = 1; t <= 6; ++t) {
      for (std::size_t j = 0; j < 5; ++j) col[j] = s.spike(j, t - 1);
      const auto r = core_step(state, image, col, s.sign);
      for (std::size_t i = 0; i < 4; ++i) {
        const double u = oracle::potential(dq, s, i, t);
        const double without_bias = u - dq.biases[i];
        CHECK(r.accumulators[i] == oracle::round_half_away(without_bias / qm.weight_step));
        CHECK(r.clipped[i] == clip_to_fixed(u));
      }
    }
  }
}

TEST_CASE("run_first_to_spike: dominant bias decides at step one") {
  QuantizedModel qm = zero_qm(3, 4, 8, 3);
  qm.bias_codes = {-127, -127, 127, -127};
  qm.bias_step = 0.1;
  const auto image = map_model_to_memory(qm, CoreGeometry::for_model(qm));
  CoreState state(image.geometry());
  int hits = 0;
  for (int k = 0; k < 100; ++k) {
    const auto run = run_first_to_spike(state, image, SpikeTrain(3, 8));
    if (run.decision.predicted_class == 2 && run.decision.decision_time == 1 && run.trace.steps.size() == 1) ++hits;
  }
  CHECK(hits >= 97);
}

TEST_CASE("run_first_to_spike: silent core falls back after T steps") {
  QuantizedModel qm = zero_qm(3, 4, 6, 3);
  qm.bias_codes = {-127, -100, -127, -120};
  qm.bias_step = 0.1;
  const auto image = map_model_to_memory(qm, CoreGeometry::for_model(qm));
  CoreState state(image.geometry());
  const auto run = run_first_to_spike(state, image, SpikeTrain(3, 6));
  CHECK(run.decision.fallback_used);
  CHECK(run.trace.steps.size() == 6);
  CHECK(run.trace.total_reads() == 6);
  std::ostringstream csv;
  write_trace_csv(csv, 4, run);
  CHECK(csv.str().find("4,6,1,0,0,none\n") != std::string::npos);
}

TEST_CASE("run_first_to_spike: agrees with the b=8 quantized inference") {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    auto qm = random_qm(6, 5, 8, 4, rng);
    for (auto& c : qm.bias_codes) c = -std::abs(c);
    const auto image = map_model_to_memory(qm, CoreGeometry::for_model(qm));
    std::vector<double> x(6);
    std::uniform_real_distribution<double> u(-1, 1);
    for (auto& v : x) v = u(rng);
    const auto s = rate_encode(x, 8, rng);
    CoreState state(image.geometry(), 0x1234);
    Lfsr lfsr(0x1234);
    CHECK(run_first_to_spike(state, image, s).decision == infer_fts_quantized(qm, s, lfsr));
  }
}

TEST_CASE("run_first_to_spike: single sample traces one row per executed step") {
  Rng rng(10);
  const auto qm = random_qm(4, 3, 8, 3, rng);
  const auto image = map_model_to_memory(qm, CoreGeometry::for_model(qm));
  CoreState state(image.geometry());
  const auto run = run_first_to_spike(state, image, rate_encode(std::vector<double>{0.5, 0.2, 0.9, 0.1}, 8, rng));
  std::ostringstream csv;
  write_trace_csv(csv, 0, run);
  const std::string text = csv.str();
  const auto rows = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
  CHECK(rows == run.trace.steps.size());
}

TEST_CASE("latency_cdf: simple distributions") {
  std::vector<FtsDecision> all_first(10, FtsDecision{0, 1, false});
  CHECK(latency_cdf(all_first, 8).cdf[0] == 1.0);
  std::vector<FtsDecision> spread;
  for (std::size_t t = 1; t <= 4; ++t) spread.push_back(FtsDecision{0, t, false});
  const auto c = latency_cdf(spread, 8);
  CHECK(c.cdf[3] == 1.0);
  CHECK(c.cdf[1] == 0.5);
  CHECK(c.no_spike == 0.0);
  spread.push_back(FtsDecision{1, FtsDecision::kNoSpike, true});
  CHECK(latency_cdf(spread, 8).no_spike == doctest::Approx(0.2));
  CHECK(latency_cdf(spread, 8).cdf[7] == doctest::Approx(0.8));
  CHECK_THROWS(latency_cdf(std::vector<FtsDecision>{}, 8));
}
