#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <sstream>

#include "spinaps/perf_model.hpp"

using namespace spinaps::perf;

TEST_CASE("gsops: clock times synapses per line") {
  CHECK(gsops(100, 256) == 25.6);
  CHECK(gsops(250, 256) == 64.0);
  CHECK(gsops(100, 1) == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("rollup: identity, the 8-bit example, linearity") {
  MemoryStats mem;
  mem.power_mw = 53.5;
  mem.area_mm2 = 1.0;
  mem.clock_mhz = 100;
  LogicStats logic;
  logic.power_mw = 0;
  logic.area_mm2 = 0;
  CHECK(rollup(mem, logic, Overheads{0, 0}).power_mw == 53.5);
  mem.power_mw = 53.5;
  logic.power_mw = 63.3 - 53.5;
  CHECK(rollup(mem, logic, Overheads{}).power_mw == doctest::Approx(82.29));
  const double base = mem.power_mw + logic.power_mw;
  const double one = rollup(mem, logic, Overheads{0.1, 0.2}).power_mw - base;
  const double two = rollup(mem, logic, Overheads{0.2, 0.4}).power_mw - base;
  CHECK(two == doctest::Approx(2 * one).epsilon(1e-14));
}

TEST_CASE("efficiency: per watt and per watt per mm^2") {
  const auto e = efficiency(25.6, Rollup{82.3, 1.3});
  CHECK(e.gsops_per_w == doctest::Approx(25.6 / 0.0823));
  CHECK(e.gsops_per_w_mm2 == doctest::Approx(25.6 / 0.0823 / 1.3));
}

TEST_CASE("default configuration reproduces the published table") {
  const auto cfg = default_config();
  const auto report = make_report(cfg);
  REQUIRE(report.rows.size() == 4);
  for (const auto& pub : published_table()) {
    const auto& row = *std::find_if(report.rows.begin(), report.rows.end(),
                                    [&](const PrecisionRow& r) { return r.bits == pub.bits; });
    CHECK(row.stt.gsops == 25.6);
    CHECK(row.sram.gsops == 64.0);
    CHECK(row.sram.eff.gsops_per_w == doctest::Approx(pub.sram_gsops_w).epsilon(0.02));
    CHECK(row.stt.eff.gsops_per_w == doctest::Approx(pub.stt_gsops_w).epsilon(0.02));
    CHECK(row.sram.eff.gsops_per_w_mm2 == doctest::Approx(pub.sram_gsops_w_mm2).epsilon(0.02));
    CHECK(row.stt.eff.gsops_per_w_mm2 == doctest::Approx(pub.stt_gsops_w_mm2).epsilon(0.02));
    CHECK(row.area_efficiency_ratio >= 3.0);
    CHECK(row.area_efficiency_ratio <= 4.1);
  }
  CHECK(report.rows.back().area_efficiency_ratio == doctest::Approx(239.0 / 61.0).epsilon(0.02));
}

TEST_CASE("calibration anchors") {
  const auto cfg = default_config();
  const auto& stt8 = cfg.memory_for(Technology::SttRam, 8);
  CHECK(stt8.power_mw == 53.5);
  CHECK(stt8.read_energy_pj == 535);
  CHECK(stt8.clock_mhz == 100);
  const auto& sram8 = cfg.memory_for(Technology::Sram, 8);
  CHECK(sram8.area_mm2 / stt8.area_mm2 == doctest::Approx(3.0));
  CHECK(cfg.logic_for(8).power_mw == doctest::Approx(25.6 / 311.0 * 1000 / 1.3 - 53.5));
  CHECK(cfg.logic_for(4 + 1).power_mw == doctest::Approx(cfg.logic_for(8).power_mw * 5 / 8));
  CHECK_THROWS_AS(cfg.memory_for(Technology::Sram, 3), ConfigError);
}

TEST_CASE("energy_per_step: memory component and unit cases") {
  MemoryStats mem;
  mem.read_energy_pj = 535;
  mem.clock_mhz = 100;
  CHECK(energy_per_step_nj(365, mem, 0.0) == 195.275);
  CHECK(energy_per_step_nj(0, mem, 1.5) == 1.5);
  CHECK(energy_per_step_nj(1, mem, 2.0) == doctest::Approx(2.535));
  LogicStats logic;
  logic.power_mw = 10;
  CHECK(logic_energy_per_step_nj(100, mem, logic) == doctest::Approx(10.0));  // 10 mW for 1 us
}

TEST_CASE("zero overheads raise every efficiency") {
  auto cfg = default_config();
  const auto base = make_report(cfg);
  cfg.overheads = Overheads{0, 0};
  const auto lean = make_report(cfg);
  for (std::size_t k = 0; k < base.rows.size(); ++k) {
    CHECK(lean.rows[k].stt.eff.gsops_per_w > base.rows[k].stt.eff.gsops_per_w);
    CHECK(lean.rows[k].sram.eff.gsops_per_w_mm2 > base.rows[k].sram.eff.gsops_per_w_mm2);
  }
}

TEST_CASE("config text round trip and malformed input") {
  const auto cfg = default_config();
  std::stringstream text;
  write_config(text, cfg);
  const auto back = parse_config(text);
  CHECK(back.precisions() == cfg.precisions());
  const auto a = make_report(cfg), b = make_report(back);
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    CHECK(b.rows[k].stt.eff.gsops_per_w == doctest::Approx(a.rows[k].stt.eff.gsops_per_w).epsilon(1e-8));
  }

  auto broken = [&](const std::string& from, const std::string& to) {
    std::string s = text.str();
    const auto pos = s.find(from);
    REQUIRE(pos != std::string::npos);
    s.replace(pos, from.size(), to);
    std::istringstream in(s);
    return parse_config(in);
  };
  CHECK_THROWS_AS(broken("version = 1", "version = 2"), ConfigError);
  CHECK_THROWS_AS(broken("routing = 0.1", "routing = abc"), ConfigError);
  CHECK_THROWS_AS(broken("routing = 0.1", "routing = -1"), ConfigError);
  CHECK_THROWS_AS(broken("[tech]", "[tech"), ConfigError);
  CHECK_THROWS_AS(broken("feature_nm = 70", "feature_nm 70"), ConfigError);
  CHECK_THROWS_AS(broken("[memory.sram.5]", "[memory.dram.5]"), ConfigError);
  CHECK_THROWS_AS(broken("[logic.5]\npower_mw", "[logic.5]\nwatts = 1\npower_mw"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/perf.cfg"), ConfigError);
}

TEST_CASE("report JSON carries every row") {
  const auto cfg = default_config();
  std::ostringstream out;
  write_report_json(out, make_report(cfg), cfg);
  const auto j = nlohmann::json::parse(out.str());
  CHECK(j["rows"].size() == 4);
  CHECK(j["rows"][3]["stt_ram"]["gsops"] == 25.6);
  CHECK(j["rows"][3]["stt_ram"]["memory_energy_per_step_nj"] == 195.275);
}
