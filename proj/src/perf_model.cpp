#include "spinaps/perf_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace spinaps::perf {

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive");
}

void require_non_negative(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be non-negative");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void TechParams::validate() const {
  for (double v : {cell_area_f2, r_on_ohm, r_off_ohm, read_voltage_mv, read_pulse_ns, program_current_ua,
                   write_pulse_ns, feature_nm}) {
    require_positive(v, "technology parameter");
  }
  if (!(r_off_ohm > r_on_ohm)) throw ConfigError("technology: R_off must exceed R_on");
}

std::string to_string(Technology tech) { return tech == Technology::SttRam ? "stt-ram" : "sram"; }

Technology technology_from_string(const std::string& name) {
  if (name == "stt-ram") return Technology::SttRam;
  if (name == "sram") return Technology::Sram;
  throw ConfigError("unknown memory technology '" + name + "'");
}

void MemoryStats::validate() const {
  require_non_negative(read_energy_pj, "memory read energy");
  require_non_negative(read_latency_ns, "memory read latency");
  require_positive(clock_mhz, "memory clock");
  require_non_negative(area_mm2, "memory area");
  require_non_negative(power_mw, "memory power");
}

void LogicStats::validate() const {
  require_non_negative(power_mw, "logic power");
  require_non_negative(area_mm2, "logic area");
}

const MemoryStats& PerfConfig::memory_for(Technology tech, int bits) const {
  const auto it = memory.find({tech, bits});
  if (it == memory.end()) throw ConfigError("no " + to_string(tech) + " memory entry for b=" + std::to_string(bits));
  return it->second;
}

const LogicStats& PerfConfig::logic_for(int bits) const {
  const auto it = logic.find(bits);
  if (it == logic.end()) throw ConfigError("no logic entry for b=" + std::to_string(bits));
  return it->second;
}

std::vector<int> PerfConfig::precisions() const {
  std::vector<int> out;
  for (const auto& [b, _] : logic) {
    if (memory.count({Technology::SttRam, b}) && memory.count({Technology::Sram, b})) out.push_back(b);
  }
  return out;
}

void PerfConfig::validate() const {
  if (version != 1) throw ConfigError("unsupported perf config version " + std::to_string(version));
  tech.validate();
  require_non_negative(overheads.routing, "routing overhead");
  require_non_negative(overheads.controller, "controller overhead");
  require_positive(static_cast<double>(synapses_per_wordline), "synapses per word line");
  require_non_negative(avg_active_wordlines, "average active word lines");
  for (const auto& [_, m] : memory) m.validate();
  for (const auto& [_, l] : logic) l.validate();
}

double gsops(double clock_mhz, double synapses_per_wordline) {
  if (!(clock_mhz > 0) || !(synapses_per_wordline > 0)) throw std::invalid_argument("gsops: inputs must be positive");
  return clock_mhz * synapses_per_wordline / 1000.0;
}

Rollup rollup(const MemoryStats& mem, const LogicStats& logic, const Overheads& overheads) {
  mem.validate();
  logic.validate();
  if (overheads.routing < 0 || overheads.controller < 0) throw std::invalid_argument("rollup: negative overhead");
  const double f = overheads.factor();
  return Rollup{(mem.power_mw + logic.power_mw) * f, (mem.area_mm2 + logic.area_mm2) * f};
}

Efficiency efficiency(double gsops_value, const Rollup& total) {
  if (!(total.power_mw > 0)) throw std::invalid_argument("efficiency: zero total power");
  if (!(total.area_mm2 > 0)) throw std::invalid_argument("efficiency: zero total area");
  Efficiency e;
  e.gsops_per_w = gsops_value / (total.power_mw / 1000.0);
  e.gsops_per_w_mm2 = e.gsops_per_w / total.area_mm2;
  return e;
}

double energy_per_step_nj(double avg_active_wordlines, const MemoryStats& mem, double logic_energy_nj) {
  if (avg_active_wordlines < 0 || logic_energy_nj < 0) throw std::invalid_argument("energy_per_step: negative input");
  return avg_active_wordlines * mem.read_energy_pj / 1000.0 + logic_energy_nj;
}

double logic_energy_per_step_nj(double avg_active_wordlines, const MemoryStats& mem, const LogicStats& logic) {
  // mW * us = nJ; a step lasts one memory cycle per active line.
  return logic.power_mw * (avg_active_wordlines / mem.clock_mhz);
}

DesignPoint evaluate(const PerfConfig& config, Technology tech, int bits) {
  const auto& mem = config.memory_for(tech, bits);
  const auto& logic = config.logic_for(bits);
  DesignPoint p;
  p.tech = tech;
  p.bits = bits;
  p.gsops = gsops(mem.clock_mhz, static_cast<double>(config.synapses_per_wordline));
  p.total = rollup(mem, logic, config.overheads);
  p.eff = efficiency(p.gsops, p.total);
  p.memory_energy_per_step_nj = energy_per_step_nj(config.avg_active_wordlines, mem, 0.0);
  p.energy_per_step_nj = energy_per_step_nj(config.avg_active_wordlines, mem,
                                            logic_energy_per_step_nj(config.avg_active_wordlines, mem, logic));
  return p;
}

PerfReport make_report(const PerfConfig& config) {
  config.validate();
  PerfReport report;
  for (int b : config.precisions()) {
    PrecisionRow row{b, evaluate(config, Technology::Sram, b), evaluate(config, Technology::SttRam, b)};
    row.power_efficiency_ratio = row.stt.eff.gsops_per_w / row.sram.eff.gsops_per_w;
    row.area_efficiency_ratio = row.stt.eff.gsops_per_w_mm2 / row.sram.eff.gsops_per_w_mm2;
    report.rows.push_back(row);
  }
  return report;
}

const std::array<TableRow, 4>& published_table() {
  static const std::array<TableRow, 4> table{{
      {5, 353, 474, 177, 559},
      {6, 283, 412, 119, 415},
      {7, 230, 366, 83, 322},
      {8, 193, 311, 61, 239},
  }};
  return table;
}

PerfConfig calibrate(const std::array<TableRow, 4>& table, const PublishedMemory& published,
                     const Overheads& overheads) {
  PerfConfig cfg;
  cfg.overheads = overheads;
  const double f = overheads.factor();
  const double spw = static_cast<double>(cfg.synapses_per_wordline);
  const double stt_gsops = gsops(published.clock_mhz, spw);
  const double sram_gsops = gsops(published.sram_clock_mhz, spw);

  // Pre-overhead power (mW) and area (mm^2) implied by one table cell pair.
  auto power_of = [&](double g, double per_w) { return g / per_w * 1000.0 / f; };
  auto area_of = [&](double per_w, double per_w_mm2) { return per_w / per_w_mm2 / f; };

  const auto anchor = std::find_if(table.begin(), table.end(), [](const TableRow& r) { return r.bits == 8; });
  if (anchor == table.end()) throw ConfigError("calibrate: table needs an 8-bit row");
  const double logic_power_8 = power_of(stt_gsops, anchor->stt_gsops_w) - published.power_mw;
  const double stt_area_8 = area_of(anchor->stt_gsops_w, anchor->stt_gsops_w_mm2);
  const double sram_area_8 = area_of(anchor->sram_gsops_w, anchor->sram_gsops_w_mm2);
  // sram_mem = ratio * stt_mem, both sharing the same logic area.
  const double stt_mem_area_8 = (sram_area_8 - stt_area_8) / (published.sram_to_stt_area_ratio - 1.0);
  const double logic_area_8 = stt_area_8 - stt_mem_area_8;
  if (logic_power_8 <= 0 || logic_area_8 <= 0) throw ConfigError("calibrate: anchors imply non-positive logic cost");

  for (const auto& row : table) {
    const double scale = row.bits / 8.0;
    LogicStats logic{row.bits, logic_power_8 * scale, logic_area_8 * scale, true};
    cfg.logic[row.bits] = logic;

    MemoryStats stt;
    stt.tech = Technology::SttRam;
    stt.bits = row.bits;
    stt.clock_mhz = published.clock_mhz;
    stt.read_latency_ns = published.read_latency_ns;
    stt.power_mw = power_of(stt_gsops, row.stt_gsops_w) - logic.power_mw;
    stt.area_mm2 = area_of(row.stt_gsops_w, row.stt_gsops_w_mm2) - logic.area_mm2;
    stt.read_energy_pj = row.bits == 8 ? published.read_energy_pj : stt.power_mw / stt.clock_mhz * 1000.0;
    stt.calibrated = true;
    if (row.bits == 8) stt.power_mw = published.power_mw;

    MemoryStats sram;
    sram.tech = Technology::Sram;
    sram.bits = row.bits;
    sram.clock_mhz = published.sram_clock_mhz;
    sram.read_latency_ns = 1000.0 / published.sram_clock_mhz;
    sram.power_mw = power_of(sram_gsops, row.sram_gsops_w) - logic.power_mw;
    sram.area_mm2 = area_of(row.sram_gsops_w, row.sram_gsops_w_mm2) - logic.area_mm2;
    sram.read_energy_pj = sram.power_mw / sram.clock_mhz * 1000.0;
    sram.calibrated = true;

    if (stt.power_mw <= 0 || stt.area_mm2 <= 0 || sram.power_mw <= 0 || sram.area_mm2 <= 0) {
      throw ConfigError("calibrate: non-positive memory cost at b=" + std::to_string(row.bits));
    }
    cfg.memory[{Technology::SttRam, row.bits}] = stt;
    cfg.memory[{Technology::Sram, row.bits}] = sram;
  }
  return cfg;
}

PerfConfig default_config() { return calibrate(published_table(), PublishedMemory{}); }

PerfConfig parse_config(std::istream& in) {
  // Flatten to "section.key" -> value first, then interpret.
  std::map<std::string, std::string> kv;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
    const std::string full = section.empty() ? key : section + "." + key;
    if (!kv.emplace(full, value).second) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key " + full);
  }

  std::set<std::string> used_keys;
  auto number = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("missing key " + key);
    used_keys.insert(key);
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(it->second, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != it->second.size()) throw ConfigError("key " + key + ": not a number: " + it->second);
    return v;
  };
  auto flag = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) return false;
    used_keys.insert(key);
    if (it->second == "true") return true;
    if (it->second == "false") return false;
    throw ConfigError("key " + key + ": expected true or false");
  };

  auto precision = [](const std::string& text, const std::string& section) {
    int b = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), b);
    if (ec != std::errc() || ptr != text.data() + text.size() || b < 1 || b > 16) {
      throw ConfigError("bad precision in section " + section);
    }
    return b;
  };

  PerfConfig cfg;
  cfg.version = static_cast<int>(number("version"));
  if (cfg.version != 1) throw ConfigError("unsupported perf config version " + std::to_string(cfg.version));
  cfg.tech.cell_area_f2 = number("tech.cell_area_f2");
  cfg.tech.r_on_ohm = number("tech.r_on_ohm");
  cfg.tech.r_off_ohm = number("tech.r_off_ohm");
  cfg.tech.read_voltage_mv = number("tech.read_voltage_mv");
  cfg.tech.read_pulse_ns = number("tech.read_pulse_ns");
  cfg.tech.program_current_ua = number("tech.program_current_ua");
  cfg.tech.write_pulse_ns = number("tech.write_pulse_ns");
  cfg.tech.feature_nm = number("tech.feature_nm");
  cfg.overheads.routing = number("overheads.routing");
  cfg.overheads.controller = number("overheads.controller");
  cfg.synapses_per_wordline = static_cast<std::size_t>(number("workload.synapses_per_wordline"));
  cfg.avg_active_wordlines = number("workload.avg_active_wordlines");

  for (const auto& [key, _] : kv) {
    // memory.<tech>.<b>.power_mw  /  logic.<b>.power_mw
    if (key.rfind("memory.", 0) == 0 && key.size() > 9 && key.ends_with(".power_mw")) {
      const std::string prefix = key.substr(0, key.size() - 9);
      const auto dot = prefix.find('.', 7);
      if (dot == std::string::npos) throw ConfigError("bad memory section " + prefix);
      MemoryStats m;
      m.tech = technology_from_string(prefix.substr(7, dot - 7));
      m.bits = precision(prefix.substr(dot + 1), prefix);
      m.power_mw = number(prefix + ".power_mw");
      m.area_mm2 = number(prefix + ".area_mm2");
      m.clock_mhz = number(prefix + ".clock_mhz");
      m.read_energy_pj = number(prefix + ".read_energy_pj");
      m.read_latency_ns = number(prefix + ".read_latency_ns");
      m.calibrated = flag(prefix + ".calibrated");
      cfg.memory[{m.tech, m.bits}] = m;
    } else if (key.rfind("logic.", 0) == 0 && key.ends_with(".power_mw")) {
      const std::string prefix = key.substr(0, key.size() - 9);
      LogicStats l;
      l.bits = precision(prefix.substr(6), prefix);
      l.power_mw = number(prefix + ".power_mw");
      l.area_mm2 = number(prefix + ".area_mm2");
      l.calibrated = flag(prefix + ".calibrated");
      cfg.logic[l.bits] = l;
    }
  }
  for (const auto& [key, _] : kv) {
    if (!used_keys.count(key)) throw ConfigError("unknown key " + key);
  }
  cfg.validate();
  return cfg;
}

PerfConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open perf config " + path);
  return parse_config(in);
}

void write_config(std::ostream& out, const PerfConfig& c) {
  out << "# Performance model configuration.\n"
      << "# Entries marked calibrated = true were back-solved from the published comparison table.\n"
      << "version = " << c.version << "\n\n"
      << "[tech]\n"
      << "cell_area_f2 = " << fmt_num(c.tech.cell_area_f2) << "\n"
      << "r_on_ohm = " << fmt_num(c.tech.r_on_ohm) << "\n"
      << "r_off_ohm = " << fmt_num(c.tech.r_off_ohm) << "\n"
      << "read_voltage_mv = " << fmt_num(c.tech.read_voltage_mv) << "\n"
      << "read_pulse_ns = " << fmt_num(c.tech.read_pulse_ns) << "\n"
      << "program_current_ua = " << fmt_num(c.tech.program_current_ua) << "\n"
      << "write_pulse_ns = " << fmt_num(c.tech.write_pulse_ns) << "\n"
      << "feature_nm = " << fmt_num(c.tech.feature_nm) << "\n\n"
      << "[overheads]\n"
      << "routing = " << fmt_num(c.overheads.routing) << "\n"
      << "controller = " << fmt_num(c.overheads.controller) << "\n\n"
      << "[workload]\n"
      << "synapses_per_wordline = " << c.synapses_per_wordline << "\n"
      << "avg_active_wordlines = " << fmt_num(c.avg_active_wordlines) << "\n";
  for (const auto& [key, m] : c.memory) {
    out << "\n[memory." << to_string(m.tech) << "." << m.bits << "]\n"
        << "read_energy_pj = " << fmt_num(m.read_energy_pj) << "\n"
        << "read_latency_ns = " << fmt_num(m.read_latency_ns) << "\n"
        << "clock_mhz = " << fmt_num(m.clock_mhz) << "\n"
        << "area_mm2 = " << fmt_num(m.area_mm2) << "\n"
        << "power_mw = " << fmt_num(m.power_mw) << "\n"
        << "calibrated = " << (m.calibrated ? "true" : "false") << "\n";
  }
  for (const auto& [b, l] : c.logic) {
    out << "\n[logic." << b << "]\n"
        << "power_mw = " << fmt_num(l.power_mw) << "\n"
        << "area_mm2 = " << fmt_num(l.area_mm2) << "\n"
        << "calibrated = " << (l.calibrated ? "true" : "false") << "\n";
  }
}

void write_report_json(std::ostream& out, const PerfReport& report, const PerfConfig& config) {
  using nlohmann::json;
  auto point = [](const DesignPoint& p) {
    return json{{"technology", to_string(p.tech)},
                {"bits", p.bits},
                {"gsops", p.gsops},
                {"total_power_mw", p.total.power_mw},
                {"total_area_mm2", p.total.area_mm2},
                {"gsops_per_w", p.eff.gsops_per_w},
                {"gsops_per_w_mm2", p.eff.gsops_per_w_mm2},
                {"energy_per_step_nj", p.energy_per_step_nj},
                {"memory_energy_per_step_nj", p.memory_energy_per_step_nj}};
  };
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back(json{{"bits", r.bits},
                        {"sram", point(r.sram)},
                        {"stt_ram", point(r.stt)},
                        {"gsops_per_w_ratio", r.power_efficiency_ratio},
                        {"gsops_per_w_mm2_ratio", r.area_efficiency_ratio}});
  }
  json doc{{"version", config.version},
           {"overheads", {{"routing", config.overheads.routing}, {"controller", config.overheads.controller}}},
           {"avg_active_wordlines", config.avg_active_wordlines},
           {"rows", rows}};
  out << doc.dump(2) << '\n';
}

void write_report_table(std::ostream& out, const PerfReport& report) {
  out << "Precision |     GSOPS      |    GSOPS/W     |  GSOPS/W/mm^2  | STT/SRAM\n"
      << "          |  SRAM  STT-RAM |  SRAM  STT-RAM |  SRAM  STT-RAM | per W/mm^2\n"
      << "----------+----------------+----------------+----------------+-----------\n";
  for (const auto& r : report.rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%9d | %6.1f %7.1f | %5.0f %8.0f | %5.0f %8.0f | %8.2fx\n", r.bits, r.sram.gsops,
                  r.stt.gsops, r.sram.eff.gsops_per_w, r.stt.eff.gsops_per_w, r.sram.eff.gsops_per_w_mm2,
                  r.stt.eff.gsops_per_w_mm2, r.area_efficiency_ratio);
    out << buf;
  }
}

}  // namespace spinaps::perf
