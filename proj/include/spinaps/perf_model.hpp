#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace spinaps::perf {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// STT-RAM cell parameters the memory array was characterised with. Carried
/// as provenance; nothing below derives from them.
struct TechParams {
  double cell_area_f2 = 24;
  double r_on_ohm = 2500;
  double r_off_ohm = 5000;
  double read_voltage_mv = 80;
  double read_pulse_ns = 5;
  double program_current_ua = 150;
  double write_pulse_ns = 10;
  double feature_nm = 70;

  void validate() const;
};

enum class Technology { SttRam, Sram };
std::string to_string(Technology tech);
Technology technology_from_string(const std::string& name);

struct MemoryStats {
  Technology tech = Technology::SttRam;
  int bits = 8;
  double read_energy_pj = 0;  // per word line
  double read_latency_ns = 0;
  double clock_mhz = 0;
  double area_mm2 = 0;
  double power_mw = 0;
  bool calibrated = false;

  void validate() const;
};

struct LogicStats {
  int bits = 8;
  double power_mw = 0;
  double area_mm2 = 0;
  bool calibrated = true;

  void validate() const;
};

struct Overheads {
  double routing = 0.10;
  double controller = 0.20;

  double factor() const { return 1.0 + routing + controller; }
};

struct PerfConfig {
  int version = 1;
  TechParams tech;
  Overheads overheads;
  std::size_t synapses_per_wordline = 256;
  double avg_active_wordlines = 365;
  std::map<std::pair<Technology, int>, MemoryStats> memory;
  std::map<int, LogicStats> logic;

  const MemoryStats& memory_for(Technology tech, int bits) const;
  const LogicStats& logic_for(int bits) const;
  std::vector<int> precisions() const;
  void validate() const;
};

/// Billions of synaptic operations per second; one synapse read and
/// integrated counts as one operation.
double gsops(double clock_mhz, double synapses_per_wordline);

struct Rollup {
  double power_mw = 0;
  double area_mm2 = 0;
};

/// (memory + logic) * (1 + routing + controller), for power and area alike.
Rollup rollup(const MemoryStats& mem, const LogicStats& logic, const Overheads& overheads);

struct Efficiency {
  double gsops_per_w = 0;
  double gsops_per_w_mm2 = 0;
};
Efficiency efficiency(double gsops_value, const Rollup& total);

/// Memory read energy of one time step in nJ: lines * E_read + logic energy.
double energy_per_step_nj(double avg_active_wordlines, const MemoryStats& mem, double logic_energy_nj);

/// Logic energy of one step, assuming one word line per memory clock.
double logic_energy_per_step_nj(double avg_active_wordlines, const MemoryStats& mem, const LogicStats& logic);

struct DesignPoint {
  Technology tech = Technology::SttRam;
  int bits = 8;
  double gsops = 0;
  Rollup total;
  Efficiency eff;
  double energy_per_step_nj = 0;
  double memory_energy_per_step_nj = 0;
};

struct PrecisionRow {
  int bits;
  DesignPoint sram;
  DesignPoint stt;
  double power_efficiency_ratio = 0;  // STT / SRAM GSOPS/W
  double area_efficiency_ratio = 0;   // STT / SRAM GSOPS/W/mm^2
};

struct PerfReport {
  std::vector<PrecisionRow> rows;
};

DesignPoint evaluate(const PerfConfig& config, Technology tech, int bits);
PerfReport make_report(const PerfConfig& config);

/// Published comparison table: GSOPS/W and GSOPS/W/mm^2 per precision.
struct TableRow {
  int bits;
  double sram_gsops_w, stt_gsops_w, sram_gsops_w_mm2, stt_gsops_w_mm2;
};
const std::array<TableRow, 4>& published_table();

/// Published memory characterisation of the 8-bit STT-RAM array.
struct PublishedMemory {
  double read_energy_pj = 535;
  double read_latency_ns = 7.34;
  double clock_mhz = 100;
  double area_mm2 = 1.14;
  double power_mw = 53.5;
  double sram_clock_mhz = 250;
  double sram_to_stt_area_ratio = 3.0;  // synaptic area, 8-bit
};

/// Back-solve memory and logic entries so the model reproduces `table`.
/// Anchors: the published 8-bit STT-RAM memory power, the 8-bit SRAM/STT-RAM
/// synaptic area ratio, and logic that scales linearly with b and is shared
/// by both technologies.
PerfConfig calibrate(const std::array<TableRow, 4>& table, const PublishedMemory& published,
                     const Overheads& overheads = {});

PerfConfig default_config();

/// Versioned key-value file: `[section]` headers and `key = value` lines.
PerfConfig parse_config(std::istream& in);
PerfConfig load_config(const std::string& path);
void write_config(std::ostream& out, const PerfConfig& config);

void write_report_json(std::ostream& out, const PerfReport& report, const PerfConfig& config);
void write_report_table(std::ostream& out, const PerfReport& report);

}  // namespace spinaps::perf
