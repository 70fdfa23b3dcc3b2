#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nhsense/circuit.hpp"
#include "nhsense/measure.hpp"
#include "nhsense/sensing.hpp"

namespace nhsense {

enum class Experiment { spectrum, skin, sensitivity, range, sweep, shift, robustness, calibrate };

const char* to_string(Experiment experiment);

/// Schema violation with the dotted field path (`circuit.c1`, `lattice.extent[1]`) and the
/// 1-based line where that field appears in the source text (0 when unknown).
class ScenarioError : public ValidationError {
 public:
  ScenarioError(std::string path, int line, const std::string& message);
  const std::string& path() const { return path_; }
  int line() const { return line_; }
  const std::string& detail() const { return detail_; }

 private:
  std::string path_;
  int line_;
  std::string detail_;
};

/// Experiment parameters. Each experiment reads the subset it needs; the rest keep defaults.
struct ExperimentParams {
  // lattice experiments
  std::vector<int> sizes;
  std::vector<double> gammas;
  double threshold = 0.0;  // 0 selects default_range_threshold()
  double deviation_cap = 0.10;
  double finite_target = 0.68;
  // circuit experiments
  std::vector<int> units;
  std::vector<double> ratios;    // C1/C2 values; empty keeps circuit.c2
  std::vector<double> c_gamma;   // farads
  std::vector<double> c_para;    // farads
  double start_hz = 1.4e9;
  double stop_hz = 1.8e9;
  double step_hz = 1e6;
  double f1_hz = 1.27e9;
  Extraction method = Extraction::peak_impedance;
  double noise_floor_db = -80.0;
  double coarse_step_hz = 1e6;
  double fine_step_hz = 1e3;
  double half_window_hz = 20e6;
  int trials = 20;
  double crosstalk_fraction = 0.5;
  std::uint64_t seed = 1;
};

struct OutputSpec {
  std::string directory = "out";
  std::vector<std::string> formats{"csv", "json", "svg"};
};

struct Scenario {
  std::string name = "scenario";
  Experiment experiment = Experiment::spectrum;
  std::optional<LatticeSpec> lattice;
  std::optional<CircuitParams> circuit;
  ExperimentParams params;
  OutputSpec output;
};

/// Parses and validates scenario JSON text. Unknown keys are rejected.
Scenario parse_scenario_text(const std::string& text);
Scenario parse_scenario(const std::string& path);

/// Canonical JSON with every default written out; parse(serialize(s)) reproduces s.
std::string serialize_scenario(const Scenario& scenario);

/// Circuit parameters with `ratio` applied to c2 (ratio <= 0 keeps them unchanged).
CircuitParams with_ratio(CircuitParams params, double ratio);

}  // namespace nhsense
