#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nhsense/circuit.hpp"

namespace nhsense {

struct DriveSpec {
  Index node = 0;
  double amplitude = 0.1;
  double crosstalk_fraction = 0.0;
  std::uint64_t crosstalk_seed = 0;
};

/// Node phasors from J V = I. A positive `gauge` solves G^-1 J G y = G^-1 I and returns V = G y,
/// which keeps skin profiles spanning hundreds of dB inside double range.
struct NodeSolution {
  Eigen::VectorXcd voltages;
  bool resonant = false;  // J was singular to working precision
};

NodeSolution solve_node_voltages(const AdmittanceMatrix& J, const Eigen::VectorXcd& currents,
                                 const Eigen::VectorXd& gauge = {});
NodeSolution solve_node_voltages(const AdmittanceMatrix& J, const DriveSpec& drive,
                                 const Eigen::VectorXd& gauge = {});

/// Diagonal gauge that flattens the circuit's skin profile; all ones for hand-built graphs.
Eigen::VectorXd circuit_gauge(const CircuitGraph& graph);

enum class Extraction { min_voltage, peak_impedance, noise_onset };
const char* to_string(Extraction method);

constexpr double kImpedanceCap = 1e12;

struct SweepResult {
  std::vector<double> grid;   // hertz, strictly ascending
  std::vector<Index> nodes;   // one trace per node
  Eigen::MatrixXd values;     // grid x nodes; dB (voltage) or ohms (impedance), floor applied
  Eigen::MatrixXd raw;        // same without the floor
  double noise_floor_db = -80.0;
  double extracted_f = 0.0;
  Extraction method = Extraction::min_voltage;
};

/// Uniform grid from `start` to `stop` inclusive (within half a step).
std::vector<double> uniform_grid(double start, double stop, double step);

struct SweepOptions {
  double noise_floor_db = -80.0;
  unsigned threads = 1;
  /// Optional reference: extract the extremum nearest this frequency instead of the global one.
  double reference_hz = 0.0;
};

/// 20 log10(|V_node| / |V_drive|) for every node in `probes`; extraction reads probes[0].
SweepResult voltage_sweep(const CircuitGraph& graph, const DriveSpec& drive, const std::vector<Index>& probes,
                          const std::vector<double>& grid, const SweepOptions& options = {});

/// |Z| to ground at `node`, capped at kImpedanceCap.
SweepResult impedance_scan(const CircuitGraph& graph, Index node, const std::vector<double>& grid,
                           const SweepOptions& options = {});

/// Lowest grid frequency where the first trace touches the floor. Throws NumericalError
/// when the trace never reaches it.
double noise_onset_estimate(const SweepResult& sweep);

struct ShiftOptions {
  Extraction method = Extraction::peak_impedance;
  double coarse_step = 1e6;
  double fine_step = 1e3;
  double half_window = 20e6;
  /// Impedance scan node; -1 selects the corner that hosts the zero mode.
  Index node = -1;
  unsigned threads = 1;
  double noise_floor_db = -80.0;
  /// Crosstalk relative to the drive at drive_node(graph), or to the test current of an impedance scan.
  double crosstalk_fraction = 0.0;
  std::uint64_t crosstalk_seed = 0;
};

struct ShiftMeasurement {
  double f0 = 0.0;
  double f0_shifted = 0.0;
  double delta_f = 0.0;
  double tracked_f0 = 0.0;          // eigenvalue prediction without the measurand
  double tracked_f0_shifted = 0.0;  // and with it
  SweepResult before;
  SweepResult after;
};

/// Two-stage scan of the resonance near the tracked mode, with and without the measurand.
double extract_resonance(const CircuitGraph& graph, double reference_hz, const ShiftOptions& options,
                         SweepResult* fine_sweep = nullptr);
ShiftMeasurement eigenfrequency_shift(const CircuitGraph& graph, const Measurand& measurand,
                                      const ShiftOptions& options = {});

struct CrosstalkOptions {
  int trials = 20;
  double f1 = 1.27e9;
  ShiftOptions shift;
};

struct CrosstalkTrial {
  double f0 = 0.0;
  double f0_shifted = 0.0;
  double delta_f = 0.0;
  double deviation = 0.0;        // |delta_f - clean| / clean
  double profile_corr_f0 = 0.0;  // Pearson correlation with the clean boundary profile, drive node excluded
  double profile_corr_f1 = 0.0;
};

struct RobustnessReport {
  double clean_f0 = 0.0;
  double clean_delta_f = 0.0;
  std::vector<double> clean_profile_f0;  // boundary-node dB relative to the drive node
  std::vector<double> clean_profile_f1;
  std::vector<CrosstalkTrial> trials;
  double max_deviation = 0.0;
};

/// Each trial seeds its own tones from (seed, trial) and repeats the shift measurement and both profiles.
RobustnessReport crosstalk_trial(const CircuitGraph& graph, const DriveSpec& drive, const Measurand& measurand,
                                 const CrosstalkOptions& options = {});

/// Boundary-node profile in dB relative to the drive node at one frequency.
std::vector<double> boundary_profile(const CircuitGraph& graph, const DriveSpec& drive, double frequency);

/// Crosstalk is 8 single-frequency current tones at random nodes, with random phases and frequencies
/// within 20% of the LC resonance; their amplitudes sum to crosstalk_fraction * amplitude.
struct CrosstalkTone {
  Index node = 0;
  double amplitude = 0.0;
  double phase = 0.0;
  double frequency = 0.0;
};
std::vector<CrosstalkTone> crosstalk_tones(const CircuitGraph& graph, const DriveSpec& drive);

/// Per-node amplitude the tones add to every reading. Being off-frequency they add in power,
/// so a reading of phasor v becomes sqrt(|v|^2 + background^2).
Eigen::VectorXd crosstalk_background(const CircuitGraph& graph, const DriveSpec& drive);

}  // namespace nhsense
