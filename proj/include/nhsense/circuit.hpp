#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nhsense/lattice.hpp"

namespace nhsense {

enum class GroundScheme { negative_impedance, redundant_capacitor };

const char* to_string(GroundScheme scheme);
GroundScheme ground_scheme_from_string(const std::string& name);

/// Element values in SI units.
struct CircuitParams {
  double c1 = 5e-12;          // buffered forward capacitance
  double c2 = 5e-12 / 160.0;  // reciprocal capacitance, present in both directions
  double c0 = 0.0;            // intra-cell capacitance
  double ground_l = 1e-9;
  GroundScheme scheme = GroundScheme::redundant_capacitor;
  int units = 1;
  double c_ground_total = 0.0;  // 0 selects 2 * c1

  void validate() const;
  double ground_total() const { return c_ground_total > 0 ? c_ground_total : 2.0 * c1; }
  /// Skin ratio of the capacitance hopping, (c1 + c2) / c2.
  double skin_ratio() const { return 1.0 + c1 / c2; }
};

enum class ElementKind {
  capacitor,
  buffer_capacitor,
  inductor,
  inductor_to_ground,
  capacitor_to_ground,
  negative_capacitor_to_ground
};

const char* netlist_kind(ElementKind kind);

/// `to` is unused (-1) for elements to ground. A buffer drives `to` from `from`.
struct Element {
  ElementKind kind;
  Index from;
  Index to;
  double value;
};

struct Measurand {
  Index node_a;
  Index node_b;
  double c_gamma;
};

struct CircuitGraph {
  Index nodes = 0;
  CircuitParams params;
  /// Geometry with the capacitance hopping as couplings: forward c1 + c2, backward c2.
  LatticeSpec lattice;
  std::vector<Element> elements;
  /// Boundary probe nodes in label order: probes[k] carries the label "Node k+1".
  std::vector<Index> probes;
  std::optional<Measurand> measurand;
  Index parasitic_node = 0;
  double c_para = 0.0;
  double c_cali = 0.0;  // realized as a negative shunt at parasitic_node

  Index node_count() const { return nodes; }
  std::string label(Index node) const;
};

/// Three-row strip of `units` 3x3 blocks sharing boundary columns: extent {2 units + 1, 3}.
LatticeSpec unit_strip(int units);

/// Builds the network for an order-2 geometry. Lattice couplings are ignored; the
/// capacitances in `params` set them.
CircuitGraph synthesize_circuit(const LatticeSpec& geometry, const CircuitParams& params);
CircuitGraph synthesize_circuit(const CircuitParams& params);

/// Measurand between the first corner and the opposite corner (sublattice 1 on both).
Measurand corner_measurand(const CircuitGraph& graph, double c_gamma);

/// Current-driving node and deepest probe of the default measurement.
Index drive_node(const CircuitGraph& graph);
Index deep_probe(const CircuitGraph& graph);

/// J(omega) = diag + coupling. Off-diagonal entries live in `coupling`.
struct AdmittanceMatrix {
  double omega = 0.0;
  Eigen::MatrixXcd entries;
  Eigen::MatrixXcd coupling;
  Eigen::VectorXcd diagonal;
};

AdmittanceMatrix admittance(const CircuitGraph& graph, double omega);

/// Real matrices with J(omega) = i omega C + W / (i omega).
Eigen::MatrixXd capacitance_matrix(const CircuitGraph& graph);
Eigen::MatrixXd inverse_inductance_matrix(const CircuitGraph& graph);

/// Total capacitance each node sees from coupling elements alone.
Eigen::VectorXd incident_capacitance(const CircuitGraph& graph);

/// 1 / (2 pi sqrt(L C_tot)).
double resonance_frequency(const CircuitParams& params);

/// Frequency of the capacitance-matrix mode that follows the corner zero mode, solved in
/// the gauged frame inside the symmetry block of the measurand (or the first corner).
struct ModeFrequency {
  double frequency = 0.0;
  double capacitance = 0.0;  // eigenvalue of C
  double overlap = 0.0;
};
ModeFrequency tracked_mode_frequency(const CircuitGraph& graph);

struct CalibrationResult {
  double c_cali = 0.0;
  double frequency_before = 0.0;
  double frequency_after = 0.0;
  int evaluations = 0;
};

/// Root-finds the negative shunt that returns the tracked mode to f0.
CalibrationResult calibrate_parasitic(const CircuitGraph& graph, double f0, double tolerance_hz = 1e-3);

/// Flat text netlist: header line, then `KIND NODE_A NODE_B VALUE_SI` per element.
std::string export_netlist(const CircuitGraph& graph);

}  // namespace nhsense
