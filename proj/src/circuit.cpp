#include "nhsense/circuit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/tools/roots.hpp>

#include "nhsense/spectral.hpp"

namespace nhsense {

namespace {

bool positive(double x) { return x > 0 && std::isfinite(x); }

Index corner_node(const LatticeSpec& lattice) { return site_index(lattice, first_corner(lattice)); }

std::string node_name(Index node) { return node < 0 ? "0" : "n" + std::to_string(node + 1); }

// Shortest text that reads back to the same double.
std::string format_si(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

}  // namespace

const char* to_string(GroundScheme scheme) {
  return scheme == GroundScheme::negative_impedance ? "negative_impedance" : "redundant_capacitor";
}

GroundScheme ground_scheme_from_string(const std::string& name) {
  if (name == "negative_impedance") return GroundScheme::negative_impedance;
  if (name == "redundant_capacitor") return GroundScheme::redundant_capacitor;
  throw ValidationError("unknown ground scheme '" + name + "'");
}

void CircuitParams::validate() const {
  require(positive(c1), "c1 must be > 0");
  require(positive(c2), "c2 must be > 0");
  require(c0 >= 0 && std::isfinite(c0), "c0 must be >= 0");
  require(positive(ground_l), "ground_l must be > 0");
  require(units >= 1 && units <= 12, "units must be in 1..12");
  require(c_ground_total >= 0 && std::isfinite(c_ground_total), "c_ground_total must be >= 0");
}

const char* netlist_kind(ElementKind kind) {
  switch (kind) {
    case ElementKind::capacitor: return "C";
    case ElementKind::buffer_capacitor: return "BUF";
    case ElementKind::inductor: return "L";
    case ElementKind::inductor_to_ground: return "L";
    case ElementKind::capacitor_to_ground: return "CG";
    case ElementKind::negative_capacitor_to_ground: return "NCG";
  }
  return "?";
}

std::string CircuitGraph::label(Index node) const {
  const auto it = std::find(probes.begin(), probes.end(), node);
  if (it != probes.end()) return "Node " + std::to_string(it - probes.begin() + 1);
  return node_name(node);
}

LatticeSpec unit_strip(int units) {
  require(units >= 1 && units <= 12, "units must be in 1..12");
  LatticeSpec strip;
  strip.order = 2;
  strip.extent = {2 * units + 1, 3};
  strip.couplings = {{1.0, 1.0}, {1.0, 1.0}};
  return strip;
}

CircuitGraph synthesize_circuit(const LatticeSpec& geometry, const CircuitParams& params) {
  params.validate();
  geometry.validate();
  if (geometry.order != 2)
    throw ValidationError("circuit synthesis supports order 2 only (got " + std::to_string(geometry.order) + ")");

  CircuitGraph graph;
  graph.nodes = geometry.dim();
  graph.params = params;
  graph.lattice = geometry;
  graph.lattice.couplings.assign(2, AxisCoupling{params.c1 + params.c2, params.c2});
  graph.lattice.intra_cell = params.c0;

  // Read bond orientation off a hopping matrix whose forward amplitude is 2 and backward 1.
  LatticeSpec probe = geometry;
  probe.couplings.assign(2, AxisCoupling{2.0, 1.0});
  probe.intra_cell = 0.0;
  const Eigen::MatrixXcd H = build_hamiltonian(probe);
  const Index n = H.rows();
  for (Index j = 0; j < n; ++j)
    for (Index i = j + 1; i < n; ++i) {
      if (H(i, j) == 0.0 && H(j, i) == 0.0) continue;
      const bool j_to_i = H(i, j).real() == 2.0;
      const Index src = j_to_i ? j : i;
      const Index dst = j_to_i ? i : j;
      graph.elements.push_back({ElementKind::buffer_capacitor, src, dst, params.c1});
      graph.elements.push_back({ElementKind::capacitor, src, dst, params.c2});
    }
  if (params.c0 > 0)
    for (Index c = 0; c < n; c += 2) graph.elements.push_back({ElementKind::capacitor, c, c + 1, params.c0});

  const Eigen::VectorXd incident = incident_capacitance(graph);
  const double total = params.ground_total();
  for (Index node = 0; node < n; ++node) {
    if (params.scheme == GroundScheme::redundant_capacitor) {
      const double fill = total - incident(node);
      if (fill > 0) graph.elements.push_back({ElementKind::capacitor_to_ground, node, -1, fill});
      if (fill < 0) graph.elements.push_back({ElementKind::negative_capacitor_to_ground, node, -1, -fill});
    } else {
      graph.elements.push_back({ElementKind::negative_capacitor_to_ground, node, -1, incident(node)});
      graph.elements.push_back({ElementKind::capacitor_to_ground, node, -1, total});
    }
    graph.elements.push_back({ElementKind::inductor_to_ground, node, -1, params.ground_l});
  }

  // Probe labels run along the last row, one per shared boundary column.
  const int width = geometry.extent[0];
  const int height = geometry.extent[1];
  for (int m = 1; m <= width; m += 2) graph.probes.push_back(site_index(geometry, Site{{m, height}, 1}));
  graph.parasitic_node = corner_node(geometry);
  return graph;
}

CircuitGraph synthesize_circuit(const CircuitParams& params) {
  return synthesize_circuit(unit_strip(params.units), params);
}

Measurand corner_measurand(const CircuitGraph& graph, double c_gamma) {
  require(c_gamma >= 0 && std::isfinite(c_gamma), "c_gamma must be >= 0");
  return {corner_node(graph.lattice), site_index(graph.lattice, last_corner(graph.lattice)), c_gamma};
}

Index drive_node(const CircuitGraph& graph) { return graph.probes.back(); }
Index deep_probe(const CircuitGraph& graph) { return graph.probes.front(); }

Eigen::VectorXd incident_capacitance(const CircuitGraph& graph) {
  Eigen::VectorXd incident = Eigen::VectorXd::Zero(graph.node_count());
  for (const auto& e : graph.elements) {
    if (e.kind == ElementKind::capacitor) {
      incident(e.from) += e.value;
      incident(e.to) += e.value;
    } else if (e.kind == ElementKind::buffer_capacitor) {
      incident(e.to) += e.value;  // the buffer input draws no current
    }
  }
  return incident;
}

Eigen::MatrixXd capacitance_matrix(const CircuitGraph& graph) {
  const Index n = graph.node_count();
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
  auto stamp = [&](Index a, Index b, double c) {
    C(a, a) += c;
    C(b, b) += c;
    C(a, b) -= c;
    C(b, a) -= c;
  };
  for (const auto& e : graph.elements) {
    switch (e.kind) {
      case ElementKind::capacitor: stamp(e.from, e.to, e.value); break;
      case ElementKind::buffer_capacitor:
        C(e.to, e.to) += e.value;
        C(e.to, e.from) -= e.value;
        break;
      case ElementKind::capacitor_to_ground: C(e.from, e.from) += e.value; break;
      case ElementKind::negative_capacitor_to_ground: C(e.from, e.from) -= e.value; break;
      case ElementKind::inductor:
      case ElementKind::inductor_to_ground: break;
    }
  }
  if (graph.measurand && graph.measurand->c_gamma > 0)
    stamp(graph.measurand->node_a, graph.measurand->node_b, graph.measurand->c_gamma);
  C(graph.parasitic_node, graph.parasitic_node) += graph.c_para;
  C(graph.parasitic_node, graph.parasitic_node) -= graph.c_cali;
  return C;
}

Eigen::MatrixXd inverse_inductance_matrix(const CircuitGraph& graph) {
  const Index n = graph.node_count();
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : graph.elements) {
    if (e.kind == ElementKind::inductor_to_ground) W(e.from, e.from) += 1.0 / e.value;
    if (e.kind == ElementKind::inductor) {
      W(e.from, e.from) += 1.0 / e.value;
      W(e.to, e.to) += 1.0 / e.value;
      W(e.from, e.to) -= 1.0 / e.value;
      W(e.to, e.from) -= 1.0 / e.value;
    }
  }
  return W;
}

AdmittanceMatrix admittance(const CircuitGraph& graph, double omega) {
  require(omega > 0 && std::isfinite(omega), "omega must be > 0");
  AdmittanceMatrix J;
  J.omega = omega;
  J.entries = cplx(0.0, omega) * capacitance_matrix(graph).cast<cplx>() +
              inverse_inductance_matrix(graph).cast<cplx>() / cplx(0.0, omega);
  J.diagonal = J.entries.diagonal();
  J.coupling = J.entries;
  J.coupling.diagonal().setZero();
  return J;
}

double resonance_frequency(const CircuitParams& params) {
  params.validate();
  return 1.0 / (2.0 * std::numbers::pi * std::sqrt(params.ground_l * params.ground_total()));
}

ModeFrequency tracked_mode_frequency(const CircuitGraph& graph) {
  const Eigen::MatrixXcd C = capacitance_matrix(graph).cast<cplx>();
  const Index anchor = graph.measurand ? graph.measurand->node_a : corner_node(graph.lattice);
  std::vector<Index> rows;
  for (auto& block : coupled_blocks(C))
    if (std::binary_search(block.begin(), block.end(), anchor)) rows = std::move(block);

  const Eigen::VectorXd g = lattice_block_gauge(graph.lattice, rows);
  const Eigen::MatrixXcd B = similarity(principal_submatrix(C, rows), g);
  const Eigen::VectorXcd values = eigenvalues_only(B);
  const double total = graph.params.ground_total();

  std::vector<Index> order(values.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(),
            [&](Index x, Index y) { return std::abs(values(x) - total) < std::abs(values(y) - total); });

  ModeFrequency out;
  Index pick = order.front();
  if (graph.lattice.intra_cell == 0.0) {
    // Follow the skin zero mode of the uncoupled network by overlap.
    const Eigen::VectorXcd analytic = analytic_zero_mode(graph.lattice).right;
    Eigen::VectorXcd ref(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      ref(static_cast<Index>(i)) = analytic(rows[i]) / g(static_cast<Index>(i));
    double best = -1.0;
    for (std::size_t c = 0; c < std::min<std::size_t>(order.size(), 6); ++c) {
      const double ov = overlap(ref, refine_pair(B, values(order[c])).right);
      if (ov > best) {
        best = ov;
        pick = order[c];
      }
    }
    out.overlap = best;
  }
  out.capacitance = values(pick).real();
  if (!(out.capacitance > 0)) throw NumericalError("tracked mode has non-positive capacitance");
  out.frequency = 1.0 / (2.0 * std::numbers::pi * std::sqrt(graph.params.ground_l * out.capacitance));
  return out;
}

CalibrationResult calibrate_parasitic(const CircuitGraph& graph, double f0, double tolerance_hz) {
  require(graph.c_para >= 0 && std::isfinite(graph.c_para), "c_para must be >= 0");
  require(f0 > 0, "f0 must be > 0");
  CalibrationResult result;
  CircuitGraph work = graph;
  work.c_cali = 0.0;
  result.frequency_before = tracked_mode_frequency(work).frequency;
  result.frequency_after = result.frequency_before;
  if (graph.c_para == 0.0) return result;

  auto miss = [&](double c) {
    ++result.evaluations;
    work.c_cali = c;
    return tracked_mode_frequency(work).frequency - f0;
  };
  double lo = 0.0;
  double hi = 2.0 * graph.c_para;
  double f_lo = miss(lo);
  double f_hi = miss(hi);
  for (int widen = 0; f_lo * f_hi > 0 && widen < 8; ++widen) {
    hi *= 4.0;
    f_hi = miss(hi);
  }
  if (f_lo * f_hi > 0) throw NumericalError("calibration: no root of the frequency error in bracket");

  std::uintmax_t max_iter = 100;
  const auto done = [&](double a, double b) { return std::abs(b - a) <= 1e-12 * graph.c_para; };
  const auto [a, b] = boost::math::tools::toms748_solve(miss, lo, hi, f_lo, f_hi, done, max_iter);
  result.c_cali = 0.5 * (a + b);
  work.c_cali = result.c_cali;
  result.frequency_after = tracked_mode_frequency(work).frequency;
  if (std::abs(result.frequency_after - f0) > tolerance_hz && max_iter >= 100)
    throw NumericalError("calibration did not converge");
  return result;
}

std::string export_netlist(const CircuitGraph& graph) {
  std::string out = "# nh-sense netlist v1\n";
  out += "# nodes " + std::to_string(graph.node_count()) + ", scheme " + to_string(graph.params.scheme) + "\n";
  for (std::size_t k = 0; k < graph.probes.size(); ++k)
    out += "# Node " + std::to_string(k + 1) + " = " + node_name(graph.probes[k]) + "\n";
  for (const auto& e : graph.elements)
    out += std::string(netlist_kind(e.kind)) + " " + node_name(e.from) + " " + node_name(e.to) + " " +
           format_si(e.value) + "\n";
  if (graph.measurand && graph.measurand->c_gamma > 0)
    out += "C " + node_name(graph.measurand->node_a) + " " + node_name(graph.measurand->node_b) + " " +
           format_si(graph.measurand->c_gamma) + "\n";
  if (graph.c_para > 0) out += "CG " + node_name(graph.parasitic_node) + " 0 " + format_si(graph.c_para) + "\n";
  if (graph.c_cali > 0) out += "NCG " + node_name(graph.parasitic_node) + " 0 " + format_si(graph.c_cali) + "\n";
  return out;
}

}  // namespace nhsense
