#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "nhsense/circuit.hpp"

using namespace nhsense;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

CircuitGraph hand_built(Index nodes, std::vector<Element> elements) {
  CircuitGraph g;
  g.nodes = nodes;
  g.elements = std::move(elements);
  return g;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("Three-node network: admittance entries by hand", "[circuit][oracle]") {
  // A -C1- B -L1- C, with L2 at A, C2 at B, C3 and L3 at C, all to ground.
  const double c1 = 2e-12, c2 = 3e-12, c3 = 5e-12, l1 = 1e-9, l2 = 2e-9, l3 = 4e-9;
  const auto g = hand_built(3, {{ElementKind::capacitor, 0, 1, c1},
                                {ElementKind::inductor, 1, 2, l1},
                                {ElementKind::inductor_to_ground, 0, -1, l2},
                                {ElementKind::capacitor_to_ground, 1, -1, c2},
                                {ElementKind::capacitor_to_ground, 2, -1, c3},
                                {ElementKind::inductor_to_ground, 2, -1, l3}});
  const double w = kTwoPi * 1.3e9;
  const cplx s(0.0, w);
  Eigen::Matrix3cd expected;
  expected << s * c1 + 1.0 / (s * l2), -s * c1, 0.0,
              -s * c1, s * (c1 + c2) + 1.0 / (s * l1), -1.0 / (s * l1),
              0.0, -1.0 / (s * l1), 1.0 / (s * l1) + s * c3 + 1.0 / (s * l3);
  const auto J = admittance(g, w);
  CHECK((J.entries - expected).norm() < 1e-12 * expected.norm());
  CHECK(J.entries.isApprox(J.entries.transpose()));
  CHECK((J.coupling.diagonal().array() == 0.0).all());
  CHECK((J.diagonal - expected.diagonal()).norm() < 1e-12 * expected.norm());
}

TEST_CASE("Buffer stamps only the driven row", "[circuit][oracle]") {
  const double buffer = 4e-12, reciprocal = 1e-12;
  const auto g = hand_built(2, {{ElementKind::buffer_capacitor, 0, 1, buffer},
                                {ElementKind::capacitor, 0, 1, reciprocal}});
  const double w = kTwoPi * 1e9;
  const cplx s(0.0, w);
  Eigen::Matrix2cd expected;
  expected << s * reciprocal, -s * reciprocal,
              -s * (reciprocal + buffer), s * (reciprocal + buffer);
  CHECK((admittance(g, w).entries - expected).norm() < 1e-12 * expected.norm());
}

TEST_CASE("Asymmetry of J sits exactly on buffered bonds", "[circuit][property]") {
  CircuitParams p;
  p.units = 2;
  const auto g = synthesize_circuit(p);
  const Eigen::MatrixXd C = capacitance_matrix(g);
  const Eigen::MatrixXd skew = C - C.transpose();
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(g.nodes, g.nodes);
  for (const auto& e : g.elements)
    if (e.kind == ElementKind::buffer_capacitor) mask(e.to, e.from) = mask(e.from, e.to) = 1.0;
  for (Index i = 0; i < g.nodes; ++i)
    for (Index j = 0; j < g.nodes; ++j) {
      if (mask(i, j) == 0.0) CHECK(skew(i, j) == 0.0);
      else CHECK(std::abs(skew(i, j)) == Catch::Approx(p.c1).epsilon(1e-12));
    }

  CircuitGraph reciprocal = g;
  for (auto& e : reciprocal.elements)
    if (e.kind == ElementKind::buffer_capacitor) e.kind = ElementKind::capacitor;
  const auto J = admittance(reciprocal, kTwoPi * 1.5e9);
  CHECK((J.entries - J.entries.transpose()).norm() == 0.0);
}

TEST_CASE("Redundant grounding tops every node up to the same total", "[circuit][property]") {
  for (int units : {1, 3, 5}) {
    CircuitParams p;
    p.units = units;
    const auto g = synthesize_circuit(p);
    const Eigen::MatrixXd C = capacitance_matrix(g);
    for (Index i = 0; i < g.nodes; ++i) CHECK(C(i, i) == Catch::Approx(p.ground_total()).epsilon(1e-13));
    // A fill that would have to be negative becomes an NCG element.
    CircuitParams tight = p;
    tight.c_ground_total = 0.5 * p.c1;
    for (const auto& e : synthesize_circuit(tight).elements)
      if (e.kind == ElementKind::capacitor_to_ground) CHECK(e.value > 0);
  }
}

TEST_CASE("LC resonance identity", "[circuit][oracle]") {
  CircuitParams p;
  CHECK(rel(resonance_frequency(p), 1.59154943e9) < 1e-8);
  p.ground_l = 1e-6;
  CHECK(rel(resonance_frequency(p), 50.329212e6) < 1e-7);
  const double f = resonance_frequency(p);
  p.ground_l *= 4.0;
  CHECK(rel(resonance_frequency(p), 0.5 * f) < 1e-14);
}

TEST_CASE("Strip geometry: node and probe counts", "[circuit]") {
  CircuitParams p;
  p.units = 1;
  auto g = synthesize_circuit(p);
  CHECK(g.nodes == 18);
  CHECK(g.probes.size() == 2);
  p.units = 12;
  g = synthesize_circuit(p);
  CHECK(g.probes.size() == 13);
  CHECK(g.label(g.probes[0]) == "Node 1");
  CHECK(g.label(drive_node(g)) == "Node 13");
  CHECK(deep_probe(g) == g.probes.front());
  p.units = 13;
  CHECK_THROWS_AS(synthesize_circuit(p), ValidationError);
}

TEST_CASE("At the LC resonance J is the hopping matrix times -i omega", "[circuit][oracle]") {
  CircuitParams p;
  p.units = 2;
  const auto g = synthesize_circuit(p);
  const double w0 = kTwoPi * resonance_frequency(p);
  const auto J = admittance(g, w0);
  CHECK(J.diagonal.cwiseAbs().maxCoeff() < 1e-12 * J.entries.cwiseAbs().maxCoeff());
  const Eigen::MatrixXcd H = build_hamiltonian(g.lattice);
  CHECK((J.entries + cplx(0.0, w0) * H).norm() < 1e-12 * J.entries.norm());
}

TEST_CASE("Grounding schemes share one capacitance matrix and f0", "[circuit][property]") {
  for (int units : {1, 3}) {
    CircuitParams a;
    a.units = units;
    CircuitParams b = a;
    b.scheme = GroundScheme::negative_impedance;
    const auto ga = synthesize_circuit(a);
    const auto gb = synthesize_circuit(b);
    CHECK((capacitance_matrix(ga) - capacitance_matrix(gb)).norm() < 1e-12 * capacitance_matrix(ga).norm());
    CHECK(std::abs(tracked_mode_frequency(ga).frequency - tracked_mode_frequency(gb).frequency) < 1.0);
  }
  CHECK(ground_scheme_from_string("negative_impedance") == GroundScheme::negative_impedance);
  CHECK_THROWS_AS(ground_scheme_from_string("floating"), ValidationError);
}

TEST_CASE("Tracked mode sits at f0 and moves further with more units", "[circuit][property]") {
  CircuitParams p;
  p.c2 = p.c1 / 300.0;
  double previous = 0.0;
  for (int units : {1, 4, 5, 6}) {
    p.units = units;
    auto g = synthesize_circuit(p);
    const auto bare = tracked_mode_frequency(g);
    CHECK(rel(bare.frequency, resonance_frequency(p)) < 1e-9);
    CHECK(bare.overlap > 0.99);
    if (units == 1) continue;
    g.measurand = corner_measurand(g, 1e-33);
    const double shift = std::abs(bare.frequency - tracked_mode_frequency(g).frequency);
    CHECK(shift > 100.0 * previous);
    previous = shift;
  }
}

TEST_CASE("Calibration recovers the injected parasitic", "[circuit][oracle]") {
  CircuitParams p;
  p.units = 2;
  for (double c_para : {0.1e-15, 1e-15, 5e-15}) {
    auto g = synthesize_circuit(p);
    const double f0 = tracked_mode_frequency(g).frequency;
    g.c_para = c_para;
    const auto cal = calibrate_parasitic(g, f0);
    CHECK(cal.frequency_before < f0);
    CHECK(std::abs(cal.frequency_after - f0) < 1e-3);
    CHECK(rel(cal.c_cali, c_para) < 1e-6);
  }
  auto g = synthesize_circuit(p);
  const auto none = calibrate_parasitic(g, tracked_mode_frequency(g).frequency);
  CHECK(none.c_cali == 0.0);
  CHECK(none.evaluations == 0);
}

TEST_CASE("Netlist layout", "[circuit]") {
  CircuitParams p;
  auto g = synthesize_circuit(p);
  g.measurand = corner_measurand(g, 1e-18);
  std::istringstream text(export_netlist(g));
  std::string line;
  std::getline(text, line);
  CHECK(line == "# nh-sense netlist v1");
  std::size_t rows = 0, buffers = 0;
  while (std::getline(text, line)) {
    if (line.starts_with("#")) continue;
    std::istringstream fields(line);
    std::string kind, a, b;
    double value = 0.0;
    REQUIRE(fields >> kind >> a >> b >> value);
    CHECK(value > 0);
    if (kind == "BUF") ++buffers;
    ++rows;
  }
  CHECK(rows == g.elements.size() + 1);
  CHECK(buffers == static_cast<std::size_t>(std::count_if(g.elements.begin(), g.elements.end(), [](const Element& e) {
          return e.kind == ElementKind::buffer_capacitor;
        })));
  CHECK(buffers > 0);
}

TEST_CASE("Parameter validation", "[circuit]") {
  CircuitParams p;
  p.c2 = 0.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = {};
  p.ground_l = -1.0;
  CHECK_THROWS_AS(synthesize_circuit(p), ValidationError);
  LatticeSpec cube;
  cube.order = 3;
  cube.extent = {3, 3, 3};
  cube.couplings.assign(3, AxisCoupling{1.0, 1.0});
  CHECK_THROWS_AS(synthesize_circuit(cube, CircuitParams{}), ValidationError);
}
