#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "nhsense/lattice.hpp"
#include "support.hpp"

using namespace nhsense;
using Catch::Matchers::WithinAbs;

namespace {

/// Plane-wave basis u_{k,s}(m) = exp(-i k.m) delta_s / sqrt(N) on a periodic lattice.
Eigen::MatrixXcd plane_wave_basis(const LatticeSpec& spec, std::vector<std::vector<double>>& ks) {
  const Index n = spec.dim();
  Eigen::MatrixXcd U = Eigen::MatrixXcd::Zero(n, n);
  ks.clear();
  for (Index c = 0; c < spec.cells(); ++c) {
    const Site probe = site_at(spec, 2 * c);
    std::vector<double> k(spec.order);
    for (int j = 0; j < spec.order; ++j)
      k[j] = 2 * std::numbers::pi * (probe.cell[j] - 1) / spec.extent[j];
    ks.push_back(k);
  }
  for (std::size_t q = 0; q < ks.size(); ++q) {
    for (Index row = 0; row < n; ++row) {
      const Site site = site_at(spec, row);
      double phase = 0;
      for (int j = 0; j < spec.order; ++j) phase += ks[q][j] * (site.cell[j] - 1);
      U(row, 2 * q + (site.sublattice - 1)) =
          std::exp(cplx(0, -phase)) / std::sqrt(static_cast<double>(spec.cells()));
    }
  }
  return U;
}

LatticeSpec random_lattice(std::mt19937& rng, int order, std::vector<int> extent) {
  std::uniform_real_distribution<double> amp(0.2, 2.0);
  LatticeSpec spec;
  spec.order = order;
  spec.extent = std::move(extent);
  for (int j = 0; j < order; ++j) spec.couplings.push_back({amp(rng), amp(rng)});
  return spec;
}

}  // namespace

TEST_CASE("Bloch matrix at the zone centre", "[lattice][bloch]") {
  const auto spec = square_lattice(2, 13, 2.0, 1e-3);
  const auto h = build_bloch(spec, {0.0, 0.0}).matrix;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      CHECK_THAT(h(i, j).real(), WithinAbs(2.001, 1e-12));
      CHECK_THAT(h(i, j).imag(), WithinAbs(0.0, 1e-12));
    }
}

TEST_CASE("Bloch matrix at k = (pi/2, 0)", "[lattice][bloch]") {
  const auto spec = square_lattice(2, 13, 2.0, 1e-3);
  const auto h = build_bloch(spec, {std::numbers::pi / 2, 0.0}).matrix;
  CHECK(std::abs(h(0, 0) - cplx(0, 1.999)) < 1e-12);
  CHECK(std::abs(h(1, 1) - cplx(0, -1.999)) < 1e-12);
  CHECK(std::abs(h(0, 1) - cplx(2.001, 0)) < 1e-12);
  CHECK(std::abs(h(1, 0) - cplx(2.001, 0)) < 1e-12);
}

TEST_CASE("Bloch form rejects orders without a closed form", "[lattice][bloch]") {
  CHECK_THROWS_AS(build_bloch(square_lattice(1, 5, 1.0, 0.5), {0.0}), ValidationError);
}

TEST_CASE("Hermitian limit gives Hermitian matrices", "[lattice][property]") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> amp(0.1, 3.0), wave(-3.2, 3.2);
  for (int trial = 0; trial < 20; ++trial) {
    const int order = 2 + trial % 2;
    LatticeSpec spec = square_lattice(order, 3, 1.0, 1.0);
    for (auto& c : spec.couplings) c.forward = c.backward = amp(rng);
    spec.intra_cell = trial % 3 == 0 ? amp(rng) : 0.0;
    std::vector<double> k(order);
    for (auto& x : k) x = wave(rng);
    const auto h = build_bloch(spec, k).matrix;
    CHECK((h - h.adjoint()).norm() < 1e-12);
    const auto H = build_hamiltonian(spec);
    CHECK((H - H.adjoint()).norm() < 1e-12);
  }
}

TEST_CASE("Single cell without intra-cell coupling is the zero matrix", "[lattice]") {
  const auto H = build_hamiltonian(square_lattice(2, 1, 2.0, 0.5));
  CHECK(H.rows() == 2);
  CHECK(H.norm() == 0.0);
}

TEST_CASE("Two-cell strip: sublattice 1 hops forward with lambda", "[lattice]") {
  LatticeSpec spec;
  spec.order = 2;
  spec.extent = {2, 1};
  spec.couplings = {{1.9, 0.1}, {1.0, 1.0}};
  const auto H = build_hamiltonian(spec);
  const Index a1 = site_index(spec, {{1, 1}, 1}), b1 = site_index(spec, {{2, 1}, 1});
  const Index a2 = site_index(spec, {{1, 1}, 2}), b2 = site_index(spec, {{2, 1}, 2});
  CHECK(H(b1, a1) == cplx(1.9));
  CHECK(H(a1, b1) == cplx(0.1));
  CHECK(H(b2, a2) == cplx(0.1));
  CHECK(H(a2, b2) == cplx(1.9));

  // The same orientation is what the periodic Fourier transform needs.
  std::vector<std::vector<double>> ks;
  spec.extent = {2, 1};
  const auto P = build_hamiltonian(spec, Boundary::periodic);
  const auto U = plane_wave_basis(spec, ks);
  const Eigen::MatrixXcd block = U.adjoint() * P * U;
  for (std::size_t q = 0; q < ks.size(); ++q)
    CHECK((block.block(2 * q, 2 * q, 2, 2) - build_bloch(spec, ks[q]).matrix).norm() < 1e-12);
}

TEST_CASE("Periodic matrix block-diagonalizes into Bloch matrices", "[lattice][oracle]") {
  std::mt19937 rng(11);
  const std::vector<std::vector<int>> shapes2 = {{3, 3}, {4, 2}, {5, 3}, {2, 6}};
  const std::vector<std::vector<int>> shapes3 = {{3, 3, 3}, {2, 3, 4}};
  auto check = [&](const LatticeSpec& spec) {
    std::vector<std::vector<double>> ks;
    const auto U = plane_wave_basis(spec, ks);
    const Eigen::MatrixXcd T = U.adjoint() * build_hamiltonian(spec, Boundary::periodic) * U;
    Eigen::MatrixXcd expected = Eigen::MatrixXcd::Zero(T.rows(), T.cols());
    for (std::size_t q = 0; q < ks.size(); ++q) expected.block(2 * q, 2 * q, 2, 2) = build_bloch(spec, ks[q]).matrix;
    CHECK((T - expected).norm() < 1e-11);
  };
  for (const auto& shape : shapes2) check(random_lattice(rng, 2, shape));
  for (const auto& shape : shapes3) check(random_lattice(rng, 3, shape));
  auto with_intra = random_lattice(rng, 2, {3, 4});
  with_intra.intra_cell = 0.7;
  check(with_intra);
}

TEST_CASE("Bloch consistency of periodic spectra", "[lattice][property]") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 8; ++trial) {
    const int order = trial < 5 ? 2 : 3;
    const auto spec = order == 2 ? random_lattice(rng, 2, {3 + trial % 3, 4}) : random_lattice(rng, 3, {3, 2, 3});
    std::vector<cplx> bloch;
    for (Index c = 0; c < spec.cells(); ++c) {
      const Site s = site_at(spec, 2 * c);
      std::vector<double> k(order);
      for (int j = 0; j < order; ++j) k[j] = 2 * std::numbers::pi * (s.cell[j] - 1) / spec.extent[j];
      Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(build_bloch(spec, k).matrix, false);
      bloch.push_back(es.eigenvalues()(0));
      bloch.push_back(es.eigenvalues()(1));
    }
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(build_hamiltonian(spec, Boundary::periodic), false);
    const auto real_space = test_support::to_vector(es.eigenvalues());
    CHECK(test_support::matched_distance(bloch, real_space) < 1e-9);
  }
}

TEST_CASE("13x13 periodic lattice matches sampled Bloch eigenvalues", "[lattice][oracle]") {
  auto spec = square_lattice(2, 13, 2.0, 1e-3);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(build_hamiltonian(spec, Boundary::periodic), false);
  const auto all = test_support::to_vector(es.eigenvalues());
  for (int qx : {0, 3, 7}) {
    for (int qy : {0, 5, 12}) {
      const std::vector<double> k = {2 * std::numbers::pi * qx / 13, 2 * std::numbers::pi * qy / 13};
      Eigen::ComplexEigenSolver<Eigen::Matrix2cd> bl(build_bloch(spec, k).matrix, false);
      for (int b = 0; b < 2; ++b) {
        double best = 1e9;
        for (const auto& e : all) best = std::min(best, std::abs(e - bl.eigenvalues()(b)));
        CHECK(best < 1e-10);
      }
    }
  }
}

TEST_CASE("Analytic zero mode of a single cell", "[lattice][zero-mode]") {
  const auto mode = analytic_zero_mode(square_lattice(2, 1, 2.0, 1e-3));
  CHECK(mode.right(0) == cplx(1.0));
  CHECK(mode.right(1) == cplx(0.0));
  CHECK(mode.eigenvalue == cplx(0.0));
}

TEST_CASE("Analytic zero mode residual on 9x9", "[lattice][zero-mode]") {
  const auto mode = analytic_zero_mode(square_lattice(2, 9, 1.9, 0.1));
  CHECK(mode.residual_right < 1e-10);
  CHECK(mode.residual_left < 1e-10);
}

TEST_CASE("Analytic zero modes: residual, support and pairing", "[lattice][zero-mode][property]") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> ratio_exp(0.05, 1.0);
  for (int order : {2, 3}) {
    for (int L = 1; L <= (order == 2 ? 13 : 7); L += 2) {
      LatticeSpec spec = square_lattice(order, L, 1.0, 1.0);
      for (auto& c : spec.couplings) {
        // Keep the accumulated skin factor below 1e12 as the property requires.
        const double max_log = L > 1 ? std::log(1e12) / (L - 1) : 1.0;
        const double r = std::exp(ratio_exp(rng) * max_log);
        c.backward = 0.3;
        c.forward = 0.3 * r;
      }
      const auto mode = analytic_zero_mode(spec);
      INFO("order " << order << " L " << L);
      CHECK(mode.residual_right < 1e-8);
      CHECK(mode.residual_left < 1e-8);

      Index support = 0;
      for (Index i = 0; i < mode.right.size(); ++i) {
        if (mode.right(i) != cplx(0.0)) {
          ++support;
          CHECK(site_at(spec, i).sublattice == 1);
        }
      }
      const Index per_axis = (L + 1) / 2;
      CHECK(support == static_cast<Index>(std::pow(per_axis, order)));
      CHECK(std::abs(mode.pairing() - cplx(std::pow(per_axis, order))) < 1e-9 * std::pow(per_axis, order));
    }
  }
}

TEST_CASE("Analytic zero mode rejects even extents and intra-cell coupling", "[lattice][zero-mode]") {
  CHECK_THROWS_AS(analytic_zero_mode(square_lattice(2, 4, 1.9, 0.1)), ValidationError);
  auto spec = square_lattice(2, 5, 1.9, 0.1);
  spec.intra_cell = 0.2;
  CHECK_THROWS_AS(analytic_zero_mode(spec), ValidationError);
}

TEST_CASE("Invalid lattice specs are rejected", "[lattice]") {
  LatticeSpec spec = square_lattice(2, 3, 1.0, 0.5);
  spec.extent = {3, 0};
  CHECK_THROWS_AS(build_hamiltonian(spec), ValidationError);
  CHECK_THROWS_AS(build_hamiltonian(square_lattice(4, 3, 1.0, 0.5)), ValidationError);
  spec = square_lattice(2, 3, 1.0, 0.5);
  CHECK_THROWS_AS(site_index(spec, {{4, 1}, 1}), ValidationError);
}

TEST_CASE("Site index round trip", "[lattice]") {
  LatticeSpec spec;
  spec.order = 3;
  spec.extent = {3, 5, 2};
  spec.couplings.assign(3, {1.0, 0.5});
  for (Index row = 0; row < spec.dim(); ++row) CHECK(site_index(spec, site_at(spec, row)) == row);
  CHECK(site_index(spec, last_corner(spec)) == spec.dim() - 2);
}
