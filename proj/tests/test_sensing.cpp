#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "nhsense/sensing.hpp"

using namespace nhsense;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("Zero measurand gives zero shift", "[sensing]") {
  const auto lat = square_lattice(2, 5, 1.9, 0.1);
  const auto pert = corner_to_corner(lat, 0.0);
  CHECK(shift_first_order(lat, pert).delta_e == 0.0);
  const auto exact = shift_exact(lat, pert);
  CHECK(exact.delta_e < 1e-10);
  CHECK(exact.flag != Conditioning::unreliable);
}

TEST_CASE("Ratio 19, chi 2: first order, closed form and exact agree", "[sensing][oracle]") {
  const auto lat = square_lattice(2, 5, 1.9, 0.1);
  const double gamma = 1e-10;
  const auto first = shift_first_order(lat, corner_to_corner(lat, gamma));
  const double expected = std::pow(19.0, 4) / 9.0 * (1.0 + std::pow(19.0, -8));
  CHECK(rel(first.delta_e / gamma, expected) < 1e-12);
  CHECK(std::abs(first.delta_e / gamma - 1.448e4) < 1.0);
  CHECK(rel(first.prefactor, 1.0 / 9.0) < 1e-14);
  CHECK(rel(first.K, 4.0 * std::log(19.0)) < 1e-14);

  const auto closed = shift_closed_form({19.0, 19.0}, 2, gamma);
  CHECK(rel(closed.delta_e, first.delta_e) < 1e-12);

  const auto exact = shift_exact(lat, corner_to_corner(lat, gamma));
  CHECK(exact.flag != Conditioning::unreliable);
  CHECK(exact.tracked_overlap > 0.99);
  CHECK(rel(exact.delta_e, first.delta_e) < 0.01);
}

TEST_CASE("Interior attachment on 5x5", "[sensing][oracle]") {
  const auto lat = square_lattice(2, 5, 1.9, 0.1);
  const double gamma = 1e-9;
  const PerturbationSpec pert{gamma, first_corner(lat), Site{{3, 3}, 1}};
  const auto first = shift_first_order(lat, pert);
  // chi = 1 per axis; the pairing still spans the whole lattice, so the prefactor is 1/9.
  CHECK(rel(first.prefactor, 1.0 / 9.0) < 1e-14);
  CHECK(rel(first.K, 2.0 * std::log(19.0)) < 1e-14);
  CHECK(rel(first.delta_e, gamma * (19.0 * 19.0 + 1.0 / (19.0 * 19.0)) / 9.0) < 1e-12);
  const auto exact = shift_exact(lat, pert);
  CHECK(exact.flag != Conditioning::unreliable);
  CHECK(rel(exact.delta_e, first.delta_e) < 0.01);
}

TEST_CASE("Position formula matches the direct bilinear form", "[sensing][property]") {
  std::mt19937 rng(4);
  for (int order : {2, 3}) {
    const int L = order == 2 ? 7 : 5;
    const auto lat = square_lattice(order, L, 1.6, 0.4);
    const auto mode = analytic_zero_mode(lat);
    std::uniform_int_distribution<int> cell(1, L), sub(1, 2);
    for (int trial = 0; trial < 20; ++trial) {
      Site b{std::vector<int>(order), sub(rng)};
      for (auto& m : b.cell) m = cell(rng);
      if (b == first_corner(lat)) continue;
      const PerturbationSpec pert{0.3, first_corner(lat), b};
      const Eigen::MatrixXcd HG = perturbation_matrix(lat, pert);
      const cplx direct = cplx(mode.left.transpose() * HG * mode.right) / mode.pairing();
      const auto est = shift_first_order(lat, pert);
      CHECK(std::abs(est.signed_shift - direct) <= 1e-12 * std::max(std::abs(direct), 1e-300));
    }
  }
}

TEST_CASE("Shifts of two measurands add", "[sensing][property]") {
  const auto lat = square_lattice(2, 7, 1.5, 0.5);
  const PerturbationSpec p1{2e-9, first_corner(lat), last_corner(lat)};
  const PerturbationSpec p2{5e-9, first_corner(lat), Site{{5, 3}, 1}};
  const auto s1 = shift_first_order(lat, p1);
  const auto s2 = shift_first_order(lat, p2);
  const auto both = shift_first_order(lat, std::vector<PerturbationSpec>{p1, p2});
  CHECK(std::abs(both.signed_shift - (s1.signed_shift + s2.signed_shift)) < 1e-14 * both.delta_e);

  const auto exact = shift_exact(lat, std::vector<PerturbationSpec>{p1, p2});
  CHECK(exact.flag != Conditioning::unreliable);
  CHECK(rel(exact.delta_e, both.delta_e) < 0.01);
}

TEST_CASE("Exact shift is linear in the unsaturated regime", "[sensing][property]") {
  for (int L : {5, 9, 13}) {
    const auto lat = square_lattice(2, L, 1.9, 0.1);
    const double gamma = 1e-3 / shift_first_order(lat, corner_to_corner(lat, 1.0)).delta_e;
    const auto one = shift_exact(lat, corner_to_corner(lat, gamma));
    const auto two = shift_exact(lat, corner_to_corner(lat, 2 * gamma));
    REQUIRE(one.flag != Conditioning::unreliable);
    REQUIRE(two.flag != Conditioning::unreliable);
    const double ratio = two.delta_e / one.delta_e;
    CHECK(ratio >= 1.99);
    CHECK(ratio <= 2.01);
  }
}

TEST_CASE("Exact shift grows exponentially with corner distance", "[sensing][property]") {
  // Fit ln(dE/gamma) + ln(chi+1)^2 against chi_x + chi_y over unsaturated sizes.
  const double kappa = std::log(1.4 / 0.6);
  std::vector<double> xs, ys;
  for (int L = 3; L <= 11; L += 2) {
    const auto lat = square_lattice(2, L, 1.4, 0.6);
    const double gamma = 1e-6;
    const auto exact = shift_exact(lat, corner_to_corner(lat, gamma));
    REQUIRE(exact.flag != Conditioning::unreliable);
    const double chi = 0.5 * (L - 1);
    xs.push_back(2 * chi);
    ys.push_back(std::log(exact.delta_e / gamma) + 2 * std::log(chi + 1));
  }
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(rel(slope, kappa) < 0.05);
}

TEST_CASE("First-order slope against size", "[sensing]") {
  const double kappa = std::log(19.0);
  for (int L = 5; L <= 21; L += 2) {
    const auto a = shift_first_order(square_lattice(2, L, 1.9, 0.1), corner_to_corner(square_lattice(2, L, 1.9, 0.1), 1.0));
    const auto b = shift_first_order(square_lattice(2, L + 2, 1.9, 0.1),
                                     corner_to_corner(square_lattice(2, L + 2, 1.9, 0.1), 1.0));
    const double step = std::log(b.asymptotic(1.0) / a.asymptotic(1.0)) -
                        std::log(b.prefactor / a.prefactor);
    CHECK(std::abs(step / 2.0 - kappa) < 1e-10);
  }
}

TEST_CASE("Closed form covers higher orders", "[sensing]") {
  const auto third = shift_first_order(square_lattice(3, 5, 1.9, 0.1),
                                       corner_to_corner(square_lattice(3, 5, 1.9, 0.1), 1e-12));
  CHECK(rel(shift_closed_form({19, 19, 19}, 2, 1e-12).delta_e, third.delta_e) < 1e-12);
  const auto fifth = shift_closed_form({3, 3, 3, 3, 3}, 1, 1.0);
  CHECK(rel(fifth.delta_e, (243.0 + 1.0 / 243.0) / 32.0) < 1e-14);
  CHECK_THROWS_AS(shift_closed_form({0.5}, 1, 1.0), ValidationError);
}

TEST_CASE("Reversed skin is rejected", "[sensing]") {
  const auto lat = square_lattice(2, 5, 0.1, 1.9);
  CHECK_THROWS_AS(shift_first_order(lat, corner_to_corner(lat, 1.0)), ValidationError);
  CHECK_THROWS_AS(measurement_range(lat), ValidationError);
  const auto flat = square_lattice(2, 5, 1.0, 1.0);
  CHECK_THROWS_AS(measurement_range(flat), ValidationError);
}

TEST_CASE("Saturation onsets at ratio 19", "[sensing][oracle][slow]") {
  CurveOptions opts;
  opts.threads = 4;
  const auto lat = square_lattice(2, 3, 1.9, 0.1);
  const auto early = sensitivity_curve(lat, {13, 15, 17, 19}, {1e-18}, opts);
  const auto late = sensitivity_curve(lat, {19, 21, 23, 25}, {1e-26}, opts);
  const auto onset18 = saturation_onset(early, 1e-18);
  const auto onset26 = saturation_onset(late, 1e-26);
  REQUIRE(onset18.has_value());
  REQUIRE(onset26.has_value());
  CHECK(std::abs(*onset18 - 17) <= 2);
  CHECK(std::abs(*onset26 - 23) <= 2);
  // Growth from 15 to 17 is far below the first-order factor of 19^2.
  CHECK(early[2].exact / early[1].exact < 0.2 * early[2].first_order / early[1].first_order);
}

TEST_CASE("Plain frame fails its conditioning check at large skin range", "[sensing]") {
  const auto lat = square_lattice(2, 17, 1.9, 0.1);
  ExactOptions plain;
  plain.frame = Frame::plain;
  CHECK(shift_exact(lat, corner_to_corner(lat, 1e-18), plain).flag == Conditioning::unreliable);
  CHECK(shift_exact(lat, corner_to_corner(lat, 1e-18)).flag == Conditioning::gauged);
}

TEST_CASE("Sensitivity curve is independent of thread count", "[sensing]") {
  const auto lat = square_lattice(2, 3, 1.9, 0.1);
  CurveOptions one, four;
  four.threads = 4;
  const auto a = sensitivity_curve(lat, {5, 7, 9}, {1e-12, 1e-14}, one);
  const auto b = sensitivity_curve(lat, {5, 7, 9}, {1e-12, 1e-14}, four);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].size == b[i].size);
    CHECK(a[i].gamma == b[i].gamma);
    CHECK(a[i].exact == b[i].exact);
  }
  CHECK_THROWS_AS(sensitivity_curve(lat, {7, 5}, {1.0}), ValidationError);
  CHECK_THROWS_AS(sensitivity_curve(lat, {4}, {1.0}), ValidationError);
}

TEST_CASE("Lower limit of the measurement range", "[sensing]") {
  const double threshold = default_range_threshold();
  const auto lat = square_lattice(2, 13, 2.0, 0.1);
  const auto unit = shift_first_order(lat, corner_to_corner(lat, 1.0));
  CHECK(rel(threshold / unit.asymptotic(1.0), 1e-33) < 1e-12);

  // Doubling K divides the lower limit by e^{Delta K}.
  const auto wide = square_lattice(2, 25, 2.0, 0.1);
  const auto unit_wide = shift_first_order(wide, corner_to_corner(wide, 1.0));
  const double ratio = (threshold / unit_wide.asymptotic(1.0)) / (threshold / unit.asymptotic(1.0));
  const double expected = std::exp(-(unit_wide.K - unit.K)) * unit.prefactor / unit_wide.prefactor;
  CHECK(rel(ratio, expected) < 1e-12);
}

TEST_CASE("Range upper limit: bisection agrees with a grid scan", "[sensing][oracle]") {
  const auto lat = square_lattice(2, 5, 1.9, 0.1);
  const auto range = measurement_range(lat);
  REQUIRE(range.upper_resolved);
  REQUIRE(!range.empty());

  auto saturated = [&](double lg) {
    const auto pert = corner_to_corner(lat, std::pow(10.0, lg));
    const auto exact = shift_exact(lat, pert);
    const double first = shift_first_order(lat, pert).delta_e;
    return exact.flag != Conditioning::unreliable && (first - exact.delta_e) / first > range.deviation_cap;
  };
  const double step = 0.01;
  double lg = std::log10(range.upper) - 0.5;
  while (!saturated(lg)) lg += step;
  CHECK(std::abs(lg - std::log10(range.upper)) <= step + 1e-3);
}

TEST_CASE("Topological protection contrast at 13x13", "[sensing]") {
  const auto pc = protection_contrast(square_lattice(2, 13, 1.0, 0.9), 1e-12);
  CHECK(pc.zero_mode_change < 1e-6);
  CHECK(std::abs(pc.finite_before - 0.68) < 0.05);
  // Followed continuously, the finite-energy mode barely moves either.
  CHECK(pc.finite_mode_change < 1e-6);
  // Re-picking the nearest level lands on a different degenerate copy.
  CHECK(pc.finite_mode_change_untracked > 0.1);
}
