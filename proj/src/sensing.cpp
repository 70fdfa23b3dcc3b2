#include "nhsense/sensing.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include <Eigen/Eigenvalues>

namespace nhsense {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_forward_skin(const LatticeSpec& lattice) {
  for (std::size_t j = 0; j < lattice.couplings.size(); ++j)
    if (!(lattice.couplings[j].ratio() > 1.0))
      throw ValidationError("skin direction reversed on axis " + std::to_string(j + 1) +
                            " (first-order formulas assume forward > backward)");
}

void require_perturbations(const LatticeSpec& lattice, const std::vector<PerturbationSpec>& perts) {
  require(!perts.empty(), "at least one measurand is needed");
  for (const auto& p : perts) {
    require(p.gamma >= 0 && std::isfinite(p.gamma), "measurand strength must be finite and >= 0");
    const Index a = site_index(lattice, p.site_a);
    const Index b = site_index(lattice, p.site_b);
    require(a != b || p.gamma == 0.0, "measurand sites must be distinct");
  }
}

double chi_of(int m) { return 0.5 * (m - 1); }

/// Fills the (kappa, chi, K, prefactor) decomposition from the first measurand's sites.
void decompose(const LatticeSpec& lattice, const PerturbationSpec& p, cplx pairing, ShiftEstimate& est) {
  est.kappa.clear();
  est.chi.clear();
  est.K = 0.0;
  for (std::size_t j = 0; j < lattice.couplings.size(); ++j) {
    const double kappa = std::log(lattice.couplings[j].ratio());
    est.kappa.push_back(kappa);
    est.chi.push_back(chi_of(p.site_b.cell[j]));
    est.K += kappa * (chi_of(p.site_b.cell[j]) - chi_of(p.site_a.cell[j]));
  }
  est.prefactor = 1.0 / pairing.real();
}

struct Tracked {
  cplx value;
  double overlap = 0.0;
  double bound = 0.0;
  bool gauged = false;
};

/// Follows the corner zero mode of H inside the block that holds `anchor`.
Tracked track_zero_mode(const LatticeSpec& lattice, const Eigen::MatrixXcd& H, const Eigen::VectorXcd& reference,
                        Index anchor, const ExactOptions& options) {
  std::vector<Index> rows;
  for (auto& block : coupled_blocks(H))
    if (std::binary_search(block.begin(), block.end(), anchor)) rows = std::move(block);
  require(static_cast<Index>(rows.size()) <= options.solver.max_dim,
          "block dimension " + std::to_string(rows.size()) + " exceeds solver cap");

  Tracked out;
  // The similarity is exact, so any skin gradient at all is worth flattening.
  out.gauged = options.frame == Frame::gauged ||
               (options.frame == Frame::automatic && skin_dynamic_range(lattice) > 1.0);
  const Eigen::VectorXd g = out.gauged ? lattice_block_gauge(lattice, rows)
                                       : Eigen::VectorXd::Ones(static_cast<Index>(rows.size()));
  const Eigen::MatrixXcd B = similarity(principal_submatrix(H, rows), g);
  Eigen::VectorXcd ref(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) ref(static_cast<Index>(i)) = reference(rows[i]) / g(static_cast<Index>(i));

  const Eigen::VectorXcd values = eigenvalues_only(B);
  std::vector<Index> order(values.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index x, Index y) { return std::abs(values(x)) < std::abs(values(y)); });
  const std::size_t n_candidates = std::min<std::size_t>(order.size(), std::max(1, options.candidates));

  double best = -1.0;
  EigenPair best_pair;
  Index best_index = order.front();
  for (std::size_t c = 0; c < n_candidates; ++c) {
    EigenPair pair = refine_pair(B, values(order[c]));
    const double ov = overlap(ref, pair.right);
    if (ov > best) {
      best = ov;
      best_index = order[c];
      best_pair = std::move(pair);
    }
  }
  if (best < 0.1 && order.size() >= 2) {
    // No candidate resembles the analytic mode: take the larger of the two smallest shifts.
    best_index = std::abs(values(order[1])) > std::abs(values(order[0])) ? order[1] : order[0];
    best_pair = refine_pair(B, values(best_index));
  }
  out.value = values(best_index);
  out.overlap = best;
  out.bound = best_pair.condition > 0 ? kEps * B.norm() / best_pair.condition
                                      : std::numeric_limits<double>::infinity();
  return out;
}

double profile_change(const ZeroMode& before, const ZeroMode& after) {
  const auto w0 = density_of_states(before).weights;
  const auto w1 = density_of_states(after).weights;
  return (w1 - w0).norm() / w0.norm();
}

}  // namespace

double ShiftEstimate::asymptotic(double gamma) const { return prefactor * std::exp(K) * gamma; }

PerturbationSpec corner_to_corner(const LatticeSpec& lattice, double gamma) {
  return PerturbationSpec{gamma, first_corner(lattice), last_corner(lattice)};
}

Eigen::MatrixXcd perturbation_matrix(const LatticeSpec& lattice, const std::vector<PerturbationSpec>& perts) {
  lattice.validate();
  require_perturbations(lattice, perts);
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(lattice.dim(), lattice.dim());
  for (const auto& p : perts) {
    if (p.gamma == 0.0) continue;
    const Index a = site_index(lattice, p.site_a);
    const Index b = site_index(lattice, p.site_b);
    M(a, b) += p.gamma;
    M(b, a) += p.gamma;
  }
  return M;
}

Eigen::MatrixXcd perturbation_matrix(const LatticeSpec& lattice, const PerturbationSpec& pert) {
  return perturbation_matrix(lattice, std::vector<PerturbationSpec>{pert});
}

ShiftEstimate shift_first_order(const LatticeSpec& lattice, const std::vector<PerturbationSpec>& perts) {
  lattice.validate();
  require_forward_skin(lattice);
  require_perturbations(lattice, perts);
  const ZeroMode mode = analytic_zero_mode(lattice);
  const cplx pairing = mode.pairing();

  cplx numerator = 0.0;
  for (const auto& p : perts) {
    const Index a = site_index(lattice, p.site_a);
    const Index b = site_index(lattice, p.site_b);
    numerator += p.gamma * (mode.left(a) * mode.right(b) + mode.left(b) * mode.right(a));
  }
  ShiftEstimate est;
  est.method = ShiftMethod::first_order;
  est.signed_shift = numerator / pairing;
  est.delta_e = std::abs(est.signed_shift);
  est.tracked_overlap = 1.0;
  decompose(lattice, perts.front(), pairing, est);
  return est;
}

ShiftEstimate shift_first_order(const LatticeSpec& lattice, const PerturbationSpec& pert) {
  return shift_first_order(lattice, std::vector<PerturbationSpec>{pert});
}

ShiftEstimate shift_closed_form(const std::vector<double>& ratios, int chi, double gamma) {
  require(!ratios.empty(), "closed form needs at least one axis");
  require(chi >= 0, "chi must be >= 0");
  require(gamma >= 0, "measurand strength must be >= 0");
  ShiftEstimate est;
  est.method = ShiftMethod::first_order;
  double log_R = 0.0;
  for (double r : ratios) {
    if (!(r > 1.0)) throw ValidationError("skin direction reversed (ratio <= 1)");
    est.kappa.push_back(std::log(r));
    est.chi.push_back(chi);
    log_R += chi * std::log(r);
  }
  est.K = log_R;
  est.prefactor = std::pow(chi + 1.0, -static_cast<double>(ratios.size()));
  est.delta_e = gamma * est.prefactor * (std::exp(log_R) + std::exp(-log_R));
  // Corner amplitudes alternate in sign with the total number of half-steps.
  const int total = chi * static_cast<int>(ratios.size());
  est.signed_shift = (total % 2 ? -1.0 : 1.0) * est.delta_e;
  est.tracked_overlap = 1.0;
  return est;
}

ShiftEstimate shift_exact(const LatticeSpec& lattice, const std::vector<PerturbationSpec>& perts,
                          const ExactOptions& options) {
  lattice.validate();
  require_perturbations(lattice, perts);
  const ZeroMode mode = analytic_zero_mode(lattice);
  const Eigen::MatrixXcd H = build_hamiltonian(lattice) + perturbation_matrix(lattice, perts);
  const Tracked t = track_zero_mode(lattice, H, mode.right, site_index(lattice, perts.front().site_a), options);

  ShiftEstimate est;
  est.method = ShiftMethod::exact;
  est.signed_shift = t.value;
  est.delta_e = std::abs(t.value);
  est.error_bound = t.bound;
  est.tracked_overlap = t.overlap;
  decompose(lattice, perts.front(), mode.pairing(), est);
  // With no measurand the shift is zero by construction and only the absolute bound matters.
  bool unloaded = true;
  for (const auto& p : perts) unloaded = unloaded && p.gamma == 0.0;
  const bool reliable = unloaded ? t.bound <= 1e-12 * std::max(1.0, H.norm()) : t.bound <= 0.1 * est.delta_e;
  est.flag = !reliable ? Conditioning::unreliable : t.gauged ? Conditioning::gauged : Conditioning::well_conditioned;
  return est;
}

ShiftEstimate shift_exact(const LatticeSpec& lattice, const PerturbationSpec& pert, const ExactOptions& options) {
  return shift_exact(lattice, std::vector<PerturbationSpec>{pert}, options);
}

std::vector<SensitivityPoint> sensitivity_curve(const LatticeSpec& lattice_template, const std::vector<int>& sizes,
                                                const std::vector<double>& gammas, const CurveOptions& options) {
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    require(sizes[i] % 2 == 1 && sizes[i] >= 1, "sizes must be odd and positive");
    require(i == 0 || sizes[i] > sizes[i - 1], "sizes must be ascending");
  }
  std::vector<SensitivityPoint> out(sizes.size() * gammas.size());
  for (std::size_t i = 0; i < sizes.size(); ++i)
    for (std::size_t j = 0; j < gammas.size(); ++j) out[i * gammas.size() + j] = {sizes[i], gammas[j]};

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < out.size(); k = next++) {
      auto& pt = out[k];
      LatticeSpec lat = lattice_template;
      lat.extent.assign(lat.order, pt.size);
      const auto pert = corner_to_corner(lat, pt.gamma);
      pt.first_order = shift_first_order(lat, pert).delta_e;
      const auto exact = shift_exact(lat, pert, options.exact);
      pt.exact = exact.delta_e;
      pt.reliable = exact.flag != Conditioning::unreliable;
      pt.saturated = pt.reliable && pt.first_order > 0 &&
                     (pt.first_order - pt.exact) / pt.first_order > options.deviation_cap;
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(out.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return out;
}

std::optional<int> saturation_onset(const std::vector<SensitivityPoint>& curve, double gamma) {
  std::optional<int> onset;
  for (const auto& pt : curve)
    if (pt.gamma == gamma && pt.saturated && (!onset || pt.size < *onset)) onset = pt.size;
  return onset;
}

double default_range_threshold() {
  // Lower limit 1e-33 for ratio 20 on 13x13: C e^K = 20^12 / 7^2.
  return 1e-33 * std::pow(20.0, 12) / 49.0;
}

MeasurementRange measurement_range(const LatticeSpec& lattice, double threshold, double deviation_cap,
                                   const ExactOptions& options) {
  lattice.validate();
  require_forward_skin(lattice);
  require(threshold > 0, "threshold must be > 0");
  require(deviation_cap > 0, "deviation cap must be > 0");

  MeasurementRange range;
  range.threshold = threshold;
  range.deviation_cap = deviation_cap;
  const auto unit = shift_first_order(lattice, corner_to_corner(lattice, 1.0));
  range.lower = threshold / unit.asymptotic(1.0);

  enum class State { unresolved, linear, saturated };
  auto classify = [&](double log_gamma) {
    const auto pert = corner_to_corner(lattice, std::pow(10.0, log_gamma));
    const double first = shift_first_order(lattice, pert).delta_e;
    const auto exact = shift_exact(lattice, pert, options);
    if (exact.flag == Conditioning::unreliable) return State::unresolved;
    return (first - exact.delta_e) / first > deviation_cap ? State::saturated : State::linear;
  };

  // Walk up in decades from the lower limit until the exact shift departs from first order.
  const double stop = std::log10(1e3 * std::max(1.0, build_hamiltonian(lattice).norm()) / unit.asymptotic(1.0));
  double last_linear = std::numeric_limits<double>::quiet_NaN();
  double hi = std::numeric_limits<double>::quiet_NaN();
  for (double lg = std::floor(std::log10(range.lower)); lg <= stop + 1; lg += 1.0) {
    const State s = classify(lg);
    if (s == State::linear) last_linear = lg;
    if (s == State::saturated) {
      hi = lg;
      break;
    }
  }
  if (std::isnan(hi)) {
    range.upper = std::pow(10.0, stop + 1);
    return range;
  }
  if (std::isnan(last_linear)) {
    range.upper = std::pow(10.0, hi);
    return range;
  }
  double lo = last_linear;
  while (hi - lo > 1e-3) {
    const double mid = 0.5 * (lo + hi);
    (classify(mid) == State::saturated ? hi : lo) = mid;
  }
  range.upper = std::pow(10.0, hi);
  range.upper_resolved = true;
  return range;
}

ProtectionContrast protection_contrast(const LatticeSpec& lattice, double gamma, cplx finite_target) {
  const Eigen::MatrixXcd H0 = build_hamiltonian(lattice);
  const Eigen::MatrixXcd H1 = H0 + perturbation_matrix(lattice, corner_to_corner(lattice, gamma));

  // Every level has one copy per symmetry block. Follow the copies that share a block with the
  // measurand; the other copies do not feel it at all.
  std::vector<Index> rows;
  for (auto& block : coupled_blocks(H1))
    if (std::binary_search(block.begin(), block.end(), site_index(lattice, first_corner(lattice))))
      rows = std::move(block);
  const Eigen::MatrixXcd B0 = principal_submatrix(H0, rows);
  const Eigen::MatrixXcd B1 = principal_submatrix(H1, rows);
  const Eigen::VectorXd g = lattice_block_gauge(lattice, rows);
  const Spectrum s0 = gauged_eigendecompose(B0, g);
  const Spectrum s1 = gauged_eigendecompose(B1, g);

  ProtectionContrast out;
  const Eigen::VectorXcd analytic = analytic_zero_mode(lattice).right;
  ZeroModeQuery zq;
  zq.reference = Eigen::VectorXcd(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) (*zq.reference)(static_cast<Index>(i)) = analytic(rows[i]);
  out.zero_mode_change = profile_change(numeric_zero_mode(s0, B0, zq), numeric_zero_mode(s1, B1, zq));

  ZeroModeQuery fq;
  fq.target = finite_target;
  const ZeroMode before = numeric_zero_mode(s0, B0, fq);
  out.finite_before = before.eigenvalue;
  fq.reference = before.right;
  const ZeroMode after = numeric_zero_mode(s1, B1, fq);
  out.finite_after = after.eigenvalue;
  out.finite_mode_change = profile_change(before, after);

  // Nearest-to-target picks from one unsplit solve per matrix. The level is doubly degenerate,
  // so the solver is free to return any mixture of the two copies before the measurand and a
  // pure copy after it.
  auto nearest = [&](const Eigen::MatrixXcd& M) {
    const Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(M);
    Index k = 0;
    (solver.eigenvalues().array() - finite_target).abs().minCoeff(&k);
    ZeroMode mode;
    mode.eigenvalue = solver.eigenvalues()(k);
    mode.right = solver.eigenvectors().col(k);
    return mode;
  };
  out.finite_mode_change_untracked = profile_change(nearest(H0), nearest(H1));
  return out;
}

}  // namespace nhsense
