#pragma once

#include <optional>
#include <vector>

#include "nhsense/spectral.hpp"

namespace nhsense {

/// Symmetric measurand coupling of strength `gamma` between two sites.
struct PerturbationSpec {
  double gamma = 0.0;
  Site site_a;
  Site site_b;
};

/// Measurand between the first corner (1,...,1) and the opposite corner, both sublattice 1.
PerturbationSpec corner_to_corner(const LatticeSpec& lattice, double gamma);

enum class ShiftMethod { first_order, exact };

struct ShiftEstimate {
  double delta_e = 0.0;            ///< |Delta E|
  cplx signed_shift{0.0, 0.0};     ///< Delta E with its phase
  double K = 0.0;                  ///< sum_j kappa_j * (chi_j(b) - chi_j(a))
  std::vector<double> kappa;       ///< ln(lambda_j / lambda'_j)
  std::vector<double> chi;         ///< (m_j(b) - 1) / 2
  double prefactor = 0.0;          ///< 1 / <psi_L|psi_R>
  ShiftMethod method = ShiftMethod::first_order;
  Conditioning flag = Conditioning::well_conditioned;
  double error_bound = 0.0;        ///< eigenvalue forward-error bound (exact method)
  double tracked_overlap = 0.0;    ///< overlap of the tracked vector with the analytic mode

  /// prefactor * e^K * gamma: the large-ratio limit of the first-order shift.
  double asymptotic(double gamma) const;
};

Eigen::MatrixXcd perturbation_matrix(const LatticeSpec& lattice, const PerturbationSpec& pert);
Eigen::MatrixXcd perturbation_matrix(const LatticeSpec& lattice, const std::vector<PerturbationSpec>& perts);

/// <psi_L|H_G|psi_R> / <psi_L|psi_R> from the analytic modes (orders 1..3).
ShiftEstimate shift_first_order(const LatticeSpec& lattice, const PerturbationSpec& pert);
ShiftEstimate shift_first_order(const LatticeSpec& lattice, const std::vector<PerturbationSpec>& perts);

/// Closed form for any order with uniform chi on every axis and corner attachment.
ShiftEstimate shift_closed_form(const std::vector<double>& ratios, int chi, double gamma);

enum class Frame { automatic, plain, gauged };

struct ExactOptions {
  Frame frame = Frame::automatic;
  SolverOptions solver;
  int candidates = 6;  ///< smallest-|E| eigenvalues examined when tracking the mode
};

/// Exact diagonalization of H + H_G, tracking the mode that overlaps the analytic psi_R.
ShiftEstimate shift_exact(const LatticeSpec& lattice, const PerturbationSpec& pert,
                          const ExactOptions& options = {});
ShiftEstimate shift_exact(const LatticeSpec& lattice, const std::vector<PerturbationSpec>& perts,
                          const ExactOptions& options = {});

struct SensitivityPoint {
  int size = 0;
  double gamma = 0.0;
  double first_order = 0.0;
  double exact = 0.0;
  bool reliable = true;
  bool saturated = false;
};

struct CurveOptions {
  double deviation_cap = 0.10;
  unsigned threads = 1;
  ExactOptions exact;
};

/// Sweeps square lattices of the template's order and couplings over sizes x gammas.
/// Rows are ordered size-major exactly as given, independent of thread count.
std::vector<SensitivityPoint> sensitivity_curve(const LatticeSpec& lattice_template,
                                                const std::vector<int>& sizes,
                                                const std::vector<double>& gammas,
                                                const CurveOptions& options = {});

/// Smallest size whose exact shift is reliable and falls more than the cap below first order.
std::optional<int> saturation_onset(const std::vector<SensitivityPoint>& curve, double gamma);

struct MeasurementRange {
  double lower = 0.0;
  double upper = 0.0;
  double threshold = 0.0;
  double deviation_cap = 0.0;
  bool upper_resolved = false;  ///< false when no reliable unsaturated point was found
  bool empty() const { return !(lower <= upper); }
};

/// Detectability floor that puts the lower limit of a ratio-20, 13x13 lattice at 1e-33.
double default_range_threshold();

MeasurementRange measurement_range(const LatticeSpec& lattice, double threshold = default_range_threshold(),
                                   double deviation_cap = 0.10, const ExactOptions& options = {});

/// Relative profile change of the corner zero mode and of the mode nearest `finite_target`
/// when the corner-to-corner measurand `gamma` is attached. Both tracked changes follow one
/// eigenvector by overlap; the untracked one re-picks the nearest eigenvalue after the change.
struct ProtectionContrast {
  double zero_mode_change = 0.0;
  double finite_mode_change = 0.0;
  double finite_mode_change_untracked = 0.0;
  cplx finite_before{0.0, 0.0};
  cplx finite_after{0.0, 0.0};
};

ProtectionContrast protection_contrast(const LatticeSpec& lattice, double gamma, cplx finite_target = 0.68);

}  // namespace nhsense
