#pragma once

#include <vector>

#include "nhsense/common.hpp"

namespace nhsense {

/// Hopping pair along one axis. `forward` is the amplitude of the +axis hop on
/// sublattice 1, `backward` the amplitude of the reverse hop.
struct AxisCoupling {
  double forward = 1.0;
  double backward = 1.0;

  double ratio() const { return forward / backward; }
  bool operator==(const AxisCoupling&) const = default;
};

/// Geometry and couplings of a non-reciprocal two-sublattice lattice.
struct LatticeSpec {
  int order = 2;
  std::vector<int> extent;              ///< cells per axis
  std::vector<AxisCoupling> couplings;  ///< one pair per axis
  double intra_cell = 0.0;              ///< reciprocal 1<->2 coupling inside a cell

  /// Throws ValidationError on malformed input. Real-space use needs order <= 3.
  void validate() const;
  Index cells() const;
  Index dim() const { return 2 * cells(); }
  bool operator==(const LatticeSpec&) const = default;
};

/// Uniform lattice: same extent and coupling pair on every axis.
LatticeSpec square_lattice(int order, int extent, double forward, double backward);

enum class Boundary { open, periodic };

/// A lattice site addressed by 1-based cell coordinates and sublattice 1 or 2.
struct Site {
  std::vector<int> cell;
  int sublattice = 1;
  bool operator==(const Site&) const = default;
};

/// Row index of a site. Axis 1 varies fastest, then sublattice is the lowest bit:
/// index = (((m_N-1)*L_{N-1} + ...)*L_1 + (m_1-1))*2 + (s-1).
Index site_index(const LatticeSpec& spec, const Site& site);
Site site_at(const LatticeSpec& spec, Index row);

/// Corner cell (1,...,1) and the opposite corner (L_1,...,L_N), both on sublattice 1.
Site first_corner(const LatticeSpec& spec);
Site last_corner(const LatticeSpec& spec);

struct BlochHamiltonian {
  std::vector<double> k;
  Eigen::Matrix2cd matrix;
};

/// Two-band Bloch matrix for order 2 or 3.
BlochHamiltonian build_bloch(const LatticeSpec& spec, const std::vector<double>& k);

/// Real-space nearest-neighbour matrix (dimension 2 * prod(L_j)).
Eigen::MatrixXcd build_hamiltonian(const LatticeSpec& spec, Boundary boundary = Boundary::open);

struct ZeroMode {
  enum class Origin { analytic, numeric };

  cplx eigenvalue{0.0, 0.0};
  Eigen::VectorXcd right;
  /// Row-acting left vector stored as a column: left.transpose() * H = E * left.transpose().
  Eigen::VectorXcd left;
  double residual_right = 0.0;
  double residual_left = 0.0;
  Origin origin = Origin::analytic;

  /// Bilinear pairing left^T right.
  cplx pairing() const { return left.transpose() * right; }
};

/// Closed-form corner zero mode. Needs order 2 or 3, odd extents, no intra-cell term.
ZeroMode analytic_zero_mode(const LatticeSpec& spec);

/// Relative residuals ||H r - E r|| / ||r|| and ||l^T H - E l^T|| / ||l||.
std::pair<double, double> mode_residuals(const Eigen::MatrixXcd& H, cplx eigenvalue,
                                         const Eigen::VectorXcd& right,
                                         const Eigen::VectorXcd& left);

/// Diagonal of the similarity that flattens the skin profile:
/// g(site) = prod_j (forward_j/backward_j)^((m_j-1)/2). May overflow to inf.
/// `axis1_sign = -1` reverses the axis-1 exponent, which flattens the partner zero mode
/// living on sublattice 2 (axis-1 hops run the other way there).
Eigen::VectorXd skin_gauge(const LatticeSpec& spec, int axis1_sign = 1);

/// Largest accumulated skin factor max_j ratio_j^(L_j-1) (or its inverse when ratio<1).
double skin_dynamic_range(const LatticeSpec& spec);

}  // namespace nhsense
