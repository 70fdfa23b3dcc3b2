#pragma once

#include <optional>
#include <vector>

#include "nhsense/lattice.hpp"

namespace nhsense {

enum class Conditioning { well_conditioned, gauged, unreliable };

const char* to_string(Conditioning flag);

/// Full eigen-decomposition with biorthonormal left/right pairs:
/// M right.col(i) = E_i right.col(i), left.col(i)^T M = E_i left.col(i)^T, left^T right = I.
struct Spectrum {
  Eigen::VectorXcd eigenvalues;
  Eigen::MatrixXcd right;
  Eigen::MatrixXcd left;
  /// Eigenvalue condition s_i = |l_i^T r_i| / (||l_i|| ||r_i||); 1 for normal matrices.
  Eigen::VectorXd condition;
  double matrix_norm = 0.0;
  Conditioning condition_flag = Conditioning::well_conditioned;

  Index size() const { return eigenvalues.size(); }
  /// First-order forward error bound on eigenvalue i.
  double error_bound(Index i) const;
};

struct SolverOptions {
  Index max_dim = 2000;
  /// A decomposition is unreliable when some eigenvalue bound exceeds this fraction of ||M||.
  double reliability_tol = 1e-6;
  /// Route through the skin gauge once max_j ratio_j^(L_j-1) exceeds this.
  double gauge_threshold = 1e12;
  /// Relative eigenvalue gap below which pairs are treated as one degenerate cluster.
  double degeneracy_tol = 1e-9;
};

Spectrum eigendecompose(const Eigen::MatrixXcd& M, const SolverOptions& options = {});

/// Diagonalizes G^-1 M G with G = diag(gauge) and maps vectors back to the original frame.
Spectrum gauged_eigendecompose(const Eigen::MatrixXcd& M, const Eigen::VectorXd& gauge,
                               const SolverOptions& options = {});
Spectrum gauged_eigendecompose(const Eigen::MatrixXcd& M, const LatticeSpec& spec,
                               const SolverOptions& options = {});

/// Skin gauge restricted to one irreducible block of a lattice matrix. A block anchored on the
/// sublattice-2 site of the first cell carries the partner skin profile, whose axis-1 decay
/// runs the other way, so it gets the reversed gauge. Normalized to a minimum of 1.
Eigen::VectorXd lattice_block_gauge(const LatticeSpec& spec, const std::vector<Index>& rows);

/// Plain solver for moderate skin ranges, gauged solver beyond options.gauge_threshold.
Spectrum decompose_lattice_matrix(const Eigen::MatrixXcd& M, const LatticeSpec& spec,
                                  const SolverOptions& options = {});

/// Eigenvalues only (no vectors), for scans where vectors are refined on demand.
Eigen::VectorXcd eigenvalues_only(const Eigen::MatrixXcd& M);

/// One eigen-pair polished by inverse iteration from an eigenvalue estimate.
struct EigenPair {
  cplx value;
  Eigen::VectorXcd right;
  Eigen::VectorXcd left;
  double condition = 0.0;
};
EigenPair refine_pair(const Eigen::MatrixXcd& M, cplx estimate, int iterations = 3);

/// G^-1 M G for a positive diagonal G, computed entrywise without forming G.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> similarity(
    const Eigen::MatrixBase<Derived>& M, const Eigen::VectorXd& g) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(M.rows(), M.cols());
  for (Index j = 0; j < M.cols(); ++j)
    for (Index i = 0; i < M.rows(); ++i) out(i, j) = M(i, j) * (g(j) / g(i));
  return out;
}

/// Connected components of the sparsity graph of M, each sorted ascending.
std::vector<std::vector<Index>> coupled_blocks(const Eigen::MatrixXcd& M);

Eigen::MatrixXcd principal_submatrix(const Eigen::MatrixXcd& M, const std::vector<Index>& rows);

struct ZeroModeQuery {
  cplx target{0.0, 0.0};
  /// Maximum |E - target|; negative selects 0.05 * (1 + spectral radius).
  double tolerance = -1.0;
  /// Breaks ties inside a degenerate cluster by overlap with this right vector.
  std::optional<Eigen::VectorXcd> reference;
};

/// Eigen-pair nearest the target, with residuals evaluated against `source`.
ZeroMode numeric_zero_mode(const Spectrum& spectrum, const Eigen::MatrixXcd& source,
                           const ZeroModeQuery& query = {});

/// |<a, b>| / (||a|| ||b||) with complex conjugation on `a`.
double overlap(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b);

struct SiteDensity {
  Eigen::VectorXd weights;
};

SiteDensity density_of_states(const ZeroMode& mode);

}  // namespace nhsense
