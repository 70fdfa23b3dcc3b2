#include "nhsense/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nhsense {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

/// Groups indices whose eigenvalues lie within `tol` of each other (single linkage).
std::vector<std::vector<Index>> eigenvalue_clusters(const Eigen::VectorXcd& values, double tol) {
  const Index n = values.size();
  std::vector<int> label(n, -1);
  std::vector<std::vector<Index>> clusters;
  for (Index i = 0; i < n; ++i) {
    if (label[i] >= 0) continue;
    label[i] = static_cast<int>(clusters.size());
    clusters.push_back({i});
    for (std::size_t q = 0; q < clusters.back().size(); ++q) {
      const Index a = clusters.back()[q];
      for (Index b = 0; b < n; ++b)
        if (label[b] < 0 && std::abs(values(a) - values(b)) <= tol) {
          label[b] = label[i];
          clusters.back().push_back(b);
        }
    }
  }
  return clusters;
}

void finish_spectrum(Spectrum& s, const SolverOptions& options) {
  const Index n = s.size();
  const double tol = options.degeneracy_tol * std::max(1.0, s.matrix_norm);
  for (const auto& cluster : eigenvalue_clusters(s.eigenvalues, tol)) {
    const Index k = static_cast<Index>(cluster.size());
    Eigen::MatrixXcd R(n, k), L(n, k);
    for (Index q = 0; q < k; ++q) {
      R.col(q) = s.right.col(cluster[q]);
      L.col(q) = s.left.col(cluster[q]);
    }
    const Eigen::MatrixXcd P = L.transpose() * R;
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(P);
    if (lu.rank() < k) {
      s.condition_flag = Conditioning::unreliable;
      continue;
    }
    L = L * lu.inverse().transpose();
    for (Index q = 0; q < k; ++q) s.left.col(cluster[q]) = L.col(q);
  }
  s.condition.resize(n);
  for (Index i = 0; i < n; ++i) {
    const cplx p = s.left.col(i).transpose() * s.right.col(i);
    const double denom = s.left.col(i).norm() * s.right.col(i).norm();
    s.condition(i) = denom > 0 && std::isfinite(denom) ? std::abs(p) / denom : 0.0;
  }
}

bool bounds_within_tolerance(const Spectrum& s, const SolverOptions& options) {
  const double limit = options.reliability_tol * std::max(s.matrix_norm, 1e-300);
  for (Index i = 0; i < s.size(); ++i)
    if (!(s.error_bound(i) <= limit)) return false;
  return true;
}

}  // namespace

const char* to_string(Conditioning flag) {
  switch (flag) {
    case Conditioning::well_conditioned:
      return "well_conditioned";
    case Conditioning::gauged:
      return "gauged";
    case Conditioning::unreliable:
      return "unreliable";
  }
  return "unknown";
}

double Spectrum::error_bound(Index i) const {
  if (condition(i) <= 0) return std::numeric_limits<double>::infinity();
  return kEps * matrix_norm / condition(i);
}

namespace {

/// Dense decomposition of one irreducible block.
Spectrum solve_block(const Eigen::MatrixXcd& M, const SolverOptions& options) {
  Spectrum s;
  s.matrix_norm = M.norm();
  const Index n = M.rows();
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> forward(M, true);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> adjoint(M.adjoint(), true);
  s.eigenvalues = forward.eigenvalues();
  s.right = forward.eigenvectors();
  if (forward.info() != Eigen::Success || adjoint.info() != Eigen::Success) {
    s.condition_flag = Conditioning::unreliable;
    s.left = Eigen::MatrixXcd::Zero(n, n);
    s.condition = Eigen::VectorXd::Zero(n);
    return s;
  }

  // Adjoint eigenvalues are conj(E); pair them greedily by proximity.
  std::vector<bool> used(n, false);
  s.left.resize(n, n);
  for (Index i = 0; i < n; ++i) {
    Index best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < n; ++j) {
      if (used[j]) continue;
      const double d = std::abs(std::conj(adjoint.eigenvalues()(j)) - s.eigenvalues(i));
      if (d < best_dist) {
        best_dist = d;
        best = j;
      }
    }
    used[best] = true;
    s.left.col(i) = adjoint.eigenvectors().col(best).conjugate();
  }
  finish_spectrum(s, options);
  if (s.condition_flag != Conditioning::unreliable && !bounds_within_tolerance(s, options))
    s.condition_flag = Conditioning::unreliable;
  return s;
}

/// Decomposes each irreducible block in its own gauge frame and scatters the results back.
/// `gauge_for` returns an empty vector for "no gauge" or a positive diagonal for G^-1 B G.
template <typename GaugeFor>
Spectrum solve_by_blocks(const Eigen::MatrixXcd& M, const SolverOptions& options, GaugeFor&& gauge_for) {
  require(M.rows() == M.cols(), "eigendecompose needs a square matrix");
  require(M.rows() <= options.max_dim,
          "matrix dimension " + std::to_string(M.rows()) + " exceeds solver cap " +
              std::to_string(options.max_dim));
  const Index n = M.rows();
  Spectrum out;
  out.matrix_norm = M.norm();
  out.eigenvalues = Eigen::VectorXcd::Zero(n);
  out.right = Eigen::MatrixXcd::Zero(n, n);
  out.left = Eigen::MatrixXcd::Zero(n, n);
  out.condition = Eigen::VectorXd::Zero(n);
  out.condition_flag = Conditioning::well_conditioned;

  Index col = 0;
  for (const auto& rows : coupled_blocks(M)) {
    const Eigen::MatrixXcd block = principal_submatrix(M, rows);
    const Eigen::VectorXd g = gauge_for(rows);
    Spectrum part = solve_block(g.size() ? similarity(block, g) : block, options);
    if (part.condition_flag == Conditioning::unreliable) out.condition_flag = Conditioning::unreliable;
    const Index k = static_cast<Index>(rows.size());
    for (Index q = 0; q < k; ++q, ++col) {
      out.eigenvalues(col) = part.eigenvalues(q);
      out.condition(col) = part.condition(q);
      for (Index i = 0; i < k; ++i) {
        const double gi = g.size() ? g(i) : 1.0;
        out.right(rows[i], col) = part.right(i, q) * gi;
        out.left(rows[i], col) = part.left(i, q) / gi;
      }
    }
  }
  return out;
}

bool usable_gauge(const Eigen::VectorXd& g) {
  return g.allFinite() && g.minCoeff() > 0 && g.maxCoeff() / g.minCoeff() < 1e300;
}

Eigen::VectorXd restrict(const Eigen::VectorXd& g, const std::vector<Index>& rows) {
  Eigen::VectorXd out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Index>(i)) = g(rows[i]);
  return out / out.minCoeff();
}

}  // namespace

Spectrum eigendecompose(const Eigen::MatrixXcd& M, const SolverOptions& options) {
  return solve_by_blocks(M, options, [](const std::vector<Index>&) { return Eigen::VectorXd(); });
}

Spectrum gauged_eigendecompose(const Eigen::MatrixXcd& M, const Eigen::VectorXd& gauge,
                               const SolverOptions& options) {
  require(gauge.size() == M.rows(), "gauge length must match matrix dimension");
  if (!usable_gauge(gauge)) {
    Spectrum s = eigendecompose(M, options);
    s.condition_flag = Conditioning::unreliable;
    return s;
  }
  Spectrum s = solve_by_blocks(M, options, [&](const std::vector<Index>& rows) { return restrict(gauge, rows); });
  // Per-pair conditions stay those of the frame the solver worked in.
  s.condition_flag = s.eigenvalues.allFinite() ? Conditioning::gauged : Conditioning::unreliable;
  return s;
}

Spectrum gauged_eigendecompose(const Eigen::MatrixXcd& M, const LatticeSpec& spec,
                               const SolverOptions& options) {
  require(spec.dim() == M.rows(), "lattice spec does not describe this matrix");
  if (!usable_gauge(skin_gauge(spec, +1)) || !usable_gauge(skin_gauge(spec, -1))) {
    Spectrum s = eigendecompose(M, options);
    s.condition_flag = Conditioning::unreliable;
    return s;
  }
  Spectrum s = solve_by_blocks(M, options, [&](const std::vector<Index>& rows) {
    return lattice_block_gauge(spec, rows);
  });
  s.condition_flag = s.eigenvalues.allFinite() ? Conditioning::gauged : Conditioning::unreliable;
  return s;
}

Eigen::VectorXd lattice_block_gauge(const LatticeSpec& spec, const std::vector<Index>& rows) {
  const bool has_first = std::binary_search(rows.begin(), rows.end(), Index{0});
  const bool has_partner = std::binary_search(rows.begin(), rows.end(), Index{1});
  return restrict(skin_gauge(spec, has_partner && !has_first ? -1 : +1), rows);
}

Spectrum decompose_lattice_matrix(const Eigen::MatrixXcd& M, const LatticeSpec& spec,
                                  const SolverOptions& options) {
  if (skin_dynamic_range(spec) > options.gauge_threshold) return gauged_eigendecompose(M, spec, options);
  return eigendecompose(M, options);
}

Eigen::VectorXcd eigenvalues_only(const Eigen::MatrixXcd& M) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(M, false);
  if (solver.info() != Eigen::Success) throw NumericalError("eigenvalue iteration did not converge");
  return solver.eigenvalues();
}

EigenPair refine_pair(const Eigen::MatrixXcd& M, cplx estimate, int iterations) {
  const Index n = M.rows();
  const double norm = M.norm();
  const double scale = norm > 0 ? norm : 1.0;
  // Nudge the shift off the eigenvalue (relative to the matrix scale) so the factorization stays finite.
  const cplx shift = estimate + cplx(1e-13, 7e-14) * scale;
  const Eigen::MatrixXcd shifted = M - shift * Eigen::MatrixXcd::Identity(n, n);
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(shifted);
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu_t(shifted.transpose());

  Eigen::VectorXcd r = Eigen::VectorXcd::Ones(n);
  Eigen::VectorXcd l = Eigen::VectorXcd::Ones(n);
  for (Index i = 0; i < n; ++i) {  // deterministic, generic start vector
    r(i) = cplx(1.0 + 0.37 * std::sin(1.3 * i), 0.21 * std::cos(0.7 * i));
    l(i) = cplx(1.0 + 0.29 * std::cos(1.1 * i), 0.17 * std::sin(0.9 * i));
  }
  for (int it = 0; it < iterations; ++it) {
    r = lu.solve(r);
    r /= r.norm();
    l = lu_t.solve(l);
    l /= l.norm();
  }
  EigenPair pair;
  const cplx pairing = l.transpose() * r;
  pair.value = std::abs(pairing) > 0 ? cplx(l.transpose() * (M * r)) / pairing : estimate;
  pair.right = r;
  pair.left = l;
  pair.condition = std::abs(pairing);
  return pair;
}

std::vector<std::vector<Index>> coupled_blocks(const Eigen::MatrixXcd& M) {
  const Index n = M.rows();
  std::vector<Index> parent(n);
  std::iota(parent.begin(), parent.end(), Index{0});
  auto find = [&](Index x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i)
      if (i != j && M(i, j) != cplx(0.0)) parent[find(i)] = find(j);

  std::vector<std::vector<Index>> blocks;
  std::vector<Index> slot(n, -1);
  for (Index i = 0; i < n; ++i) {
    const Index root = find(i);
    if (slot[root] < 0) {
      slot[root] = static_cast<Index>(blocks.size());
      blocks.emplace_back();
    }
    blocks[slot[root]].push_back(i);
  }
  return blocks;
}

Eigen::MatrixXcd principal_submatrix(const Eigen::MatrixXcd& M, const std::vector<Index>& rows) {
  const Index k = static_cast<Index>(rows.size());
  Eigen::MatrixXcd sub(k, k);
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < k; ++i) sub(i, j) = M(rows[i], rows[j]);
  return sub;
}

double overlap(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  const double denom = a.norm() * b.norm();
  return denom > 0 ? std::abs(a.dot(b)) / denom : 0.0;
}

ZeroMode numeric_zero_mode(const Spectrum& spectrum, const Eigen::MatrixXcd& source,
                           const ZeroModeQuery& query) {
  require(spectrum.size() > 0, "empty spectrum");
  require(source.rows() == spectrum.size(), "source matrix does not match spectrum");
  Index nearest = 0;
  for (Index i = 1; i < spectrum.size(); ++i)
    if (std::abs(spectrum.eigenvalues(i) - query.target) <
        std::abs(spectrum.eigenvalues(nearest) - query.target))
      nearest = i;
  const double distance = std::abs(spectrum.eigenvalues(nearest) - query.target);
  const double tolerance = query.tolerance >= 0
                               ? query.tolerance
                               : 0.05 * (1.0 + spectrum.eigenvalues.cwiseAbs().maxCoeff());
  if (distance > tolerance)
    throw NumericalError("no mode near target (nearest eigenvalue is " + std::to_string(distance) +
                         " away)");

  Index chosen = nearest;
  if (query.reference) {
    const double cluster = std::max(2.0 * distance, distance + 1e-6 * (1.0 + spectrum.matrix_norm));
    double best = -1.0;
    for (Index i = 0; i < spectrum.size(); ++i) {
      if (std::abs(spectrum.eigenvalues(i) - query.target) > cluster) continue;
      const double ov = overlap(*query.reference, spectrum.right.col(i));
      if (ov > best) {
        best = ov;
        chosen = i;
      }
    }
  }

  ZeroMode mode;
  mode.origin = ZeroMode::Origin::numeric;
  mode.eigenvalue = spectrum.eigenvalues(chosen);
  mode.right = spectrum.right.col(chosen);
  mode.left = spectrum.left.col(chosen);
  std::tie(mode.residual_right, mode.residual_left) =
      mode_residuals(source, mode.eigenvalue, mode.right, mode.left);
  return mode;
}

SiteDensity density_of_states(const ZeroMode& mode) {
  require(mode.right.size() > 0, "mode has no entries");
  const double peak = mode.right.cwiseAbs().maxCoeff();
  require(peak > 0 && std::isfinite(peak), "density needs a nonzero finite vector");
  SiteDensity dos;
  dos.weights = (mode.right / peak).cwiseAbs2();
  dos.weights /= dos.weights.sum();
  return dos;
}

}  // namespace nhsense
