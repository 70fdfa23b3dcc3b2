#include "nhsense/lattice.hpp"

#include <cmath>

namespace nhsense {

namespace {

const cplx kI{0.0, 1.0};

std::string axis_name(std::size_t j) { return "axis " + std::to_string(j + 1); }

/// Walks every cell in index order, handing out 0-based coordinates.
template <typename Visit>
void for_each_cell(const LatticeSpec& spec, Visit&& visit) {
  std::vector<int> m(spec.extent.size(), 0);
  const Index n = spec.cells();
  for (Index c = 0; c < n; ++c) {
    visit(c, m);
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (++m[j] < spec.extent[j]) break;
      m[j] = 0;
    }
  }
}

Index cell_index(const LatticeSpec& spec, const std::vector<int>& zero_based) {
  Index idx = 0;
  for (std::size_t j = zero_based.size(); j-- > 0;) idx = idx * spec.extent[j] + zero_based[j];
  return idx;
}

}  // namespace

void LatticeSpec::validate() const {
  require(order >= 1, "order must be >= 1");
  require(extent.size() == static_cast<std::size_t>(order),
          "extent needs one entry per axis (got " + std::to_string(extent.size()) + " for order " +
              std::to_string(order) + ")");
  require(couplings.size() == static_cast<std::size_t>(order),
          "couplings need one pair per axis (got " + std::to_string(couplings.size()) + ")");
  for (std::size_t j = 0; j < extent.size(); ++j) {
    require(extent[j] >= 1, axis_name(j) + ": extent must be >= 1");
    require(couplings[j].forward > 0 && couplings[j].backward > 0 &&
                std::isfinite(couplings[j].forward) && std::isfinite(couplings[j].backward),
            axis_name(j) + ": couplings must be finite and > 0");
  }
  require(intra_cell >= 0 && std::isfinite(intra_cell), "intra_cell must be >= 0");
}

Index LatticeSpec::cells() const {
  Index n = 1;
  for (int L : extent) n *= L;
  return n;
}

LatticeSpec square_lattice(int order, int extent, double forward, double backward) {
  LatticeSpec spec;
  spec.order = order;
  spec.extent.assign(order, extent);
  spec.couplings.assign(order, AxisCoupling{forward, backward});
  return spec;
}

Index site_index(const LatticeSpec& spec, const Site& site) {
  require(site.cell.size() == spec.extent.size(), "site needs one coordinate per axis");
  require(site.sublattice == 1 || site.sublattice == 2, "sublattice must be 1 or 2");
  std::vector<int> m(site.cell.size());
  for (std::size_t j = 0; j < m.size(); ++j) {
    require(site.cell[j] >= 1 && site.cell[j] <= spec.extent[j],
            "site coordinate " + std::to_string(site.cell[j]) + " outside " + axis_name(j) +
                " (1.." + std::to_string(spec.extent[j]) + ")");
    m[j] = site.cell[j] - 1;
  }
  return cell_index(spec, m) * 2 + (site.sublattice - 1);
}

Site site_at(const LatticeSpec& spec, Index row) {
  require(row >= 0 && row < spec.dim(), "row index outside lattice");
  Site site;
  site.sublattice = static_cast<int>(row % 2) + 1;
  Index c = row / 2;
  site.cell.resize(spec.extent.size());
  for (std::size_t j = 0; j < spec.extent.size(); ++j) {
    site.cell[j] = static_cast<int>(c % spec.extent[j]) + 1;
    c /= spec.extent[j];
  }
  return site;
}

Site first_corner(const LatticeSpec& spec) { return Site{std::vector<int>(spec.extent.size(), 1), 1}; }

Site last_corner(const LatticeSpec& spec) { return Site{spec.extent, 1}; }

BlochHamiltonian build_bloch(const LatticeSpec& spec, const std::vector<double>& k) {
  spec.validate();
  if (spec.order != 2 && spec.order != 3)
    throw ValidationError("no closed Bloch form for order " + std::to_string(spec.order));
  require(k.size() == static_cast<std::size_t>(spec.order), "wave vector needs one component per axis");

  // Each axis contributes lambda e^{ik} + lambda' e^{-ik} to its Pauli channel.
  auto channel = [&](int j) {
    const auto& c = spec.couplings[j];
    return c.forward * std::exp(kI * k[j]) + c.backward * std::exp(-kI * k[j]);
  };
  auto channel_reversed = [&](int j) {
    const auto& c = spec.couplings[j];
    return c.forward * std::exp(-kI * k[j]) + c.backward * std::exp(kI * k[j]);
  };

  Eigen::Matrix2cd h = Eigen::Matrix2cd::Zero();
  h(0, 0) = channel(0);
  h(1, 1) = channel_reversed(0);
  h(0, 1) += channel(1) + spec.intra_cell;
  h(1, 0) += channel(1) + spec.intra_cell;
  if (spec.order == 3) {
    h(0, 1) += -kI * channel(2);
    h(1, 0) += kI * channel(2);
  }
  return {k, h};
}

Eigen::MatrixXcd build_hamiltonian(const LatticeSpec& spec, Boundary boundary) {
  spec.validate();
  require(spec.order <= 3, "real-space construction supports order 1..3");
  const Index dim = spec.dim();
  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(dim, dim);

  for_each_cell(spec, [&](Index c, const std::vector<int>& m) {
    const Index src = 2 * c;
    if (spec.intra_cell != 0.0) {
      H(src, src + 1) += spec.intra_cell;
      H(src + 1, src) += spec.intra_cell;
    }
    for (int j = 0; j < spec.order; ++j) {
      std::vector<int> next = m;
      if (++next[j] == spec.extent[j]) {
        if (boundary == Boundary::open) continue;
        next[j] = 0;
      }
      const Index dst = 2 * cell_index(spec, next);
      const double fw = spec.couplings[j].forward;
      const double bw = spec.couplings[j].backward;
      switch (j) {
        case 0:  // sublattice-diagonal, opposite chirality on the two sublattices
          H(dst, src) += fw;
          H(src, dst) += bw;
          H(dst + 1, src + 1) += bw;
          H(src + 1, dst + 1) += fw;
          break;
        case 1:  // sigma_x channel
          for (int s = 0; s < 2; ++s) {
            H(dst + s, src + 1 - s) += fw;
            H(src + s, dst + 1 - s) += bw;
          }
          break;
        default:  // sigma_y channel
          H(dst, src + 1) += -kI * fw;
          H(src, dst + 1) += -kI * bw;
          H(dst + 1, src) += kI * fw;
          H(src + 1, dst) += kI * bw;
          break;
      }
    }
  });
  return H;
}

std::pair<double, double> mode_residuals(const Eigen::MatrixXcd& H, cplx eigenvalue,
                                         const Eigen::VectorXcd& right, const Eigen::VectorXcd& left) {
  const double rr = (H * right - eigenvalue * right).norm() / right.norm();
  const double rl = (H.transpose() * left - eigenvalue * left).norm() / left.norm();
  return {rr, rl};
}

ZeroMode analytic_zero_mode(const LatticeSpec& spec) {
  spec.validate();
  require(spec.order <= 3, "analytic zero mode needs order 1..3");
  require(spec.intra_cell == 0.0, "analytic zero mode needs intra_cell = 0");
  for (std::size_t j = 0; j < spec.extent.size(); ++j)
    require(spec.extent[j] % 2 == 1, axis_name(j) + ": analytic zero mode needs an odd extent");

  ZeroMode mode;
  mode.right = Eigen::VectorXcd::Zero(spec.dim());
  mode.left = Eigen::VectorXcd::Zero(spec.dim());
  for_each_cell(spec, [&](Index c, const std::vector<int>& m) {
    double r_amp = 1.0;
    double l_amp = 1.0;
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (m[j] % 2 != 0) return;  // support is the all-odd (1-based) cells
      const int chi = m[j] / 2;
      const double r = spec.couplings[j].ratio();
      r_amp *= std::pow(-r, chi);
      l_amp *= std::pow(-1.0 / r, chi);
    }
    mode.right(2 * c) = r_amp;
    mode.left(2 * c) = l_amp;
  });

  const auto H = build_hamiltonian(spec);
  std::tie(mode.residual_right, mode.residual_left) = mode_residuals(H, 0.0, mode.right, mode.left);
  mode.origin = ZeroMode::Origin::analytic;
  return mode;
}

Eigen::VectorXd skin_gauge(const LatticeSpec& spec, int axis1_sign) {
  Eigen::VectorXd g(spec.dim());
  for_each_cell(spec, [&](Index c, const std::vector<int>& m) {
    double log_g = 0.0;
    for (std::size_t j = 0; j < m.size(); ++j)
      log_g += (j == 0 ? axis1_sign : 1) * 0.5 * m[j] * std::log(spec.couplings[j].ratio());
    g(2 * c) = g(2 * c + 1) = std::exp(log_g);
  });
  return g;
}

double skin_dynamic_range(const LatticeSpec& spec) {
  double worst = 1.0;
  for (std::size_t j = 0; j < spec.extent.size(); ++j) {
    const double r = spec.couplings[j].ratio();
    worst = std::max(worst, std::pow(std::max(r, 1.0 / r), spec.extent[j] - 1));
  }
  return worst;
}

}  // namespace nhsense
