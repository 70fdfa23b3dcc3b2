#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "nhsense/common.hpp"

namespace test_support {

inline std::vector<nhsense::cplx> to_vector(const Eigen::VectorXcd& v) {
  return std::vector<nhsense::cplx>(v.data(), v.data() + v.size());
}

/// Largest distance after greedily pairing each value in `a` with its nearest unused value in `b`.
inline double matched_distance(const std::vector<nhsense::cplx>& a, const std::vector<nhsense::cplx>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  std::vector<bool> used(b.size(), false);
  double worst = 0.0;
  for (const auto& x : a) {
    std::size_t best = 0;
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b.size(); ++j)
      if (!used[j] && std::abs(b[j] - x) < dist) {
        dist = std::abs(b[j] - x);
        best = j;
      }
    used[best] = true;
    worst = std::max(worst, dist);
  }
  return worst;
}

}  // namespace test_support
