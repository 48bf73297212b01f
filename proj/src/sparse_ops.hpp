#pragma once

#include <Eigen/Sparse>

#include "tdks/discrete_space.hpp"

namespace tdks::detail {

/// Sparse Dirichlet Laplacian (second-order, 2*dim+1 point stencil).
inline Eigen::SparseMatrix<double> sparse_laplacian(const Grid& grid) {
  const Eigen::Index n_pts = grid.size();
  const int n = grid.points_per_axis();
  const double inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(n_pts) * (2 * grid.dim() + 1));
  for (Eigen::Index p = 0; p < n_pts; ++p) {
    const auto idx = grid.multi_index(p);
    entries.emplace_back(p, p, -2.0 * grid.dim() * inv_h2);
    for (int a = 0; a < grid.dim(); ++a) {
      const Eigen::Index s = grid.stride(a);
      if (idx[a] > 0) entries.emplace_back(p, p - s, inv_h2);
      if (idx[a] < n - 1) entries.emplace_back(p, p + s, inv_h2);
    }
  }
  Eigen::SparseMatrix<double> lap(n_pts, n_pts);
  lap.setFromTriplets(entries.begin(), entries.end());
  return lap;
}

}  // namespace tdks::detail
