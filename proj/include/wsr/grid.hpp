#pragma once

#include <cmath>
#include <cstdlib>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "wsr/errors.hpp"

namespace wsr {

// Uniform triangulated grid on the unit square with N cells per side.
//
// Nodes sit at (i*h, j*h), h = 1/N, and are numbered row-major by
// j*(N+1)+i, so the x-index i varies fastest. The 4N boundary nodes are
// ordered counterclockwise along the perimeter starting at (0,0):
// bottom edge left to right, right edge bottom to top, top edge right to
// left, left edge top to bottom (excluding the start corner).
class Grid {
 public:
  explicit Grid(int cells_per_side) : n_cells_(cells_per_side) {
    if (n_cells_ < 2) throw DomainError("Grid: need at least 2 cells per side");
    const int np = n_cells_ + 1;
    boundary_.reserve(4 * n_cells_);
    for (int i = 0; i <= n_cells_; ++i) boundary_.push_back(node_index(i, 0));
    for (int j = 1; j <= n_cells_; ++j) boundary_.push_back(node_index(n_cells_, j));
    for (int i = n_cells_ - 1; i >= 0; --i) boundary_.push_back(node_index(i, n_cells_));
    for (int j = n_cells_ - 1; j >= 1; --j) boundary_.push_back(node_index(0, j));
    is_boundary_.assign(np * np, false);
    for (int b : boundary_) is_boundary_[b] = true;
  }

  int cells_per_side() const { return n_cells_; }
  int node_count() const { return (n_cells_ + 1) * (n_cells_ + 1); }
  int boundary_node_count() const { return 4 * n_cells_; }
  double h() const { return 1.0 / n_cells_; }

  int node_index(int i, int j) const { return j * (n_cells_ + 1) + i; }

  std::pair<int, int> node_ij(int idx) const {
    return {idx % (n_cells_ + 1), idx / (n_cells_ + 1)};
  }

  double node_x(int idx) const { return (idx % (n_cells_ + 1)) * h(); }
  double node_y(int idx) const { return (idx / (n_cells_ + 1)) * h(); }

  bool is_boundary(int idx) const { return is_boundary_[idx]; }

  /// Boundary node indices, counterclockwise from (0,0).
  const std::vector<int>& boundary_nodes() const { return boundary_; }

  // Chebyshev distance between two nodes in cell units; one diagonal step
  // counts as one cell.
  int cell_distance(int a, int b) const {
    auto [ia, ja] = node_ij(a);
    auto [ib, jb] = node_ij(b);
    return std::max(std::abs(ia - ib), std::abs(ja - jb));
  }

 private:
  int n_cells_;
  std::vector<int> boundary_;
  std::vector<bool> is_boundary_;
};

// Index of the grid node nearest to `point`; a tie along either axis is
// broken toward the smaller node index.
inline int locate_node(const Grid& grid, double x, double y) {
  if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0)
    throw DomainError("locate_node: point outside the unit square");
  const int n = grid.cells_per_side();
  auto nearest = [n](double coord) {
    int lo = static_cast<int>(std::floor(coord * n));
    if (lo >= n) lo = n - 1;
    if (lo < 0) lo = 0;
    const double d_lo = std::abs(coord * n - lo);
    const double d_hi = std::abs(coord * n - (lo + 1));
    return d_lo <= d_hi ? lo : lo + 1;
  };
  return grid.node_index(nearest(x), nearest(y));
}

// Resample a boundary trace from a fine grid onto a coarser one. Both traces
// use the counterclockwise boundary ordering. Nodes are equally spaced along
// the perimeter, so values are interpolated piecewise-linearly in arc length;
// whenever a coarse node coincides with a fine one (always the case when
// N_fine is a multiple of N_coarse) the value is sampled exactly.
inline Eigen::VectorXd transfer_boundary_trace(const Grid& fine, const Grid& coarse,
                                               const Eigen::VectorXd& trace_fine) {
  if (fine.cells_per_side() % coarse.cells_per_side() != 0)
    throw IncompatibleGrids("transfer_boundary_trace: fine N must be a multiple of coarse N");
  if (trace_fine.size() != fine.boundary_node_count())
    throw DimensionMismatch("transfer_boundary_trace: trace length != fine boundary size");

  const int mf = fine.boundary_node_count();
  const int mc = coarse.boundary_node_count();
  Eigen::VectorXd out(mc);
  for (int c = 0; c < mc; ++c) {
    // Position of coarse node c in fine-node units along the perimeter.
    const double pos = static_cast<double>(c) * fine.cells_per_side() / coarse.cells_per_side();
    const int b0 = static_cast<int>(std::floor(pos));
    const double frac = pos - b0;
    if (frac == 0.0) {
      out[c] = trace_fine[b0 % mf];
    } else {
      out[c] = (1.0 - frac) * trace_fine[b0 % mf] + frac * trace_fine[(b0 + 1) % mf];
    }
  }
  return out;
}

}  // namespace wsr
