#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "wsr/errors.hpp"
#include "wsr/grid.hpp"
#include "wsr/rng.hpp"

namespace wsr {

// Discrete forward operator for the source-identification problem
//
//   -div(grad u) + epsilon*u = f   in the unit square,
//   du/dn = 0                      on the boundary,
//
// observed through the Dirichlet trace u restricted to the boundary. With
// first-order Lagrange elements on the uniform triangulation (each cell split
// by its lower-left/upper-right diagonal) the map from nodal source
// coefficients to the mass-weighted boundary trace is
//
//   A = Mb^{1/2} * (boundary rows of L^{-1} M),
//
// where L is the stiffness-plus-scaled-mass matrix, M the consistent mass
// matrix and Mb the boundary mass matrix. A has 4N rows and (N+1)^2 columns,
// so its null space is large by construction.

/// A sparse set of nodal sources: (node index, amplitude) pairs.
struct SourceConfiguration {
  std::vector<std::pair<int, double>> entries;

  static SourceConfiguration from_entries(std::vector<std::pair<int, double>> e, int n) {
    SourceConfiguration cfg;
    std::vector<bool> seen(n, false);
    for (auto& [idx, amp] : e) {
      if (idx < 0 || idx >= n)
        throw DomainError("SourceConfiguration: node index out of range");
      if (seen[idx]) throw DomainError("SourceConfiguration: duplicate node index");
      seen[idx] = true;
      if (amp == 0.0) throw DomainError("SourceConfiguration: zero amplitude");
      cfg.entries.emplace_back(idx, amp);
    }
    return cfg;
  }

  std::vector<int> support() const {
    std::vector<int> s;
    s.reserve(entries.size());
    for (auto& [idx, amp] : entries) s.push_back(idx);
    return s;
  }

  Eigen::VectorXd to_vector(int n) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (auto& [idx, amp] : entries) x[idx] = amp;
    return x;
  }
};

namespace detail {

struct LuFactor {
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
};

// 3x3 P1 element matrices for a triangle with vertices (x[i], y[i]).
inline void p1_element_matrices(const double* x, const double* y,
                                Eigen::Matrix3d& stiff, Eigen::Matrix3d& mass) {
  const double b[3] = {y[1] - y[2], y[2] - y[0], y[0] - y[1]};
  const double c[3] = {x[2] - x[1], x[0] - x[2], x[1] - x[0]};
  const double area2 = x[0] * (y[1] - y[2]) + x[1] * (y[2] - y[0]) + x[2] * (y[0] - y[1]);
  const double area = 0.5 * std::abs(area2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      stiff(i, j) = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
      mass(i, j) = (i == j ? 2.0 : 1.0) * area / 12.0;
    }
}

}  // namespace detail

struct ForwardModel {
  Grid grid;
  double epsilon;
  Eigen::MatrixXd A;              // m x n, = boundary_mass_sqrt * trace_op
  Eigen::MatrixXd trace_op;       // m x n, boundary rows of L^{-1} M
  Eigen::SparseMatrix<double> L;  // stiffness + epsilon * mass
  Eigen::SparseMatrix<double> M;  // consistent mass matrix
  Eigen::MatrixXd boundary_mass;  // m x m, cyclic tridiagonal
  Eigen::MatrixXd boundary_mass_sqrt;
  std::shared_ptr<detail::LuFactor> factor;

  int rows() const { return static_cast<int>(A.rows()); }
  int cols() const { return static_cast<int>(A.cols()); }
};

// Assembles the forward model for a given grid resolution and zeroth-order
// coefficient. L is factorized once (LU, since epsilon < 0 makes it
// indefinite) and reused for every solve against it.
inline ForwardModel assemble_forward(int cells_per_side, double epsilon) {
  ForwardModel model{Grid(cells_per_side), epsilon, {}, {}, {}, {}, {}, {}, nullptr};
  const Grid& grid = model.grid;
  const int n = grid.node_count();
  const int m = grid.boundary_node_count();
  const int nc = grid.cells_per_side();
  const double h = grid.h();

  std::vector<Eigen::Triplet<double>> k_trip, m_trip;
  k_trip.reserve(18 * nc * nc);
  m_trip.reserve(18 * nc * nc);
  Eigen::Matrix3d ke, me;
  for (int cj = 0; cj < nc; ++cj) {
    for (int ci = 0; ci < nc; ++ci) {
      const int ll = grid.node_index(ci, cj);
      const int lr = grid.node_index(ci + 1, cj);
      const int ul = grid.node_index(ci, cj + 1);
      const int ur = grid.node_index(ci + 1, cj + 1);
      // Lower-left to upper-right diagonal: triangles (ll,lr,ur), (ll,ur,ul).
      const int tris[2][3] = {{ll, lr, ur}, {ll, ur, ul}};
      for (const auto& tri : tris) {
        double xs[3], ys[3];
        for (int v = 0; v < 3; ++v) {
          xs[v] = grid.node_x(tri[v]);
          ys[v] = grid.node_y(tri[v]);
        }
        detail::p1_element_matrices(xs, ys, ke, me);
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) {
            k_trip.emplace_back(tri[a], tri[b], ke(a, b));
            m_trip.emplace_back(tri[a], tri[b], me(a, b));
          }
      }
    }
  }
  Eigen::SparseMatrix<double> stiffness(n, n);
  stiffness.setFromTriplets(k_trip.begin(), k_trip.end());
  model.M.resize(n, n);
  model.M.setFromTriplets(m_trip.begin(), m_trip.end());
  model.L = stiffness + epsilon * model.M;
  model.L.makeCompressed();

  model.factor = std::make_shared<detail::LuFactor>();
  model.factor->lu.compute(model.L);
  if (model.factor->lu.info() != Eigen::Success)
    throw SingularOperator("assemble_forward: LU factorization of L failed");
  // Factorization can succeed numerically on a singular matrix; probe with a
  // known solution and reject if the solve is unusable.
  {
    SplitMix64 rng(0x51c6a11e5ULL);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.uniform() - 0.5;
    Eigen::VectorXd z = model.factor->lu.solve(model.L * v);
    if (!z.allFinite() || (z - v).norm() > 1e-6 * v.norm())
      throw SingularOperator("assemble_forward: L is numerically singular");
  }

  // Boundary rows of L^{-1} M via symmetry of L and M:
  // row g(b) of L^{-1}M equals (M L^{-1} e_{g(b)})^T, so m solves suffice.
  const auto& bnodes = grid.boundary_nodes();
  model.trace_op.resize(m, n);
  const int block = 64;
  for (int b0 = 0; b0 < m; b0 += block) {
    const int bs = std::min(block, m - b0);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, bs);
    for (int c = 0; c < bs; ++c) rhs(bnodes[b0 + c], c) = 1.0;
    Eigen::MatrixXd sol = model.factor->lu.solve(rhs);
    model.trace_op.middleRows(b0, bs) = (model.M * sol).transpose();
  }

  // Boundary mass matrix in boundary ordering: consecutive boundary nodes
  // share an edge of length h; the perimeter is closed so every node has two.
  model.boundary_mass = Eigen::MatrixXd::Zero(m, m);
  for (int b = 0; b < m; ++b) {
    const int b1 = (b + 1) % m;
    model.boundary_mass(b, b) += h / 3.0;
    model.boundary_mass(b1, b1) += h / 3.0;
    model.boundary_mass(b, b1) += h / 6.0;
    model.boundary_mass(b1, b) += h / 6.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(model.boundary_mass);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0)
    throw SingularOperator("assemble_forward: boundary mass matrix not SPD");
  model.boundary_mass_sqrt =
      eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();

  model.A = model.boundary_mass_sqrt * model.trace_op;
  return model;
}

inline Eigen::VectorXd apply_forward(const ForwardModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.cols())
    throw DimensionMismatch("apply_forward: coefficient vector has wrong length");
  return model.A * x;
}

/// Boundary trace of the PDE solution (before boundary-mass weighting).
inline Eigen::VectorXd boundary_trace(const ForwardModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.cols())
    throw DimensionMismatch("boundary_trace: coefficient vector has wrong length");
  return model.trace_op * x;
}

/// Full FEM solution u = L^{-1} M f for nodal source coefficients f.
inline Eigen::VectorXd solve_field(const ForwardModel& model, const Eigen::VectorXd& f) {
  if (f.size() != model.cols())
    throw DimensionMismatch("solve_field: coefficient vector has wrong length");
  return model.factor->lu.solve(model.M * f);
}

}  // namespace wsr
