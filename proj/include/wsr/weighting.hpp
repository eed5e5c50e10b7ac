#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "wsr/errors.hpp"
#include "wsr/rng.hpp"

namespace wsr {

// Auxiliary operator schemes for building C = B*A and the diagonal weights
// w_i = ||C e_i||_2. Columns of C*W^{-1} then have unit norm, which is what
// makes the weighted l1 penalty null-space aware.

struct WeightingScheme {
  enum class Kind { Identity, TruncatedPseudoInverse, RandomSparse, PreOrthogonalizer };

  Kind kind = Kind::Identity;
  int truncation = 0;                 // TruncatedPseudoInverse: number of singular values kept
  int random_rows = 0;                // RandomSparse: p (0 selects p = m)
  double density = 0.1;               // RandomSparse
  std::uint64_t seed = 0;             // RandomSparse
  std::vector<int> support;           // PreOrthogonalizer: column index set J

  static WeightingScheme identity() { return {}; }

  static WeightingScheme truncated_pinv(int k) {
    WeightingScheme s;
    s.kind = Kind::TruncatedPseudoInverse;
    s.truncation = k;
    return s;
  }

  static WeightingScheme random_sparse(int rows, double density, std::uint64_t seed) {
    WeightingScheme s;
    s.kind = Kind::RandomSparse;
    s.random_rows = rows;
    s.density = density;
    s.seed = seed;
    return s;
  }

  static WeightingScheme pre_orthogonalizer(std::vector<int> indices) {
    WeightingScheme s;
    s.kind = Kind::PreOrthogonalizer;
    s.support = std::move(indices);
    return s;
  }

  std::string label() const {
    switch (kind) {
      case Kind::Identity: return "identity";
      case Kind::TruncatedPseudoInverse: return "trunc_pinv";
      case Kind::RandomSparse: return "random_sparse";
      case Kind::PreOrthogonalizer: return "pre_orth";
    }
    return "?";
  }
};

/// Number of singular values above 1e-12 * sigma_max.
inline int numerical_rank(const Eigen::MatrixXd& a) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-12 * sv[0]) ++rank;
  return rank;
}

// Rank-k pseudoinverse sum_{i<k} v_i u_i^T / sigma_i from the thin SVD.
// Rejects k beyond the numerical rank so no inverted singular value exceeds
// 1e12 / sigma_max.
inline Eigen::MatrixXd truncated_pseudoinverse(const Eigen::MatrixXd& a, int k) {
  if (k < 1 || k > std::min(a.rows(), a.cols()))
    throw DomainError("truncated_pseudoinverse: k outside [1, min(m,n)]");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv[k - 1] <= 1e-12 * sv[0])
    throw RankDeficient("truncated_pseudoinverse: sigma_k below rank tolerance");
  return svd.matrixV().leftCols(k) *
         sv.head(k).cwiseInverse().asDiagonal() *
         svd.matrixU().leftCols(k).transpose();
}

// Random p x m matrix: each entry is nonzero with probability `density`,
// nonzero values Uniform(0,1). Deterministic for a fixed seed.
inline Eigen::MatrixXd random_sparse_b(int p, int m, double density, std::uint64_t seed) {
  if (density <= 0.0 || density > 1.0)
    throw DomainError("random_sparse_b: density must lie in (0,1]");
  SplitMix64 rng(seed);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(p, m);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < m; ++j)
      if (rng.uniform() < density) b(i, j) = rng.uniform_open();
  return b;
}

// Pseudoinverse of the column submatrix A(:,J). The images of the selected
// basis vectors become exact coordinate vectors: Y^dag A e_{j_k} = e^hat_k,
// so they are mutually orthogonal by construction.
inline Eigen::MatrixXd pre_orthogonalizer(const Eigen::MatrixXd& a, const std::vector<int>& j_set) {
  const int s = static_cast<int>(j_set.size());
  if (s < 1 || s > a.rows() || a.rows() > a.cols())
    throw DomainError("pre_orthogonalizer: need 1 <= |J| <= m <= n");
  Eigen::MatrixXd y(a.rows(), s);
  for (int c = 0; c < s; ++c) {
    if (j_set[c] < 0 || j_set[c] >= a.cols())
      throw DomainError("pre_orthogonalizer: column index out of range");
    y.col(c) = a.col(j_set[c]);
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv[s - 1] <= 1e-10 * sv[0])
    throw DependentColumns("pre_orthogonalizer: selected columns are linearly dependent");
  return svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
}

// The pair (C = B*A, W). Keeps the factors so products with C can use the
// cheaper of C*x and B*(A*x); both paths are deterministic for a given
// scheme. apply_b maps raw observation data into the weighted system.
class WeightedOperator {
 public:
  Eigen::MatrixXd C;        // p x n
  Eigen::VectorXd W_diag;   // n, strictly positive
  Eigen::MatrixXd B;        // p x m; empty for the identity scheme
  Eigen::MatrixXd A;        // m x n
  WeightingScheme scheme;

  int rows() const { return static_cast<int>(C.rows()); }
  int cols() const { return static_cast<int>(C.cols()); }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    if (x.size() != cols()) throw DimensionMismatch("WeightedOperator::apply");
    if (factored_cheaper()) return B * (A * x);
    return C * x;
  }

  Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& r) const {
    if (r.size() != rows()) throw DimensionMismatch("WeightedOperator::apply_adjoint");
    if (factored_cheaper()) return A.transpose() * (B.transpose() * r);
    return C.transpose() * r;
  }

  /// B*y for observation data y (identity scheme returns y unchanged).
  Eigen::VectorXd apply_b(const Eigen::VectorXd& y) const {
    if (y.size() != A.rows()) throw DimensionMismatch("WeightedOperator::apply_b");
    if (scheme.kind == WeightingScheme::Kind::Identity) return y;
    return B * y;
  }

  /// Column of C normalized to unit length.
  Eigen::VectorXd unit_column(int i) const { return C.col(i) / W_diag[i]; }

 private:
  bool factored_cheaper() const {
    if (B.size() == 0) return false;
    const auto p = C.rows(), m = A.rows(), n = C.cols();
    return p * m + m * n < p * n;
  }
};

inline WeightedOperator build_weighted_operator(const Eigen::MatrixXd& a,
                                                const WeightingScheme& scheme) {
  WeightedOperator op;
  op.A = a;
  op.scheme = scheme;
  const int m = static_cast<int>(a.rows());

  auto column_norms = [](const Eigen::MatrixXd& c) {
    return c.colwise().norm().transpose().eval();
  };
  auto min_norm_ok = [](const Eigen::VectorXd& w, const Eigen::MatrixXd& c) {
    return w.minCoeff() > 1e-14 * c.norm();
  };

  switch (scheme.kind) {
    case WeightingScheme::Kind::Identity:
      op.C = a;
      break;
    case WeightingScheme::Kind::TruncatedPseudoInverse:
      op.B = truncated_pseudoinverse(a, scheme.truncation);
      op.C = op.B * a;
      break;
    case WeightingScheme::Kind::RandomSparse: {
      const int p = scheme.random_rows > 0 ? scheme.random_rows : m;
      // A draw can leave a column of C at zero; resample with the next seed
      // a few times before giving up.
      std::uint64_t seed = scheme.seed;
      for (int attempt = 0;; ++attempt, ++seed) {
        op.B = random_sparse_b(p, m, scheme.density, seed);
        op.C = op.B * a;
        Eigen::VectorXd w = column_norms(op.C);
        if (min_norm_ok(w, op.C)) {
          op.scheme.seed = seed;  // the seed actually used
          break;
        }
        if (attempt + 1 >= 8)
          throw ZeroColumn(-1, "build_weighted_operator: random B keeps a zero column after 8 seeds");
      }
      break;
    }
    case WeightingScheme::Kind::PreOrthogonalizer:
      op.B = pre_orthogonalizer(a, scheme.support);
      op.C = op.B * a;
      break;
  }

  op.W_diag = column_norms(op.C);
  const double floor = 1e-14 * op.C.norm();
  for (int i = 0; i < op.W_diag.size(); ++i)
    if (op.W_diag[i] <= floor)
      throw ZeroColumn(i, "build_weighted_operator: basis vector " + std::to_string(i) +
                              " lies in the null space of C");
  return op;
}

// All column pairs of C that are parallel up to `tol`:
// 1 - |<c_l, c_q>| / (||c_l|| ||c_q||) <= tol. An empty result certifies the
// non-parallelism assumption at that tolerance.
inline std::vector<std::pair<int, int>> check_nonparallel(const Eigen::MatrixXd& c,
                                                          double tol = 1e-10) {
  const int n = static_cast<int>(c.cols());
  Eigen::VectorXd norms = c.colwise().norm();
  for (int i = 0; i < n; ++i)
    if (norms[i] == 0.0) throw DomainError("check_nonparallel: zero column");
  Eigen::MatrixXd unit = c * norms.cwiseInverse().asDiagonal();

  std::vector<std::pair<int, int>> violations;
  const int block = 512;
  for (int l0 = 0; l0 < n; l0 += block) {
    const int bs = std::min(block, n - l0);
    Eigen::MatrixXd gram = unit.middleCols(l0, bs).transpose() * unit;  // bs x n
    for (int bl = 0; bl < bs; ++bl) {
      const int l = l0 + bl;
      for (int q = l + 1; q < n; ++q)
        if (1.0 - std::abs(gram(bl, q)) <= tol) violations.emplace_back(l, q);
    }
  }
  return violations;
}

}  // namespace wsr
