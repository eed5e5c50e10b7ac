#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "wsr/errors.hpp"
#include "wsr/fem.hpp"
#include "wsr/weighting.hpp"

namespace wsr {

// Normalized Gram analysis of a candidate support: how close the selected
// columns are to the constant-correlation model Q(rho), and whether the
// remainder R(rho_bar) stays below the perturbation bound.
struct GramAnalysis {
  std::vector<int> J;
  Eigen::MatrixXd G;       // normalized Gram restricted to J
  double rho_bar = 0.0;    // representative off-diagonal level
  Eigen::MatrixXd R;       // G with rho_bar removed off the diagonal
  double r_inf_norm = 0.0;
  double bound = 0.0;      // admissible ||R||_inf for non-negative solutions
  bool rho_in_domain = false;
  bool bound_satisfied = false;
  bool most_parallel_satisfied = false;
};

struct CertificateReport {
  Eigen::VectorXd c;        // dual vector, length = rows of C
  Eigen::VectorXd z;        // combination coefficients on the support
  double cond1_residual = 0.0;
  double cond2_margin = 0.0;
  bool valid = false;
  bool z_nonnegative = false;
};

struct OverlapReport {
  int j = 0;
  int k = 0;
  std::vector<double> tau_values;
  std::vector<double> ratios;  // overlap count / n per tau
  int n = 0;
};

namespace detail {

inline void check_column_index(const WeightedOperator& op, int j, const char* who) {
  if (j < 0 || j >= op.cols()) throw DomainError(std::string(who) + ": column index out of range");
}

inline std::vector<int> checked_index_set(const WeightedOperator& op, const std::vector<int>& j_set,
                                          const char* who) {
  std::vector<bool> seen(op.cols(), false);
  for (int j : j_set) {
    check_column_index(op, j, who);
    if (seen[j]) throw DomainError(std::string(who) + ": duplicate index in J");
    seen[j] = true;
  }
  return j_set;
}

// Nonzero pattern of u_j: the entries of |C^T C e_j| that strictly exceed
// tau * max. At tau = 0 a floating-point floor stands in for "exactly zero".
inline std::vector<bool> thresholded_support(const WeightedOperator& op, int j, double tau) {
  const Eigen::VectorXd v = op.apply_adjoint(op.C.col(j)).cwiseAbs();
  const double peak = v.maxCoeff();
  const double cut = std::max(tau, 1e-14) * peak;
  std::vector<bool> pattern(v.size());
  for (int i = 0; i < v.size(); ++i) pattern[i] = v[i] > cut;
  return pattern;
}

}  // namespace detail

inline Eigen::VectorXd weighted_backprojection(const WeightedOperator& op, int j) {
  detail::check_column_index(op, j, "weighted_backprojection");
  return op.apply_adjoint(op.C.col(j)).cwiseQuotient(op.W_diag);
}

inline int argmax_source(const WeightedOperator& op, int j) {
  const Eigen::VectorXd v = weighted_backprojection(op, j).cwiseAbs();
  int best = 0;
  v.maxCoeff(&best);
  double runner_up = 0.0;
  for (int i = 0; i < v.size(); ++i)
    if (i != best) runner_up = std::max(runner_up, v[i]);
  if (v[best] - runner_up <= 1e-12 * v[best])
    throw AssumptionViolated("argmax_source: maximizer tied to working precision");
  return best;
}

inline double mutual_coherence(const WeightedOperator& op) {
  const int n = op.cols();
  Eigen::MatrixXd normalized = op.C;
  for (int i = 0; i < n; ++i) normalized.col(i) /= op.W_diag[i];
  double mu = 0.0;
  const int block = 1024;
  for (int l0 = 0; l0 < n; l0 += block) {
    const int nb = std::min(block, n - l0);
    Eigen::MatrixXd g = normalized.transpose() * normalized.middleCols(l0, nb);
    for (int c = 0; c < nb; ++c) g(l0 + c, c) = 0.0;  // drop the diagonal
    mu = std::max(mu, g.cwiseAbs().maxCoeff());
  }
  return mu;
}

inline void check_rho_s(double rho, int s, const char* who) {
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError(std::string(who) + ": rho must lie in (0,1)");
  if (s <= 1) throw DomainError(std::string(who) + ": s must exceed 1");
}

inline Eigen::VectorXd q_closed_form_solution(double rho, int s) {
  check_rho_s(rho, s, "q_closed_form_solution");
  return Eigen::VectorXd::Constant(s, 1.0 / (1.0 + (s - 1) * rho));
}

inline double q_inverse_inf_norm(double rho, int s) {
  check_rho_s(rho, s, "q_inverse_inf_norm");
  return (rho * (2 * s - 3) + 1.0) / ((1.0 - rho) * (rho * (s - 1) + 1.0));
}

inline double r_perturbation_bound(double rho, int s) {
  check_rho_s(rho, s, "r_perturbation_bound");
  return (1.0 - rho) * (rho * (s - 1) + 1.0) / (2.0 * rho * (2 * s - 3) + 2.0);
}

inline GramAnalysis analyze_parallel_recovery(const WeightedOperator& op,
                                              const std::vector<int>& j_set,
                                              std::optional<double> rho_bar = std::nullopt) {
  if (j_set.size() < 2)
    throw DomainError("analyze_parallel_recovery: need at least two support indices");
  GramAnalysis out;
  out.J = detail::checked_index_set(op, j_set, "analyze_parallel_recovery");
  const int s = static_cast<int>(out.J.size());

  out.G.resize(s, s);
  for (int a = 0; a < s; ++a) {
    const Eigen::VectorXd ca = op.unit_column(out.J[a]);
    for (int b = a; b < s; ++b) {
      const double g = a == b ? 1.0 : ca.dot(op.unit_column(out.J[b]));
      out.G(a, b) = g;
      out.G(b, a) = g;
    }
  }

  if (rho_bar) {
    out.rho_bar = *rho_bar;
  } else {
    out.rho_bar = (out.G.sum() - s) / (static_cast<double>(s) * (s - 1));
  }

  out.R = out.G;
  out.R.array() -= out.rho_bar;
  out.R.diagonal().setZero();
  out.r_inf_norm = out.R.cwiseAbs().rowwise().sum().maxCoeff();

  out.rho_in_domain = out.rho_bar > 0.0 && out.rho_bar < 1.0;
  if (out.rho_in_domain) {
    out.bound = r_perturbation_bound(out.rho_bar, s);
    out.bound_satisfied = out.r_inf_norm <= out.bound;
  }

  // "Most parallel" check: the weakest in-support correlation must still
  // beat every correlation with an outside column (full scan).
  double min_inside = 1.0;
  for (int a = 0; a < s; ++a)
    for (int b = 0; b < s; ++b)
      if (a != b) min_inside = std::min(min_inside, out.G(a, b));
  double max_outside = 0.0;
  std::vector<bool> in_j(op.cols(), false);
  for (int j : out.J) in_j[j] = true;
  for (int a = 0; a < s; ++a) {
    const Eigen::VectorXd corr =
        op.apply_adjoint(op.unit_column(out.J[a])).cwiseQuotient(op.W_diag).cwiseAbs();
    for (int i = 0; i < op.cols(); ++i)
      if (!in_j[i]) max_outside = std::max(max_outside, corr[i]);
  }
  out.most_parallel_satisfied = min_inside > max_outside;
  return out;
}

namespace detail {

inline CertificateReport evaluate_certificate(const WeightedOperator& op,
                                              const std::vector<int>& j_set,
                                              const Eigen::VectorXd& z,
                                              const std::vector<double>& target_signs) {
  CertificateReport report;
  report.z = z;
  report.c = Eigen::VectorXd::Zero(op.rows());
  for (size_t k = 0; k < j_set.size(); ++k) report.c += z[k] * op.unit_column(j_set[k]);

  const Eigen::VectorXd corr = op.apply_adjoint(report.c).cwiseQuotient(op.W_diag);
  std::vector<bool> in_j(op.cols(), false);
  for (int j : j_set) in_j[j] = true;

  report.cond1_residual = 0.0;
  for (size_t k = 0; k < j_set.size(); ++k)
    report.cond1_residual =
        std::max(report.cond1_residual, std::abs(corr[j_set[k]] - target_signs[k]));
  double max_off = 0.0;
  for (int i = 0; i < op.cols(); ++i)
    if (!in_j[i]) max_off = std::max(max_off, std::abs(corr[i]));
  report.cond2_margin = 1.0 - max_off;

  report.valid = report.cond1_residual <= 1e-10 && report.cond2_margin > 1e-10;
  report.z_nonnegative = z.minCoeff() >= -1e-12;
  return report;
}

}  // namespace detail

inline CertificateReport dual_certificate(const WeightedOperator& op,
                                          const SourceConfiguration& x_star) {
  if (x_star.entries.empty()) throw DomainError("dual_certificate: empty source configuration");
  const std::vector<int> j_set =
      detail::checked_index_set(op, x_star.support(), "dual_certificate");
  const double common_sign = x_star.entries.front().second > 0.0 ? 1.0 : -1.0;
  for (const auto& [idx, amp] : x_star.entries)
    if (amp * common_sign <= 0.0)
      throw DomainError("dual_certificate: amplitudes must share one sign");

  const int s = static_cast<int>(j_set.size());
  Eigen::MatrixXd g(s, s);
  for (int a = 0; a < s; ++a) {
    const Eigen::VectorXd ca = op.unit_column(j_set[a]);
    for (int b = a; b < s; ++b) {
      g(a, b) = a == b ? 1.0 : ca.dot(op.unit_column(j_set[b]));
      g(b, a) = g(a, b);
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(g, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (sv[s - 1] <= 1e-12 * sv[0])
    throw SingularGram("dual_certificate: Gram matrix on J is numerically singular");
  const Eigen::VectorXd z = svd.solve(Eigen::VectorXd::Ones(s));

  std::vector<double> signs(s, common_sign);
  return detail::evaluate_certificate(op, j_set, common_sign * z, signs);
}

inline CertificateReport dual_certificate_disjoint(const WeightedOperator& op,
                                                   const SourceConfiguration& x_star) {
  if (x_star.entries.empty())
    throw DomainError("dual_certificate_disjoint: empty source configuration");
  const std::vector<int> j_set =
      detail::checked_index_set(op, x_star.support(), "dual_certificate_disjoint");
  const int s = static_cast<int>(j_set.size());
  for (int a = 0; a < s; ++a)
    for (int b = a + 1; b < s; ++b)
      if (std::abs(op.unit_column(j_set[a]).dot(op.unit_column(j_set[b]))) > 1e-10)
        throw NotOrthogonal("dual_certificate_disjoint: support images are not orthogonal");

  Eigen::VectorXd z(s);
  std::vector<double> signs(s);
  for (int k = 0; k < s; ++k) {
    signs[k] = x_star.entries[k].second > 0.0 ? 1.0 : -1.0;
    z[k] = signs[k];
  }
  return detail::evaluate_certificate(op, j_set, z, signs);
}

inline bool check_disjoint_supports(const WeightedOperator& op, const std::vector<int>& j_set,
                                    double tau) {
  if (!(tau >= 0.0 && tau <= 1.0))
    throw DomainError("check_disjoint_supports: tau must lie in [0,1]");
  detail::checked_index_set(op, j_set, "check_disjoint_supports");
  std::vector<std::vector<bool>> patterns;
  patterns.reserve(j_set.size());
  for (int j : j_set) patterns.push_back(detail::thresholded_support(op, j, tau));
  for (size_t a = 0; a < patterns.size(); ++a)
    for (size_t b = a + 1; b < patterns.size(); ++b)
      for (int i = 0; i < op.cols(); ++i)
        if (patterns[a][i] && patterns[b][i]) return false;
  return true;
}

inline OverlapReport disjointness_overlap(const WeightedOperator& op, int j, int k,
                                          const std::vector<double>& taus) {
  detail::check_column_index(op, j, "disjointness_overlap");
  detail::check_column_index(op, k, "disjointness_overlap");
  if (j == k) throw DomainError("disjointness_overlap: indices must differ");
  for (double tau : taus)
    if (!(tau >= 0.0 && tau <= 1.0))
      throw DomainError("disjointness_overlap: tau must lie in [0,1]");

  OverlapReport report;
  report.j = j;
  report.k = k;
  report.n = op.cols();
  report.tau_values = taus;
  for (double tau : taus) {
    const auto uj = detail::thresholded_support(op, j, tau);
    const auto uk = detail::thresholded_support(op, k, tau);
    int overlap = 0;
    for (int i = 0; i < report.n; ++i)
      if (uj[i] && uk[i]) ++overlap;
    report.ratios.push_back(static_cast<double>(overlap) / report.n);
  }
  return report;
}

}  // namespace wsr
