#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "wsr/errors.hpp"
#include "wsr/rng.hpp"
#include "wsr/weighting.hpp"

namespace wsr {

struct SolverConfig {
  double alpha = 1e-4;
  int max_iterations = 50000;
  double rel_tolerance = 1e-12;  // stop on relative iterate change
  double kkt_tolerance = 1e-8;
  int continuation_steps = 6;  // basis pursuit only
  bool restart = true;         // adaptive restart on objective increase
};

struct SolveResult {
  Eigen::VectorXd x;
  int iterations = 0;
  std::vector<double> objective_history;
  double kkt_residual = 0.0;
  bool converged = false;
  std::vector<int> support;             // indices with |x_i| > 1e-8 * max|x|
  double feasibility_residual = 0.0;    // ||Cx - b|| / ||b||
};

inline std::vector<int> support_set(const Eigen::VectorXd& x) {
  const double threshold = 1e-8 * x.cwiseAbs().maxCoeff();
  std::vector<int> support;
  for (int i = 0; i < x.size(); ++i)
    if (std::abs(x[i]) > threshold) support.push_back(i);
  return support;
}

inline double objective(const WeightedOperator& op, const Eigen::VectorXd& b, double alpha,
                        const Eigen::VectorXd& x) {
  if (x.size() != op.cols() || b.size() != op.rows())
    throw DimensionMismatch("objective: vector sizes do not match operator");
  return 0.5 * (op.apply(x) - b).squaredNorm() +
         alpha * (op.W_diag.array() * x.array().abs()).sum();
}

namespace detail {

// Largest eigenvalue of the normal operator v -> C^T(Cv) by power iteration
// with a fixed start vector, so repeated runs give identical step sizes.
template <typename NormalOp>
double power_iteration(int n, NormalOp&& normal) {
  SplitMix64 rng(0x5eedb0b5ULL);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform() - 0.5;
  double norm = v.norm();
  if (norm == 0.0) return 0.0;
  v /= norm;

  double lambda = 0.0;
  for (int it = 0; it < 20000; ++it) {
    Eigen::VectorXd w = normal(v);
    const double next = v.dot(w);
    const double w_norm = w.norm();
    if (w_norm == 0.0) return 0.0;
    v = w / w_norm;
    if (it > 0 && std::abs(next - lambda) <= 1e-9 * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

}  // namespace detail

inline double operator_norm_sq(const Eigen::MatrixXd& c) {
  return detail::power_iteration(static_cast<int>(c.cols()), [&](const Eigen::VectorXd& v) {
    return Eigen::VectorXd(c.transpose() * (c * v));
  });
}

inline double operator_norm_sq(const WeightedOperator& op) {
  return detail::power_iteration(op.cols(), [&](const Eigen::VectorXd& v) {
    return op.apply_adjoint(op.apply(v));
  });
}

inline Eigen::VectorXd weighted_soft_threshold(const Eigen::VectorXd& v,
                                               const Eigen::VectorXd& thresholds) {
  if (v.size() != thresholds.size())
    throw DimensionMismatch("weighted_soft_threshold: length mismatch");
  return v.array().sign() * (v.array().abs() - thresholds.array()).max(0.0);
}

// Subgradient optimality residual for 1/2||Cx-b||^2 + alpha*||Wx||_1 at x.
inline double kkt_residual(const WeightedOperator& op, const Eigen::VectorXd& b, double alpha,
                           const Eigen::VectorXd& x) {
  const Eigen::VectorXd g = op.apply_adjoint(op.apply(x) - b);
  double residual = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    const double aw = alpha * op.W_diag[i];
    if (x[i] != 0.0)
      residual = std::max(residual, std::abs(g[i] + aw * (x[i] > 0.0 ? 1.0 : -1.0)));
    else
      residual = std::max(residual, std::max(std::abs(g[i]) - aw, 0.0));
  }
  return residual;
}

namespace detail {

inline double kkt_from_gradient(const Eigen::VectorXd& g, const Eigen::VectorXd& w_diag,
                                double alpha, const Eigen::VectorXd& x) {
  double residual = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    const double aw = alpha * w_diag[i];
    if (x[i] != 0.0)
      residual = std::max(residual, std::abs(g[i] + aw * (x[i] > 0.0 ? 1.0 : -1.0)));
    else
      residual = std::max(residual, std::max(std::abs(g[i]) - aw, 0.0));
  }
  return residual;
}

// Exact finish on a candidate sign pattern. Solves the stationarity system
// restricted to the active set, drops coordinates whose sign flips, admits
// the worst violated subgradient box, and succeeds only when the full KKT
// certificate holds at the assembled point. Near-parallel columns make the
// margins of the inactive boxes as small as alpha*w*(1-cos), a scale a
// gradient method would need millions of iterations to resolve.
inline bool active_set_polish(const WeightedOperator& op, const Eigen::VectorXd& b, double alpha,
                              double kkt_tol, Eigen::VectorXd& x) {
  const int n = op.cols();
  std::vector<int> active;
  std::vector<double> sign;
  for (int i = 0; i < n; ++i)
    if (x[i] != 0.0) {
      active.push_back(i);
      sign.push_back(x[i] > 0.0 ? 1.0 : -1.0);
    }
  // More active columns than rows guarantees a singular reduced system;
  // keep only the largest entries and let the drop/add cycles refine the set.
  if (static_cast<int>(active.size()) > op.rows()) {
    std::sort(active.begin(), active.end(),
              [&](int a, int c) { return std::abs(x[a]) > std::abs(x[c]); });
    active.resize(op.rows());
    sign.clear();
    for (int i : active) sign.push_back(x[i] > 0.0 ? 1.0 : -1.0);
  }

  for (int cycle = 0; cycle < 100; ++cycle) {
    Eigen::VectorXd candidate = Eigen::VectorXd::Zero(n);
    if (!active.empty()) {
      Eigen::MatrixXd cs(op.rows(), active.size());
      for (size_t k = 0; k < active.size(); ++k) cs.col(k) = op.C.col(active[k]);
      Eigen::VectorXd rhs = cs.transpose() * b;
      for (size_t k = 0; k < active.size(); ++k)
        rhs[k] -= alpha * op.W_diag[active[k]] * sign[k];
      // Rank-revealing solve: a nearly dependent active set still yields a
      // finite candidate, and the sign checks below prune it further.
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(cs.transpose() * cs);
      Eigen::VectorXd xs = cod.solve(rhs);
      if (!xs.allFinite()) return false;

      std::vector<int> kept_active;
      std::vector<double> kept_sign;
      for (size_t k = 0; k < active.size(); ++k)
        if (xs[k] * sign[k] > 0.0) {
          kept_active.push_back(active[k]);
          kept_sign.push_back(sign[k]);
        }
      if (kept_active.size() != active.size()) {
        active = std::move(kept_active);
        sign = std::move(kept_sign);
        continue;
      }
      for (size_t k = 0; k < active.size(); ++k) candidate[active[k]] = xs[k];
    }

    const Eigen::VectorXd g = op.apply_adjoint(op.apply(candidate) - b);
    if (kkt_from_gradient(g, op.W_diag, alpha, candidate) <= kkt_tol) {
      x = std::move(candidate);
      return true;
    }
    int worst = -1;
    double worst_violation = 0.0;
    for (int i = 0; i < n; ++i) {
      if (candidate[i] != 0.0) continue;
      const double violation = std::abs(g[i]) - alpha * op.W_diag[i];
      if (violation > worst_violation) {
        worst_violation = violation;
        worst = i;
      }
    }
    if (worst < 0) return false;  // residual sits on the active set: solve was not exact enough
    active.push_back(worst);
    sign.push_back(g[worst] > 0.0 ? -1.0 : 1.0);
  }
  return false;
}

// FISTA with monotone safeguard: if the accelerated step raises the objective,
// redo a plain proximal step from the previous iterate and reset the momentum.
// Periodically hands the iterate to active_set_polish, which snaps to the
// exact minimizer once the support has been located.
inline SolveResult fista(const WeightedOperator& op, const Eigen::VectorXd& b,
                         const SolverConfig& cfg, Eigen::VectorXd x0) {
  if (b.size() != op.rows() || x0.size() != op.cols())
    throw DimensionMismatch("solve_weighted_lasso: vector sizes do not match operator");
  if (cfg.alpha <= 0.0 || cfg.rel_tolerance <= 0.0 || cfg.kkt_tolerance <= 0.0)
    throw DomainError("solve_weighted_lasso: alpha and tolerances must be positive");

  const double lip = operator_norm_sq(op);
  const double step = lip > 0.0 ? 1.0 / (1.001 * lip) : 1.0;
  const Eigen::VectorXd thresholds = (cfg.alpha * step) * op.W_diag;
  const auto penalty = [&](const Eigen::VectorXd& z) {
    return cfg.alpha * (op.W_diag.array() * z.array().abs()).sum();
  };

  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd r_x = op.apply(x) - b;  // residual Cx - b, kept current
  double fx = 0.5 * r_x.squaredNorm() + penalty(x);
  Eigen::VectorXd y = x;
  Eigen::VectorXd r_y = r_x;
  double t = 1.0;

  SolveResult result;
  result.objective_history.push_back(fx);
  result.kkt_residual = kkt_from_gradient(op.apply_adjoint(r_x), op.W_diag, cfg.alpha, x);
  result.converged = result.kkt_residual <= cfg.kkt_tolerance;

  const auto try_polish = [&]() {
    Eigen::VectorXd candidate = x;
    if (!active_set_polish(op, b, cfg.alpha, cfg.kkt_tolerance, candidate)) return false;
    Eigen::VectorXd r_candidate = op.apply(candidate) - b;
    const double f_candidate = 0.5 * r_candidate.squaredNorm() + penalty(candidate);
    if (f_candidate > fx * (1.0 + 1e-12)) return false;
    x = std::move(candidate);
    r_x = std::move(r_candidate);
    fx = f_candidate;
    result.objective_history.push_back(fx);
    result.kkt_residual = kkt_from_gradient(op.apply_adjoint(r_x), op.W_diag, cfg.alpha, x);
    result.converged = result.kkt_residual <= cfg.kkt_tolerance;
    return result.converged;
  };

  for (int it = 1; it <= cfg.max_iterations && !result.converged; ++it) {
    Eigen::VectorXd x_new = weighted_soft_threshold(y - step * op.apply_adjoint(r_y), thresholds);
    Eigen::VectorXd r_new = op.apply(x_new) - b;
    double f_new = 0.5 * r_new.squaredNorm() + penalty(x_new);

    // Momentum overshoot (beyond objective round-off): redo as a plain step.
    if (cfg.restart && f_new > fx * (1.0 + 1e-13)) {
      x_new = weighted_soft_threshold(x - step * op.apply_adjoint(r_x), thresholds);
      r_new = op.apply(x_new) - b;
      f_new = 0.5 * r_new.squaredNorm() + penalty(x_new);
      t = 1.0;
    }

    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_new;
    y = x_new + beta * (x_new - x);
    r_y = r_new + beta * (r_new - r_x);  // C is linear, so no extra product

    const double dx = (x_new - x).norm();
    const double scale = std::max(x_new.norm(), 1.0);
    x = std::move(x_new);
    r_x = std::move(r_new);
    fx = f_new;
    t = t_new;

    result.iterations = it;
    result.objective_history.push_back(fx);
    result.kkt_residual = kkt_from_gradient(op.apply_adjoint(r_x), op.W_diag, cfg.alpha, x);
    if (result.kkt_residual <= cfg.kkt_tolerance) {
      result.converged = true;
      break;
    }
    const bool stalled = dx <= cfg.rel_tolerance * scale;
    if ((it % 500 == 1 || stalled) && try_polish()) break;
    if (stalled) break;  // no further progress at this precision; converged stays false
  }
  if (!result.converged) try_polish();

  result.x = std::move(x);
  result.support = support_set(result.x);
  const double b_norm = b.norm();
  result.feasibility_residual = b_norm > 0.0 ? r_x.norm() / b_norm : r_x.norm();
  return result;
}

}  // namespace detail

inline SolveResult solve_weighted_lasso(const WeightedOperator& op, const Eigen::VectorXd& b,
                                        const SolverConfig& cfg) {
  return detail::fista(op, b, cfg, Eigen::VectorXd::Zero(op.cols()));
}

inline Eigen::VectorXd closed_form_single_source(const WeightedOperator& op, int j, double alpha) {
  if (j < 0 || j >= op.cols())
    throw DomainError("closed_form_single_source: column index out of range");
  const double wj = op.W_diag[j];
  if (alpha >= wj)
    throw AlphaTooLarge("closed_form_single_source: alpha >= w_j leaves no active source");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(op.cols());
  x[j] = 1.0 - alpha / wj;
  return x;
}

// Approximate basis pursuit min ||Wx||_1 s.t. Cx = b by driving alpha to
// (numerically) zero: geometric continuation, factor 10 per stage, each stage
// warm-started from the previous solution.
inline SolveResult solve_basis_pursuit(const WeightedOperator& op, const Eigen::VectorXd& b,
                                       const SolverConfig& cfg) {
  if (b.size() != op.rows())
    throw DimensionMismatch("solve_basis_pursuit: data length does not match operator");
  const double correlation = op.apply_adjoint(b).lpNorm<Eigen::Infinity>();
  if (correlation == 0.0) {
    SolveResult result;
    result.x = Eigen::VectorXd::Zero(op.cols());
    result.converged = true;
    result.objective_history.push_back(0.0);
    return result;
  }

  const int steps = std::max(cfg.continuation_steps, 1);
  const double w_min = op.W_diag.minCoeff();
  const double alpha_final = 1e-8 * correlation / w_min;

  SolverConfig stage = cfg;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(op.cols());
  SolveResult result;
  int total_iterations = 0;
  for (int k = 0; k < steps; ++k) {
    stage.alpha = alpha_final * std::pow(10.0, steps - 1 - k);
    // The subgradient boxes have width alpha*w_i, so the certificate must be
    // resolved well below that scale or spurious support survives the stage.
    stage.kkt_tolerance = std::min(cfg.kkt_tolerance, 0.01 * stage.alpha * w_min);
    result = detail::fista(op, b, stage, std::move(x));
    x = result.x;
    total_iterations += result.iterations;
  }
  result.iterations = total_iterations;
  result.x = std::move(x);
  return result;
}

}  // namespace wsr
