#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "CLI11.hpp"

#include "wsr/certificates.hpp"
#include "wsr/experiments.hpp"
#include "wsr/fem.hpp"
#include "wsr/rng.hpp"
#include "wsr/solver.hpp"
#include "wsr/weighting.hpp"

namespace {

// --- verify: small self-contained invariant checks -------------------------

struct CheckRunner {
  int failures = 0;
  int total = 0;

  void operator()(const std::string& name, bool ok) {
    ++total;
    if (!ok) ++failures;
    std::printf("[%s] %s\n", ok ? " ok " : "FAIL", name.c_str());
  }
};

void verify_forward(CheckRunner& check) {
  for (int n : {16, 32, 64}) {
    const wsr::ForwardModel model = wsr::assemble_forward(n, 1.0);
    // -lap(u) + u = 1 with zero Neumann data has the constant solution u = 1,
    // so a constant source must reproduce a unit boundary trace.
    const Eigen::VectorXd trace =
        model.trace_op * Eigen::VectorXd::Ones(model.cols());
    const double err = (trace - Eigen::VectorXd::Ones(model.rows())).cwiseAbs().maxCoeff();
    check("forward: constant source keeps a unit trace on N=" + std::to_string(n),
          err <= 1e-10);
    if (n == 16) {
      const double factor_err =
          (model.boundary_mass_sqrt * model.boundary_mass_sqrt - model.boundary_mass)
              .cwiseAbs()
              .maxCoeff();
      check("forward: boundary mass square root squares back", factor_err <= 1e-12);
      const double split_err =
          (model.A - model.boundary_mass_sqrt * model.trace_op).cwiseAbs().maxCoeff();
      check("forward: A factors through the boundary mass root", split_err <= 1e-12);
    }
  }

  auto trace_error = [](int n) {
    const wsr::ForwardModel model = wsr::assemble_forward(n, 1.0);
    Eigen::VectorXd f(model.cols()), u_exact(model.cols());
    for (int i = 0; i < model.cols(); ++i) {
      const double x = model.grid.node_x(i);
      const double y = model.grid.node_y(i);
      u_exact[i] = std::cos(M_PI * x) * std::cos(M_PI * y);
      f[i] = (2.0 * M_PI * M_PI + 1.0) * u_exact[i];
    }
    const Eigen::VectorXd trace = wsr::boundary_trace(model, f);
    const auto& bnodes = model.grid.boundary_nodes();
    double err = 0.0;
    for (int b = 0; b < model.rows(); ++b)
      err = std::max(err, std::abs(trace[b] - u_exact[bnodes[b]]));
    return err;
  };
  const double order = std::log2(trace_error(16) / trace_error(32));
  check("forward: boundary trace converges at order >= 1.5", order >= 1.5);
}

void verify_lemmas(CheckRunner& check) {
  bool residual_ok = true;
  bool inverse_ok = true;
  bool identity_ok = true;
  for (int s = 2; s <= 12; ++s)
    for (int r = 1; r <= 19; ++r) {
      const double rho = 0.05 * r;
      Eigen::MatrixXd q = Eigen::MatrixXd::Constant(s, s, rho);
      q.diagonal().setOnes();
      const Eigen::VectorXd y = wsr::q_closed_form_solution(rho, s);
      residual_ok = residual_ok &&
                    (q * y - Eigen::VectorXd::Ones(s)).cwiseAbs().maxCoeff() <= 1e-12;
      const double dense = q.inverse().cwiseAbs().rowwise().sum().maxCoeff();
      const double formula = wsr::q_inverse_inf_norm(rho, s);
      inverse_ok = inverse_ok && std::abs(formula - dense) <= 1e-10 * dense;
      identity_ok = identity_ok &&
                    std::abs(2.0 * wsr::r_perturbation_bound(rho, s) * formula - 1.0) <= 1e-12;
    }
  check("lemmas: equal-correlation system matches its closed form", residual_ok);
  check("lemmas: inverse norm formula matches a dense inverse", inverse_ok);
  check("lemmas: perturbation bound is half the inverse norm reciprocal", identity_ok);

  wsr::SplitMix64 rng(0xbeefcafeULL);
  bool nonneg_ok = true;
  for (int trial = 0; trial < 1000 && nonneg_ok; ++trial) {
    const int s = 2 + static_cast<int>(rng.next() % 11);
    const double rho = 0.05 + 0.9 * rng.uniform();
    const double bound = wsr::r_perturbation_bound(rho, s);
    Eigen::MatrixXd r(s, s);
    for (int i = 0; i < s; ++i) {
      for (int j = 0; j < s; ++j) r(i, j) = i == j ? 0.0 : 2.0 * rng.uniform() - 1.0;
      const double row = r.row(i).cwiseAbs().sum();
      if (row > 0.0) r.row(i) *= bound / row;
    }
    Eigen::MatrixXd q = Eigen::MatrixXd::Constant(s, s, rho);
    q.diagonal().setOnes();
    const Eigen::VectorXd x = (q + r).lu().solve(Eigen::VectorXd::Ones(s));
    nonneg_ok = x.minCoeff() >= -1e-12;
  }
  check("lemmas: solutions stay nonnegative at the perturbation bound", nonneg_ok);

  const wsr::ForwardModel model = wsr::assemble_forward(16, 1.0);
  const wsr::WeightedOperator op =
      wsr::build_weighted_operator(model.A, wsr::WeightingScheme::identity());
  bool argmax_ok = true;
  for (int j = 0; j < op.cols() && argmax_ok; ++j)
    argmax_ok = wsr::argmax_source(op, j) == j;
  check("lemmas: backprojection peaks at the true column for every j", argmax_ok);
}

void verify_solver(CheckRunner& check) {
  wsr::SplitMix64 rng(0x7e57ed);
  bool prox_ok = true;
  for (int trial = 0; trial < 20 && prox_ok; ++trial) {
    const double v = 4.0 * rng.uniform() - 2.0;
    const double t = 0.1 + rng.uniform();
    Eigen::VectorXd vv(1), tt(1);
    vv << v;
    tt << t;
    const double p = wsr::weighted_soft_threshold(vv, tt)[0];
    auto g = [&](double z) { return 0.5 * (z - v) * (z - v) + t * std::abs(z); };
    bool beats = true;
    for (int k = -200; k <= 200; ++k) beats = beats && g(p) <= g(p + k * 1e-3) + 1e-12;
    prox_ok = beats;
  }
  check("solver: soft threshold minimizes its one-dimensional objective", prox_ok);

  const wsr::ForwardModel model = wsr::assemble_forward(16, 1.0);
  const wsr::WeightedOperator op =
      wsr::build_weighted_operator(model.A, wsr::WeightingScheme::identity());
  const double w_min = op.W_diag.minCoeff();
  wsr::SolverConfig cfg;
  cfg.alpha = 1e-4;
  cfg.kkt_tolerance = 0.1 * w_min * w_min * 1e-6;

  bool closed_ok = true;
  bool kkt_ok = true;
  for (int j : {40, 144, 200}) {
    const Eigen::VectorXd b = op.C.col(j);
    const wsr::SolveResult res = wsr::solve_weighted_lasso(op, b, cfg);
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(op.cols());
    expected[j] = 1.0 - cfg.alpha / op.W_diag[j];
    closed_ok = closed_ok && res.converged &&
                (res.x - expected).cwiseAbs().maxCoeff() <= 1e-6 &&
                res.support == std::vector<int>{j};
    kkt_ok = kkt_ok && wsr::kkt_residual(op, b, cfg.alpha, res.x) <= 1e-8;
  }
  check("solver: single-column data reproduces the shrunk unit solution", closed_ok);
  check("solver: recomputed optimality residuals stay certified", kkt_ok);

  wsr::SolverConfig bp_cfg;
  bp_cfg.alpha = 1e-4;
  bp_cfg.kkt_tolerance = 1e-10;
  const int j = 123;
  const wsr::SolveResult bp = wsr::solve_basis_pursuit(op, op.C.col(j), bp_cfg);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(op.cols());
  e[j] = 1.0;
  const bool bp_ok = bp.converged && (bp.x - e).cwiseAbs().maxCoeff() <= 1e-4;
  check("solver: vanishing-regularization continuation recovers a unit source", bp_ok);
}

void verify_certificates(CheckRunner& check) {
  Eigen::MatrixXd c(2, 2);
  c << 1.0, 0.5, 0.0, 0.5;
  const wsr::WeightedOperator hand =
      wsr::build_weighted_operator(c, wsr::WeightingScheme::identity());
  const Eigen::VectorXd bp0 = wsr::weighted_backprojection(hand, 0);
  const double root_half = std::sqrt(0.5);
  check("certificates: hand-sized backprojection matches pencil arithmetic",
        std::abs(bp0[0] - 1.0) <= 1e-15 && std::abs(bp0[1] - root_half) <= 1e-15);

  const wsr::ForwardModel model = wsr::assemble_forward(16, 1.0);
  const wsr::WeightedOperator op =
      wsr::build_weighted_operator(model.A, wsr::WeightingScheme::identity());
  const double mu = wsr::mutual_coherence(op);
  check("certificates: boundary-trace columns are coherent but not parallel",
        mu > 0.0 && mu < 1.0);

  // Columns with an exactly equal pairwise correlation: the certificate
  // coefficients must match the closed-form equal-correlation solution.
  const int s = 3;
  const double rho = 0.5;
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(s + 1, s);
  for (int k = 0; k < s; ++k) {
    cols(k, k) = std::sqrt(1.0 - rho);
    cols(s, k) = std::sqrt(rho);
  }
  const wsr::WeightedOperator equi =
      wsr::build_weighted_operator(cols, wsr::WeightingScheme::identity());
  const wsr::CertificateReport cert = wsr::dual_certificate(
      equi, wsr::SourceConfiguration::from_entries({{0, 1.0}, {1, 1.0}, {2, 1.0}}, s));
  const Eigen::VectorXd z_expected = wsr::q_closed_form_solution(rho, s);
  check("certificates: equal-correlation certificate matches the closed form",
        (cert.z - z_expected).cwiseAbs().maxCoeff() <= 1e-10 && cert.z_nonnegative);

  Eigen::MatrixXd chain = Eigen::MatrixXd::Zero(4, 3);
  chain.col(0) << 1, 1, 0, 0;
  chain.col(1) << 0, 1, 1, 0;
  chain.col(2) << 0, 0, 1, 1;
  const wsr::WeightedOperator chain_op =
      wsr::build_weighted_operator(chain, wsr::WeightingScheme::identity());
  check("certificates: thresholding separates chained supports",
        !wsr::check_disjoint_supports(chain_op, {0, 2}, 0.0) &&
            wsr::check_disjoint_supports(chain_op, {0, 2}, 0.6));

  // The end columns of the chain correlate only through the middle
  // component, so exactly one of three coordinates overlaps at tau = 0.
  const wsr::OverlapReport overlap = wsr::disjointness_overlap(chain_op, 0, 2, {0.0, 0.6});
  check("certificates: overlap ratio counts shared thresholded components",
        overlap.ratios.size() == 2 && std::abs(overlap.ratios[0] - 1.0 / 3.0) <= 1e-15 &&
            overlap.ratios[1] == 0.0);
}

int cmd_verify(const std::string& suite) {
  CheckRunner check;
  if (suite == "forward" || suite == "all") verify_forward(check);
  if (suite == "lemmas" || suite == "all") verify_lemmas(check);
  if (suite == "solver" || suite == "all") verify_solver(check);
  if (suite == "certificates" || suite == "all") verify_certificates(check);
  std::printf("%d/%d checks passed\n", check.total - check.failures, check.total);
  return check.failures == 0 ? 0 : 1;
}

// --- run / sweep-overlap ---------------------------------------------------

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  wsr::ScenarioConfig cfg = wsr::load_scenario(config_path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  const wsr::RunArtifacts art = wsr::run_scenario(cfg);

  std::printf("scenario %s: %s after %d iterations\n", cfg.name.c_str(),
              art.summary.converged ? "converged" : "NOT converged",
              art.summary.iterations);
  std::printf("  objective            %.12e\n", art.summary.objective);
  std::printf("  kkt residual         %.3e\n", art.summary.kkt_residual);
  std::printf("  feasibility residual %.3e\n", art.summary.feasibility_residual);
  std::printf("  support size         %zu\n", art.summary.support.size());
  std::printf("  localization cells  ");
  for (int d : art.summary.localization_error_cells) std::printf(" %d", d);
  std::printf("\n  report               %s\n", art.report_path.c_str());
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir) {
  wsr::ScenarioConfig cfg = wsr::load_scenario(config_path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  const std::vector<wsr::OverlapSweepEntry> entries = wsr::sweep_overlap(cfg);
  std::printf("%-14s %-12s %-14s %s\n", "scheme", "pair", "first zero tau", "csv");
  for (const wsr::OverlapSweepEntry& e : entries) {
    const std::string pair = "(" + std::to_string(e.j) + "," + std::to_string(e.k) + ")";
    if (e.first_zero_tau)
      std::printf("%-14s %-12s %-14.4f %s\n", e.scheme_label.c_str(), pair.c_str(),
                  *e.first_zero_tau, e.csv_path.c_str());
    else
      std::printf("%-14s %-12s %-14s %s\n", e.scheme_label.c_str(), pair.c_str(), "none",
                  e.csv_path.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted sparse source reconstruction from boundary data"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string suite;

  CLI::App* run = app.add_subcommand("run", "Execute one scenario and write its artifacts");
  run->add_option("--config", config_path, "Scenario JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides the config)");

  CLI::App* verify = app.add_subcommand("verify", "Run the built-in invariant checks");
  verify->add_option("--suite", suite, "forward, lemmas, solver, certificates, or all")
      ->required()
      ->check(CLI::IsMember({"forward", "lemmas", "solver", "certificates", "all"}));

  CLI::App* sweep =
      app.add_subcommand("sweep-overlap", "Sweep the support-overlap threshold");
  sweep->add_option("--config", config_path, "Scenario JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--out", out_dir, "Output directory (overrides the config)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir);
    if (verify->parsed()) return cmd_verify(suite);
    return cmd_sweep(config_path, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
