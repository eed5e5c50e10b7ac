#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "wsr/certificates.hpp"
#include "wsr/errors.hpp"
#include "wsr/fem.hpp"
#include "wsr/grid.hpp"
#include "wsr/rng.hpp"
#include "wsr/solver.hpp"
#include "wsr/weighting.hpp"

namespace wsr {

struct NoiseSpec {
  double level = 0.0;  // target ||noise|| / ||data||, relative
  std::uint64_t seed = 0;
};

struct PointSource {
  double x = 0.0;
  double y = 0.0;
  double amplitude = 0.0;
};

struct AnalysisFlags {
  bool certificates = false;
  bool overlap = false;
  bool coherence = false;
};

// A fully specified reconstruction experiment: data are synthesized on the
// forward grid, transferred to the inverse grid, and fed to the weighted
// solver.  Loaded from JSON by load_scenario or constructed directly.
struct ScenarioConfig {
  std::string name;
  int forward_n = 0;  // cells per side of the data-generation grid
  int inverse_n = 0;  // cells per side of the reconstruction grid
  double epsilon = 1.0;
  bool inverse_crime = false;  // generate data with the reconstruction operator itself
  std::vector<PointSource> sources;
  WeightingScheme b_scheme;
  bool unweighted = false;  // replace the column-norm weights by ones
  double alpha = 1e-4;
  NoiseSpec noise;
  SolverConfig solver;  // solver.alpha is overwritten by `alpha` at run time
  AnalysisFlags analyses;
  std::vector<double> overlap_taus;             // empty selects the default grid
  std::vector<WeightingScheme> overlap_schemes;  // empty selects {b_scheme}
  std::string output_dir;
};

struct RunSummary {
  double objective = 0.0;
  double kkt_residual = 0.0;
  double feasibility_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<int> support;
  // One entry per true source: Chebyshev cell distance to the nearest
  // recovered support node, or -1 when the recovered support is empty.
  std::vector<int> localization_error_cells;
};

struct RunArtifacts {
  std::string solution_path;
  std::string observation_path;
  std::string report_path;
  std::vector<std::string> heatmap_paths;
  RunSummary summary;
};

struct OverlapSweepEntry {
  std::string scheme_label;
  int j = 0;
  int k = 0;
  std::vector<double> tau_values;
  std::vector<double> ratios;
  std::optional<double> first_zero_tau;  // smallest tau with zero overlap, if any
  std::string csv_path;
};

// --- noise -----------------------------------------------------------------

// Adds Gaussian noise rescaled so that ||out - y|| / ||y|| equals `level`
// exactly (up to rounding in the final scaling).  level = 0 returns y
// unchanged; noise on identically zero data has no meaningful scale.
inline Eigen::VectorXd add_noise(const Eigen::VectorXd& y, const NoiseSpec& noise) {
  if (!(noise.level >= 0.0)) throw DomainError("add_noise: noise level must be nonnegative");
  if (noise.level == 0.0) return y;
  const double norm_y = y.norm();
  if (norm_y == 0.0) throw ZeroData("add_noise: data vector is zero, relative level undefined");
  SplitMix64 rng(noise.seed);
  Eigen::VectorXd eta(y.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] = rng.normal();
  const double norm_eta = eta.norm();
  if (norm_eta == 0.0) throw ZeroData("add_noise: degenerate noise draw");
  return y + eta * (noise.level * norm_y / norm_eta);
}

// --- observation synthesis -------------------------------------------------

// Maps point sources to nodal unit loads on `grid`.  Sources landing on the
// same node accumulate; zero (or cancelled) amplitudes are dropped so the
// result satisfies the SourceConfiguration invariants.
inline SourceConfiguration snap_sources(const Grid& grid,
                                        const std::vector<PointSource>& sources) {
  std::map<int, double> acc;
  for (const PointSource& s : sources) acc[locate_node(grid, s.x, s.y)] += s.amplitude;
  std::vector<std::pair<int, double>> entries;
  for (const auto& [idx, amp] : acc)
    if (amp != 0.0) entries.emplace_back(idx, amp);
  return SourceConfiguration::from_entries(std::move(entries), grid.node_count());
}

namespace detail {

// Core of synthesize_observation, with the models supplied by the caller so
// run_scenario can reuse its own assemblies.  When the grids differ the data
// are produced on the fine grid and the boundary trace is interpolated down
// *before* the square-root boundary mass of the inverse grid is applied, so
// the inverse problem never sees the fine discretization directly.
inline std::pair<Eigen::VectorXd, SourceConfiguration> synthesize(
    const ScenarioConfig& cfg, const ForwardModel& fine, const ForwardModel& coarse) {
  const SourceConfiguration truth = snap_sources(coarse.grid, cfg.sources);
  Eigen::VectorXd y;
  if (cfg.inverse_crime) {
    y = coarse.A * truth.to_vector(coarse.grid.node_count());
  } else {
    const SourceConfiguration on_fine = snap_sources(fine.grid, cfg.sources);
    const Eigen::VectorXd trace_fine =
        fine.trace_op * on_fine.to_vector(fine.grid.node_count());
    const Eigen::VectorXd trace_coarse =
        transfer_boundary_trace(fine.grid, coarse.grid, trace_fine);
    y = coarse.boundary_mass_sqrt * trace_coarse;
  }
  return {add_noise(y, cfg.noise), truth};
}

}  // namespace detail

inline void validate_scenario(const ScenarioConfig& cfg) {
  if (cfg.name.empty()) throw ValidationError("scenario: name must not be empty");
  if (cfg.forward_n < 2 || cfg.inverse_n < 2)
    throw ValidationError("scenario: grids need at least 2 cells per side");
  if (cfg.forward_n < cfg.inverse_n)
    throw ValidationError("scenario: forward grid must be at least as fine as inverse grid");
  if (cfg.inverse_crime) {
    if (cfg.forward_n != cfg.inverse_n)
      throw ValidationError("scenario: inverse_crime requires matching grids");
  } else if (cfg.forward_n % cfg.inverse_n != 0) {
    throw ValidationError("scenario: forward grid must refine the inverse grid");
  }
  if (!(cfg.alpha > 0.0)) throw ValidationError("scenario: alpha must be positive");
  if (!(cfg.noise.level >= 0.0)) throw ValidationError("scenario: noise level must be nonnegative");
  if (cfg.sources.empty()) throw ValidationError("scenario: at least one source is required");
  for (const PointSource& s : cfg.sources)
    if (!(s.x >= 0.0 && s.x <= 1.0 && s.y >= 0.0 && s.y <= 1.0))
      throw ValidationError("scenario: source location outside the unit square");
  for (double tau : cfg.overlap_taus)
    if (!(tau >= 0.0 && tau <= 1.0))
      throw ValidationError("scenario: overlap tau values must lie in [0,1]");
}

// Synthesized boundary observation plus the true sources snapped to the
// inverse grid.  Assembles both models; prefer run_scenario when the
// reconstruction is wanted too.
inline std::pair<Eigen::VectorXd, SourceConfiguration> synthesize_observation(
    const ScenarioConfig& cfg) {
  validate_scenario(cfg);
  const ForwardModel coarse = assemble_forward(cfg.inverse_n, cfg.epsilon);
  if (cfg.forward_n == cfg.inverse_n) return detail::synthesize(cfg, coarse, coarse);
  const ForwardModel fine = assemble_forward(cfg.forward_n, cfg.epsilon);
  return detail::synthesize(cfg, fine, coarse);
}

// --- artifact writers ------------------------------------------------------

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::ofstream open_output(const std::string& path, const char* who) {
  std::ofstream out(path);
  if (!out) throw IoError(std::string(who) + ": cannot open '" + path + "' for writing");
  return out;
}

}  // namespace detail

inline void write_solution_csv(const std::string& path, const Grid& grid,
                               const Eigen::VectorXd& x) {
  if (x.size() != grid.node_count())
    throw DimensionMismatch("write_solution_csv: vector does not match the grid");
  std::ofstream out = detail::open_output(path, "write_solution_csv");
  out << "node_index,x_coord,y_coord,value\n";
  for (int i = 0; i < grid.node_count(); ++i)
    out << i << ',' << detail::fmt17(grid.node_x(i)) << ',' << detail::fmt17(grid.node_y(i))
        << ',' << detail::fmt17(x[i]) << '\n';
  if (!out) throw IoError("write_solution_csv: write failed for '" + path + "'");
}

inline void write_observation_csv(const std::string& path, const Eigen::VectorXd& y) {
  std::ofstream out = detail::open_output(path, "write_observation_csv");
  out << "boundary_index,value\n";
  for (Eigen::Index i = 0; i < y.size(); ++i)
    out << i << ',' << detail::fmt17(y[i]) << '\n';
  if (!out) throw IoError("write_observation_csv: write failed for '" + path + "'");
}

namespace detail {

// Reads a two-or-more-column CSV written by the writers above and returns the
// last column, checking that the leading index column is 0,1,2,...
inline Eigen::VectorXd read_indexed_csv(const std::string& path, const char* who) {
  std::ifstream in(path);
  if (!in) throw IoError(std::string(who) + ": cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(std::string(who) + ": empty file '" + path + "'");
  std::vector<double> values;
  int expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() < 2) throw ParseError(std::string(who) + ": malformed row '" + line + "'");
    std::size_t pos = 0;
    const int idx = std::stoi(fields.front(), &pos);
    if (idx != expected)
      throw ParseError(std::string(who) + ": rows out of order at index " + fields.front());
    ++expected;
    values.push_back(std::stod(fields.back(), &pos));
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace detail

inline Eigen::VectorXd read_solution_csv(const std::string& path) {
  return detail::read_indexed_csv(path, "read_solution_csv");
}

inline Eigen::VectorXd read_observation_csv(const std::string& path) {
  return detail::read_indexed_csv(path, "read_observation_csv");
}

// Nodal field as a plain ASCII PGM image, one pixel per grid node, top row of
// the image at y = 1.  Values are scaled linearly to 0..255; a constant field
// maps to mid-gray.  The header comment records the original range.
inline void write_heatmap(const std::string& path, const Grid& grid,
                          const Eigen::VectorXd& x) {
  if (x.size() != grid.node_count())
    throw DimensionMismatch("write_heatmap: vector does not match the grid");
  double lo = x.minCoeff();
  double hi = x.maxCoeff();
  if (lo == 0.0) lo = 0.0;  // normalize a negative zero for the header
  if (hi == 0.0) hi = 0.0;
  const int np = grid.cells_per_side() + 1;
  std::ofstream out = detail::open_output(path, "write_heatmap");
  out << "P2\n# min " << detail::fmt17(lo) << " max " << detail::fmt17(hi) << "\n"
      << np << ' ' << np << "\n255\n";
  for (int j = grid.cells_per_side(); j >= 0; --j) {
    for (int i = 0; i < np; ++i) {
      int pixel = 128;
      if (hi > lo)
        pixel = static_cast<int>(std::lround(255.0 * (x[grid.node_index(i, j)] - lo) / (hi - lo)));
      out << pixel << (i + 1 < np ? ' ' : '\n');
    }
  }
  if (!out) throw IoError("write_heatmap: write failed for '" + path + "'");
}

inline void write_overlap_csv(const std::string& path, const std::vector<double>& taus,
                              const std::vector<double>& ratios) {
  if (taus.size() != ratios.size())
    throw DimensionMismatch("write_overlap_csv: tau/ratio length mismatch");
  std::ofstream out = detail::open_output(path, "write_overlap_csv");
  out << "tau,ratio\n";
  for (std::size_t i = 0; i < taus.size(); ++i)
    out << detail::fmt17(taus[i]) << ',' << detail::fmt17(ratios[i]) << '\n';
  if (!out) throw IoError("write_overlap_csv: write failed for '" + path + "'");
}

// --- scenario execution ----------------------------------------------------

inline std::vector<int> localization_errors(const Grid& grid,
                                            const std::vector<int>& truth_nodes,
                                            const std::vector<int>& support) {
  std::vector<int> out;
  out.reserve(truth_nodes.size());
  for (int t : truth_nodes) {
    int best = -1;
    for (int s : support) {
      const int d = grid.cell_distance(t, s);
      if (best < 0 || d < best) best = d;
    }
    out.push_back(best);
  }
  return out;
}

inline std::vector<double> default_overlap_taus() {
  std::vector<double> taus(51);
  for (int i = 0; i <= 50; ++i) taus[i] = i / 50.0;
  return taus;
}

namespace detail {

inline nlohmann::ordered_json scheme_json(const WeightingScheme& s) {
  nlohmann::ordered_json j;
  j["b"] = s.label();
  switch (s.kind) {
    case WeightingScheme::Kind::TruncatedPseudoInverse:
      j["k"] = s.truncation;
      break;
    case WeightingScheme::Kind::RandomSparse:
      j["p"] = s.random_rows;
      j["density"] = s.density;
      j["seed"] = s.seed;
      break;
    case WeightingScheme::Kind::PreOrthogonalizer:
      j["indices"] = s.support;
      break;
    case WeightingScheme::Kind::Identity:
      break;
  }
  return j;
}

inline nlohmann::ordered_json certificate_json(const CertificateReport& cert) {
  nlohmann::ordered_json j;
  j["cond1_residual"] = cert.cond1_residual;
  j["cond2_margin"] = cert.cond2_margin;
  j["valid"] = cert.valid;
  j["z_nonnegative"] = cert.z_nonnegative;
  j["z"] = std::vector<double>(cert.z.data(), cert.z.data() + cert.z.size());
  return j;
}

inline nlohmann::ordered_json gram_json(const GramAnalysis& gram) {
  nlohmann::ordered_json j;
  j["indices"] = gram.J;
  j["rho_bar"] = gram.rho_bar;
  j["r_inf_norm"] = gram.r_inf_norm;
  j["bound"] = gram.bound;
  j["rho_in_domain"] = gram.rho_in_domain;
  j["bound_satisfied"] = gram.bound_satisfied;
  j["most_parallel_satisfied"] = gram.most_parallel_satisfied;
  return j;
}

}  // namespace detail

// Runs one scenario end to end: synthesize the observation, build the
// weighted operator on the inverse grid, solve, run the requested analyses,
// and write solution/observation/report/heatmap artifacts into output_dir.
inline RunArtifacts run_scenario(const ScenarioConfig& cfg) {
  validate_scenario(cfg);
  if (cfg.output_dir.empty()) throw ValidationError("run_scenario: output_dir must not be empty");
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec)
    throw IoError("run_scenario: cannot create '" + cfg.output_dir + "': " + ec.message());

  const ForwardModel coarse = assemble_forward(cfg.inverse_n, cfg.epsilon);
  std::optional<ForwardModel> fine_model;
  if (cfg.forward_n != cfg.inverse_n)
    fine_model.emplace(assemble_forward(cfg.forward_n, cfg.epsilon));
  const ForwardModel& fine = fine_model ? *fine_model : coarse;

  auto [y, truth] = detail::synthesize(cfg, fine, coarse);

  WeightingScheme scheme = cfg.b_scheme;
  if (scheme.kind == WeightingScheme::Kind::PreOrthogonalizer && scheme.support.empty())
    scheme.support = truth.support();
  WeightedOperator op = build_weighted_operator(coarse.A, scheme);
  if (cfg.unweighted) op.W_diag.setOnes();

  const Eigen::VectorXd b = op.apply_b(y);
  SolverConfig solver_cfg = cfg.solver;
  solver_cfg.alpha = cfg.alpha;
  const SolveResult res = solve_weighted_lasso(op, b, solver_cfg);

  RunArtifacts art;
  art.summary.objective = objective(op, b, cfg.alpha, res.x);
  art.summary.kkt_residual = res.kkt_residual;
  art.summary.feasibility_residual = res.feasibility_residual;
  art.summary.iterations = res.iterations;
  art.summary.converged = res.converged;
  art.summary.support = res.support;
  art.summary.localization_error_cells =
      localization_errors(coarse.grid, truth.support(), res.support);

  const std::filesystem::path dir(cfg.output_dir);
  art.solution_path = (dir / "solution.csv").string();
  art.observation_path = (dir / "observation.csv").string();
  art.report_path = (dir / "report.json").string();
  const std::string solution_pgm = (dir / "solution.pgm").string();
  const std::string truth_pgm = (dir / "truth.pgm").string();
  art.heatmap_paths = {solution_pgm, truth_pgm};

  write_solution_csv(art.solution_path, coarse.grid, res.x);
  write_observation_csv(art.observation_path, y);
  write_heatmap(solution_pgm, coarse.grid, res.x);
  write_heatmap(truth_pgm, coarse.grid, truth.to_vector(coarse.grid.node_count()));

  nlohmann::ordered_json report;
  report["scenario"] = {{"name", cfg.name},
                        {"forward_N", cfg.forward_n},
                        {"inverse_N", cfg.inverse_n},
                        {"epsilon", cfg.epsilon},
                        {"inverse_crime", cfg.inverse_crime},
                        {"alpha", cfg.alpha},
                        {"unweighted", cfg.unweighted},
                        {"noise", {{"level", cfg.noise.level}, {"seed", cfg.noise.seed}}}};
  report["scenario"]["b_scheme"] = detail::scheme_json(scheme);

  nlohmann::ordered_json truth_json;
  truth_json["nodes"] = truth.support();
  std::vector<double> amplitudes, xs, ys;
  for (const auto& [idx, amp] : truth.entries) {
    amplitudes.push_back(amp);
    xs.push_back(coarse.grid.node_x(idx));
    ys.push_back(coarse.grid.node_y(idx));
  }
  truth_json["amplitudes"] = amplitudes;
  truth_json["x"] = xs;
  truth_json["y"] = ys;
  report["truth"] = truth_json;

  report["summary"] = {{"objective", art.summary.objective},
                       {"kkt_residual", art.summary.kkt_residual},
                       {"feasibility_residual", art.summary.feasibility_residual},
                       {"iterations", art.summary.iterations},
                       {"converged", art.summary.converged},
                       {"support", art.summary.support},
                       {"support_size", static_cast<int>(art.summary.support.size())},
                       {"localization_error_cells", art.summary.localization_error_cells}};

  if (cfg.analyses.certificates && !truth.entries.empty()) {
    const bool mixed = [&] {
      const double first = truth.entries.front().second;
      for (const auto& [idx, amp] : truth.entries)
        if (amp * first < 0.0) return true;
      return false;
    }();
    const CertificateReport cert =
        mixed ? dual_certificate_disjoint(op, truth) : dual_certificate(op, truth);
    report["certificate"] = detail::certificate_json(cert);
    if (truth.entries.size() >= 2) {
      const GramAnalysis gram = analyze_parallel_recovery(op, truth.support(), std::nullopt);
      report["gram"] = detail::gram_json(gram);
    }
  }

  if (cfg.analyses.coherence) report["mutual_coherence"] = mutual_coherence(op);

  if (cfg.analyses.overlap && truth.entries.size() >= 2) {
    const std::vector<double> taus =
        cfg.overlap_taus.empty() ? default_overlap_taus() : cfg.overlap_taus;
    nlohmann::ordered_json overlaps = nlohmann::ordered_json::array();
    const std::vector<int> nodes = truth.support();
    for (std::size_t a = 0; a < nodes.size(); ++a)
      for (std::size_t c = a + 1; c < nodes.size(); ++c) {
        const OverlapReport rep = disjointness_overlap(op, nodes[a], nodes[c], taus);
        const std::string csv = (dir / ("overlap_" + std::to_string(rep.j) + "_" +
                                        std::to_string(rep.k) + ".csv"))
                                    .string();
        write_overlap_csv(csv, rep.tau_values, rep.ratios);
        overlaps.push_back({{"j", rep.j},
                            {"k", rep.k},
                            {"n", rep.n},
                            {"tau", rep.tau_values},
                            {"ratio", rep.ratios},
                            {"csv", csv}});
      }
    report["overlap"] = overlaps;
  }

  report["artifacts"] = {{"solution", art.solution_path},
                         {"observation", art.observation_path},
                         {"heatmaps", art.heatmap_paths}};

  std::ofstream out = detail::open_output(art.report_path, "run_scenario");
  out << report.dump(2) << '\n';
  if (!out) throw IoError("run_scenario: write failed for '" + art.report_path + "'");
  return art;
}

// Support-overlap sweep over tau for every pair of true sources, repeated for
// each scheme in overlap_schemes.  Only the inverse-grid operator is needed;
// no observation is synthesized and nothing is solved.
inline std::vector<OverlapSweepEntry> sweep_overlap(const ScenarioConfig& cfg) {
  validate_scenario(cfg);
  if (cfg.output_dir.empty()) throw ValidationError("sweep_overlap: output_dir must not be empty");
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec)
    throw IoError("sweep_overlap: cannot create '" + cfg.output_dir + "': " + ec.message());

  const ForwardModel coarse = assemble_forward(cfg.inverse_n, cfg.epsilon);
  const SourceConfiguration truth = snap_sources(coarse.grid, cfg.sources);
  const std::vector<int> nodes = truth.support();
  if (nodes.size() < 2)
    throw ValidationError("sweep_overlap: need at least two distinct source nodes");
  const std::vector<double> taus =
      cfg.overlap_taus.empty() ? default_overlap_taus() : cfg.overlap_taus;
  const std::vector<WeightingScheme> schemes =
      cfg.overlap_schemes.empty() ? std::vector<WeightingScheme>{cfg.b_scheme}
                                  : cfg.overlap_schemes;

  const std::filesystem::path dir(cfg.output_dir);
  std::vector<OverlapSweepEntry> entries;
  for (const WeightingScheme& scheme_in : schemes) {
    WeightingScheme scheme = scheme_in;
    if (scheme.kind == WeightingScheme::Kind::PreOrthogonalizer && scheme.support.empty())
      scheme.support = nodes;
    const WeightedOperator op = build_weighted_operator(coarse.A, scheme);
    for (std::size_t a = 0; a < nodes.size(); ++a)
      for (std::size_t c = a + 1; c < nodes.size(); ++c) {
        const OverlapReport rep = disjointness_overlap(op, nodes[a], nodes[c], taus);
        OverlapSweepEntry entry;
        entry.scheme_label = scheme.label();
        entry.j = rep.j;
        entry.k = rep.k;
        entry.tau_values = rep.tau_values;
        entry.ratios = rep.ratios;
        for (std::size_t t = 0; t < rep.ratios.size(); ++t)
          if (rep.ratios[t] == 0.0) {
            entry.first_zero_tau = rep.tau_values[t];
            break;
          }
        entry.csv_path = (dir / ("overlap_" + entry.scheme_label + "_" +
                                 std::to_string(entry.j) + "_" + std::to_string(entry.k) +
                                 ".csv"))
                             .string();
        write_overlap_csv(entry.csv_path, entry.tau_values, entry.ratios);
        entries.push_back(std::move(entry));
      }
  }

  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  for (const OverlapSweepEntry& e : entries) {
    nlohmann::ordered_json row = {{"scheme", e.scheme_label},
                                  {"j", e.j},
                                  {"k", e.k},
                                  {"csv", e.csv_path}};
    if (e.first_zero_tau)
      row["first_zero_tau"] = *e.first_zero_tau;
    else
      row["first_zero_tau"] = nullptr;
    summary.push_back(row);
  }
  std::ofstream out = detail::open_output((dir / "sweep.json").string(), "sweep_overlap");
  out << summary.dump(2) << '\n';
  return entries;
}

// --- JSON loading ----------------------------------------------------------

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const char* where,
                                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed)
      if (it.key() == key) {
        known = true;
        break;
      }
    if (!known)
      throw ParseError(std::string("scenario ") + where + ": unknown key '" + it.key() + "'");
  }
}

inline const nlohmann::json& require_key(const nlohmann::json& obj, const char* where,
                                         const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end())
    throw ParseError(std::string("scenario ") + where + ": missing key '" + key + "'");
  return *it;
}

inline WeightingScheme parse_scheme(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("scenario b_scheme: expected an object");
  const std::string kind = require_key(j, "b_scheme", "b").get<std::string>();
  if (kind == "identity") {
    reject_unknown_keys(j, "b_scheme", {"b"});
    return WeightingScheme::identity();
  }
  if (kind == "trunc_pinv") {
    reject_unknown_keys(j, "b_scheme", {"b", "k"});
    return WeightingScheme::truncated_pinv(require_key(j, "b_scheme", "k").get<int>());
  }
  if (kind == "random_sparse") {
    reject_unknown_keys(j, "b_scheme", {"b", "p", "density", "seed"});
    return WeightingScheme::random_sparse(j.value("p", 0), j.value("density", 0.1),
                                          j.value("seed", std::uint64_t{0}));
  }
  if (kind == "pre_orth") {
    reject_unknown_keys(j, "b_scheme", {"b", "indices"});
    // An absent index list means "use the scenario's own source nodes".
    return WeightingScheme::pre_orthogonalizer(
        j.value("indices", std::vector<int>{}));
  }
  throw ParseError("scenario b_scheme: unknown kind '" + kind + "'");
}

inline ScenarioConfig parse_scenario(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("scenario: top level must be an object");
  reject_unknown_keys(j, "config",
                      {"name", "forward_N", "inverse_N", "epsilon", "inverse_crime", "sources",
                       "b_scheme", "unweighted", "alpha", "noise", "solver", "analyses",
                       "overlap_taus", "overlap_schemes", "output_dir"});
  ScenarioConfig cfg;
  cfg.name = require_key(j, "config", "name").get<std::string>();
  cfg.forward_n = require_key(j, "config", "forward_N").get<int>();
  cfg.inverse_n = require_key(j, "config", "inverse_N").get<int>();
  cfg.epsilon = j.value("epsilon", 1.0);
  cfg.inverse_crime = j.value("inverse_crime", false);
  cfg.unweighted = j.value("unweighted", false);
  cfg.alpha = j.value("alpha", 1e-4);
  cfg.output_dir = j.value("output_dir", std::string{});

  const nlohmann::json& sources = require_key(j, "config", "sources");
  if (!sources.is_array()) throw ParseError("scenario sources: expected an array");
  for (const nlohmann::json& s : sources) {
    if (!s.is_object()) throw ParseError("scenario sources: expected objects");
    reject_unknown_keys(s, "sources", {"x", "y", "amplitude"});
    PointSource p;
    p.x = require_key(s, "sources", "x").get<double>();
    p.y = require_key(s, "sources", "y").get<double>();
    p.amplitude = require_key(s, "sources", "amplitude").get<double>();
    cfg.sources.push_back(p);
  }

  cfg.b_scheme = parse_scheme(require_key(j, "config", "b_scheme"));

  if (j.contains("noise")) {
    const nlohmann::json& n = j.at("noise");
    reject_unknown_keys(n, "noise", {"level", "seed"});
    cfg.noise.level = n.value("level", 0.0);
    cfg.noise.seed = n.value("seed", std::uint64_t{0});
  }
  if (j.contains("solver")) {
    const nlohmann::json& s = j.at("solver");
    reject_unknown_keys(s, "solver",
                        {"max_iterations", "rel_tolerance", "kkt_tolerance",
                         "continuation_steps", "restart"});
    cfg.solver.max_iterations = s.value("max_iterations", cfg.solver.max_iterations);
    cfg.solver.rel_tolerance = s.value("rel_tolerance", cfg.solver.rel_tolerance);
    cfg.solver.kkt_tolerance = s.value("kkt_tolerance", cfg.solver.kkt_tolerance);
    cfg.solver.continuation_steps = s.value("continuation_steps", cfg.solver.continuation_steps);
    cfg.solver.restart = s.value("restart", cfg.solver.restart);
  }
  if (j.contains("analyses")) {
    const nlohmann::json& a = j.at("analyses");
    reject_unknown_keys(a, "analyses", {"certificates", "overlap", "coherence"});
    cfg.analyses.certificates = a.value("certificates", false);
    cfg.analyses.overlap = a.value("overlap", false);
    cfg.analyses.coherence = a.value("coherence", false);
  }
  if (j.contains("overlap_taus"))
    cfg.overlap_taus = j.at("overlap_taus").get<std::vector<double>>();
  if (j.contains("overlap_schemes")) {
    const nlohmann::json& arr = j.at("overlap_schemes");
    if (!arr.is_array()) throw ParseError("scenario overlap_schemes: expected an array");
    for (const nlohmann::json& s : arr) cfg.overlap_schemes.push_back(parse_scheme(s));
  }
  return cfg;
}

}  // namespace detail

inline ScenarioConfig scenario_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  ScenarioConfig cfg;
  try {
    cfg = detail::parse_scenario(j);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  validate_scenario(cfg);
  return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_scenario: cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return scenario_from_json(buffer.str());
}

}  // namespace wsr
