#include "wsr/experiments.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "wsr/fem.hpp"
#include "wsr/rng.hpp"

namespace {

using wsr::NoiseSpec;
using wsr::PointSource;
using wsr::ScenarioConfig;
using wsr::SourceConfiguration;
using wsr::WeightingScheme;

std::filesystem::path fresh_dir(const std::string& name) {
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "wsr_experiments" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  EXPECT_TRUE(in.good()) << path;
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ScenarioConfig basic_scenario(const std::string& name) {
  ScenarioConfig cfg;
  cfg.name = name;
  cfg.forward_n = 16;
  cfg.inverse_n = 16;
  cfg.inverse_crime = true;
  cfg.sources.push_back({0.25, 0.25, 1.0});
  cfg.b_scheme = WeightingScheme::identity();
  return cfg;
}

TEST(AddNoise, HitsRequestedRelativeNormExactly) {
  Eigen::VectorXd y(2);
  y << 3.0, 4.0;
  const Eigen::VectorXd out = wsr::add_noise(y, {0.02, 7});
  EXPECT_NEAR((out - y).norm(), 0.1, 1e-15);

  wsr::SplitMix64 rng(99);
  Eigen::VectorXd big(40);
  for (int i = 0; i < 40; ++i) big[i] = rng.normal();
  const double level = 0.37;
  const Eigen::VectorXd noisy = wsr::add_noise(big, {level, 123});
  EXPECT_NEAR((noisy - big).norm() / big.norm(), level, level * 1e-14);
}

TEST(AddNoise, DeterministicPerSeed) {
  Eigen::VectorXd y(5);
  y << 1, -2, 3, -4, 5;
  const Eigen::VectorXd a = wsr::add_noise(y, {0.1, 42});
  const Eigen::VectorXd b = wsr::add_noise(y, {0.1, 42});
  const Eigen::VectorXd c = wsr::add_noise(y, {0.1, 43});
  EXPECT_EQ((a - b).norm(), 0.0);
  EXPECT_GT((a - c).norm(), 0.0);
}

TEST(AddNoise, ZeroLevelReturnsDataUnchanged) {
  Eigen::VectorXd y(3);
  y << 0.1, 0.2, 0.3;
  const Eigen::VectorXd out = wsr::add_noise(y, {0.0, 5});
  EXPECT_EQ((out - y).norm(), 0.0);
}

TEST(AddNoise, RejectsZeroDataAndNegativeLevel) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  EXPECT_THROW(wsr::add_noise(zero, {0.1, 0}), wsr::ZeroData);
  Eigen::VectorXd y(1);
  y << 1.0;
  EXPECT_THROW(wsr::add_noise(y, {-0.1, 0}), wsr::DomainError);
}

TEST(SnapSources, MapsMergesAndDropsCancelledAmplitudes) {
  const wsr::Grid grid(4);
  const SourceConfiguration single = wsr::snap_sources(grid, {{0.5, 0.5, 2.0}});
  ASSERT_EQ(single.entries.size(), 1u);
  EXPECT_EQ(single.entries[0].first, grid.node_index(2, 2));
  EXPECT_EQ(single.entries[0].second, 2.0);

  const SourceConfiguration merged =
      wsr::snap_sources(grid, {{0.5, 0.5, 2.0}, {0.51, 0.49, 0.5}});
  ASSERT_EQ(merged.entries.size(), 1u);
  EXPECT_EQ(merged.entries[0].second, 2.5);

  const SourceConfiguration cancelled =
      wsr::snap_sources(grid, {{0.5, 0.5, 1.0}, {0.5, 0.5, -1.0}});
  EXPECT_TRUE(cancelled.entries.empty());

  const SourceConfiguration zero_amp = wsr::snap_sources(grid, {{0.25, 0.75, 0.0}});
  EXPECT_TRUE(zero_amp.entries.empty());
}

TEST(Synthesize, InverseCrimeReproducesOperatorColumn) {
  ScenarioConfig cfg = basic_scenario("crime");
  const auto [y, truth] = wsr::synthesize_observation(cfg);
  const wsr::ForwardModel model = wsr::assemble_forward(16, 1.0);
  ASSERT_EQ(truth.entries.size(), 1u);
  const Eigen::VectorXd expected = model.A.col(truth.entries[0].first);
  EXPECT_EQ((y - expected).norm(), 0.0);
}

TEST(Synthesize, ZeroAmplitudeSourceGivesZeroObservation) {
  ScenarioConfig cfg = basic_scenario("zero");
  cfg.sources = {{0.25, 0.25, 0.0}};
  const auto [y, truth] = wsr::synthesize_observation(cfg);
  EXPECT_EQ(y.norm(), 0.0);
  EXPECT_TRUE(truth.entries.empty());
}

TEST(Synthesize, MatchingGridsAgreeWithDirectPrediction) {
  // Same grid on both sides without the shortcut flag: the boundary-trace
  // transfer degenerates to the identity, so the data must equal A x*.
  ScenarioConfig cfg = basic_scenario("match");
  cfg.inverse_crime = false;
  const auto [y, truth] = wsr::synthesize_observation(cfg);
  const wsr::ForwardModel model = wsr::assemble_forward(16, 1.0);
  const Eigen::VectorXd direct = model.A * truth.to_vector(model.grid.node_count());
  EXPECT_LT((y - direct).norm(), 1e-12 * direct.norm());
}

TEST(Synthesize, FinerForwardGridShiftsTheObservation) {
  ScenarioConfig cfg = basic_scenario("gap");
  cfg.forward_n = 32;
  cfg.inverse_crime = false;
  const auto [y, truth] = wsr::synthesize_observation(cfg);
  const wsr::ForwardModel coarse = wsr::assemble_forward(16, 1.0);
  const Eigen::VectorXd crime = coarse.A * truth.to_vector(coarse.grid.node_count());
  EXPECT_GT((y - crime).norm() / crime.norm(), 1e-6);
}

TEST(Heatmap, SingleHotNodeAndSingleColdNode) {
  const wsr::Grid grid(2);
  const auto dir = fresh_dir("heatmap");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(9);
  x[grid.node_index(1, 1)] = 1.0;
  const std::string hot = (dir / "hot.pgm").string();
  wsr::write_heatmap(hot, grid, x);
  EXPECT_EQ(slurp(hot),
            "P2\n# min 0 max 1\n3 3\n255\n"
            "0 0 0\n0 255 0\n0 0 0\n");

  const std::string cold = (dir / "cold.pgm").string();
  wsr::write_heatmap(cold, grid, -x);
  EXPECT_EQ(slurp(cold),
            "P2\n# min -1 max 0\n3 3\n255\n"
            "255 255 255\n255 0 255\n255 255 255\n");
}

TEST(Heatmap, ConstantFieldRendersMidGray) {
  const wsr::Grid grid(2);
  const auto dir = fresh_dir("heatmap_const");
  const std::string path = (dir / "flat.pgm").string();
  wsr::write_heatmap(path, grid, Eigen::VectorXd::Constant(9, 0.5));
  EXPECT_EQ(slurp(path),
            "P2\n# min 0.5 max 0.5\n3 3\n255\n"
            "128 128 128\n128 128 128\n128 128 128\n");
}

TEST(Heatmap, TopImageRowIsTheTopOfTheDomain) {
  const wsr::Grid grid(2);
  const auto dir = fresh_dir("heatmap_orient");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(9);
  x[grid.node_index(0, 2)] = 1.0;  // upper-left corner of the domain
  const std::string path = (dir / "corner.pgm").string();
  wsr::write_heatmap(path, grid, x);
  EXPECT_EQ(slurp(path),
            "P2\n# min 0 max 1\n3 3\n255\n"
            "255 0 0\n0 0 0\n0 0 0\n");
}

TEST(Csv, SolutionRoundTripIsExact) {
  const wsr::Grid grid(4);
  const auto dir = fresh_dir("csv");
  wsr::SplitMix64 rng(3);
  Eigen::VectorXd x(grid.node_count());
  for (int i = 0; i < x.size(); ++i) x[i] = rng.normal() * std::pow(10.0, i % 7 - 3);
  const std::string path = (dir / "solution.csv").string();
  wsr::write_solution_csv(path, grid, x);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "node_index,x_coord,y_coord,value");

  const Eigen::VectorXd back = wsr::read_solution_csv(path);
  ASSERT_EQ(back.size(), x.size());
  EXPECT_EQ((back - x).norm(), 0.0);
}

TEST(Csv, ObservationRoundTripIsExact) {
  const auto dir = fresh_dir("csv_obs");
  Eigen::VectorXd y(5);
  y << 1.0 / 3.0, -2e-17, 3.14159265358979312, 0.0, 1e300;
  const std::string path = (dir / "observation.csv").string();
  wsr::write_observation_csv(path, y);
  const Eigen::VectorXd back = wsr::read_observation_csv(path);
  ASSERT_EQ(back.size(), y.size());
  EXPECT_EQ((back - y).norm(), 0.0);
}

TEST(LocalizationErrors, ChebyshevDistanceToNearestSupportNode) {
  const wsr::Grid grid(4);
  const int center = grid.node_index(2, 2);
  EXPECT_EQ(wsr::localization_errors(grid, {center}, {center}), (std::vector<int>{0}));
  EXPECT_EQ(wsr::localization_errors(grid, {center}, {grid.node_index(3, 2)}),
            (std::vector<int>{1}));
  EXPECT_EQ(wsr::localization_errors(grid, {center}, {grid.node_index(0, 0), center}),
            (std::vector<int>{0}));
  EXPECT_EQ(wsr::localization_errors(grid, {center}, {}), (std::vector<int>{-1}));
  EXPECT_EQ(wsr::localization_errors(grid, {grid.node_index(0, 0), grid.node_index(4, 4)},
                                     {grid.node_index(1, 2)}),
            (std::vector<int>{2, 3}));
}

TEST(LoadScenario, MinimalConfigGetsDefaults) {
  const std::string text = R"({
    "name": "minimal",
    "forward_N": 16,
    "inverse_N": 16,
    "inverse_crime": true,
    "sources": [{"x": 0.5, "y": 0.5, "amplitude": 1.0}],
    "b_scheme": {"b": "identity"}
  })";
  const ScenarioConfig cfg = wsr::scenario_from_json(text);
  EXPECT_EQ(cfg.name, "minimal");
  EXPECT_EQ(cfg.alpha, 1e-4);
  EXPECT_EQ(cfg.epsilon, 1.0);
  EXPECT_EQ(cfg.noise.level, 0.0);
  EXPECT_EQ(cfg.solver.max_iterations, wsr::SolverConfig{}.max_iterations);
  EXPECT_EQ(cfg.solver.kkt_tolerance, wsr::SolverConfig{}.kkt_tolerance);
  EXPECT_FALSE(cfg.analyses.certificates);
  EXPECT_FALSE(cfg.analyses.overlap);
  EXPECT_FALSE(cfg.analyses.coherence);
  EXPECT_FALSE(cfg.unweighted);
  EXPECT_TRUE(cfg.output_dir.empty());
}

TEST(LoadScenario, FullConfigRoundTrips) {
  const std::string text = R"({
    "name": "full",
    "forward_N": 128,
    "inverse_N": 64,
    "epsilon": -1.0,
    "sources": [{"x": 0.25, "y": 0.75, "amplitude": 1.0},
                {"x": 0.75, "y": 0.25, "amplitude": -1.0}],
    "b_scheme": {"b": "trunc_pinv", "k": 10},
    "alpha": 0.001,
    "noise": {"level": 0.02, "seed": 9},
    "solver": {"max_iterations": 200000, "kkt_tolerance": 1e-9},
    "analyses": {"certificates": true, "coherence": true},
    "overlap_taus": [0.0, 0.5, 1.0],
    "output_dir": "/tmp/somewhere"
  })";
  const ScenarioConfig cfg = wsr::scenario_from_json(text);
  EXPECT_EQ(cfg.forward_n, 128);
  EXPECT_EQ(cfg.inverse_n, 64);
  EXPECT_EQ(cfg.epsilon, -1.0);
  ASSERT_EQ(cfg.sources.size(), 2u);
  EXPECT_EQ(cfg.sources[1].amplitude, -1.0);
  EXPECT_EQ(cfg.b_scheme.kind, WeightingScheme::Kind::TruncatedPseudoInverse);
  EXPECT_EQ(cfg.b_scheme.truncation, 10);
  EXPECT_EQ(cfg.alpha, 0.001);
  EXPECT_EQ(cfg.noise.level, 0.02);
  EXPECT_EQ(cfg.noise.seed, 9u);
  EXPECT_EQ(cfg.solver.max_iterations, 200000);
  EXPECT_EQ(cfg.solver.kkt_tolerance, 1e-9);
  EXPECT_EQ(cfg.solver.rel_tolerance, wsr::SolverConfig{}.rel_tolerance);
  EXPECT_TRUE(cfg.analyses.certificates);
  EXPECT_FALSE(cfg.analyses.overlap);
  EXPECT_TRUE(cfg.analyses.coherence);
  EXPECT_EQ(cfg.overlap_taus, (std::vector<double>{0.0, 0.5, 1.0}));
  EXPECT_EQ(cfg.output_dir, "/tmp/somewhere");
}

TEST(LoadScenario, UnknownKeysAreRejectedEverywhere) {
  const std::string base = R"({
    "name": "x", "forward_N": 16, "inverse_N": 16, "inverse_crime": true,
    "sources": [{"x": 0.5, "y": 0.5, "amplitude": 1.0}],
    "b_scheme": {"b": "identity"}})";
  auto with = [](const std::string& extra) {
    std::string t = R"({
      "name": "x", "forward_N": 16, "inverse_N": 16, "inverse_crime": true,
      "sources": [{"x": 0.5, "y": 0.5, "amplitude": 1.0}],
      "b_scheme": {"b": "identity"},)";
    return t + extra + "}";
  };
  EXPECT_NO_THROW(wsr::scenario_from_json(base));
  EXPECT_THROW(wsr::scenario_from_json(with(R"("alpha_max": 1.0)")), wsr::ParseError);
  EXPECT_THROW(wsr::scenario_from_json(with(R"("solver": {"iterations": 5})")),
               wsr::ParseError);
  EXPECT_THROW(wsr::scenario_from_json(with(R"("noise": {"sigma": 0.1})")), wsr::ParseError);
  EXPECT_THROW(wsr::scenario_from_json(with(R"("analyses": {"gram": true})")),
               wsr::ParseError);

  const std::string bad_source = R"({
    "name": "x", "forward_N": 16, "inverse_N": 16, "inverse_crime": true,
    "sources": [{"x": 0.5, "y": 0.5, "amplitude": 1.0, "z": 0.5}],
    "b_scheme": {"b": "identity"}})";
  EXPECT_THROW(wsr::scenario_from_json(bad_source), wsr::ParseError);

  const std::string bad_scheme = R"({
    "name": "x", "forward_N": 16, "inverse_N": 16, "inverse_crime": true,
    "sources": [{"x": 0.5, "y": 0.5, "amplitude": 1.0}],
    "b_scheme": {"b": "identity", "k": 3}})";
  EXPECT_THROW(wsr::scenario_from_json(bad_scheme), wsr::ParseError);
}

TEST(LoadScenario, MalformedInputThrowsParseError) {
  EXPECT_THROW(wsr::scenario_from_json("{"), wsr::ParseError);
  EXPECT_THROW(wsr::scenario_from_json("[]"), wsr::ParseError);
  const std::string wrong_type = R"({
    "name": "x", "forward_N": 16, "inverse_N": 16, "inverse_crime": true,
    "sources": [{"x": 0.5, "y": 0.5, "amplitude": 1.0}],
    "b_scheme": {"b": "identity"}, "alpha": "tiny"})";
  EXPECT_THROW(wsr::scenario_from_json(wrong_type), wsr::ParseError);
  EXPECT_THROW(wsr::load_scenario("/nonexistent/scenario.json"), wsr::IoError);
}

TEST(LoadScenario, GridInvariantsAreValidated) {
  auto cfg_text = [](int fwd, int inv, bool crime) {
    std::ostringstream os;
    os << R"({"name": "v", "forward_N": )" << fwd << R"(, "inverse_N": )" << inv
       << R"(, "inverse_crime": )" << (crime ? "true" : "false")
       << R"(, "sources": [{"x": 0.5, "y": 0.5, "amplitude": 1.0}],
            "b_scheme": {"b": "identity"}})";
    return os.str();
  };
  EXPECT_NO_THROW(wsr::scenario_from_json(cfg_text(32, 16, false)));
  EXPECT_THROW(wsr::scenario_from_json(cfg_text(16, 32, false)), wsr::ValidationError);
  EXPECT_THROW(wsr::scenario_from_json(cfg_text(24, 16, false)), wsr::ValidationError);
  EXPECT_THROW(wsr::scenario_from_json(cfg_text(32, 16, true)), wsr::ValidationError);

  ScenarioConfig bad_alpha = basic_scenario("a");
  bad_alpha.alpha = 0.0;
  EXPECT_THROW(wsr::validate_scenario(bad_alpha), wsr::ValidationError);
  ScenarioConfig outside = basic_scenario("b");
  outside.sources = {{1.5, 0.5, 1.0}};
  EXPECT_THROW(wsr::validate_scenario(outside), wsr::ValidationError);
  ScenarioConfig no_sources = basic_scenario("c");
  no_sources.sources.clear();
  EXPECT_THROW(wsr::validate_scenario(no_sources), wsr::ValidationError);
}

TEST(RunScenario, RecoversEasySourceAndWritesAllArtifacts) {
  ScenarioConfig cfg = basic_scenario("easy");
  // Tight enough that the solver settles on the exact one-node support
  // instead of stopping with a cloud of tiny coefficients.
  cfg.solver.kkt_tolerance = 1e-13;
  cfg.output_dir = fresh_dir("run_easy").string();
  const wsr::RunArtifacts art = wsr::run_scenario(cfg);

  EXPECT_TRUE(art.summary.converged);
  EXPECT_EQ(art.summary.localization_error_cells, (std::vector<int>{0}));
  ASSERT_EQ(art.summary.support.size(), 1u);
  EXPECT_TRUE(std::filesystem::exists(art.solution_path));
  EXPECT_TRUE(std::filesystem::exists(art.observation_path));
  EXPECT_TRUE(std::filesystem::exists(art.report_path));
  for (const std::string& p : art.heatmap_paths) EXPECT_TRUE(std::filesystem::exists(p));

  // The single recovered amplitude is the shrunk unit amplitude.
  const wsr::ForwardModel model = wsr::assemble_forward(16, 1.0);
  const auto op = wsr::build_weighted_operator(model.A, WeightingScheme::identity());
  const int j = art.summary.support[0];
  const Eigen::VectorXd x = wsr::read_solution_csv(art.solution_path);
  EXPECT_NEAR(x[j], 1.0 - cfg.alpha / op.W_diag[j], 1e-6);
}

TEST(RunScenario, RepeatedRunsAreByteIdentical) {
  ScenarioConfig cfg = basic_scenario("repeat");
  cfg.b_scheme = WeightingScheme::random_sparse(0, 0.5, 11);
  cfg.noise = {0.01, 21};
  cfg.output_dir = fresh_dir("run_repeat").string();

  const wsr::RunArtifacts first = wsr::run_scenario(cfg);
  const std::string solution = slurp(first.solution_path);
  const std::string observation = slurp(first.observation_path);
  const std::string report = slurp(first.report_path);
  const std::string pgm0 = slurp(first.heatmap_paths[0]);
  const std::string pgm1 = slurp(first.heatmap_paths[1]);

  const wsr::RunArtifacts second = wsr::run_scenario(cfg);
  EXPECT_EQ(slurp(second.solution_path), solution);
  EXPECT_EQ(slurp(second.observation_path), observation);
  EXPECT_EQ(slurp(second.report_path), report);
  EXPECT_EQ(slurp(second.heatmap_paths[0]), pgm0);
  EXPECT_EQ(slurp(second.heatmap_paths[1]), pgm1);
}

TEST(RunScenario, StoredArtifactsReproduceTheSummary) {
  ScenarioConfig cfg = basic_scenario("recheck");
  cfg.noise = {0.02, 3};
  cfg.output_dir = fresh_dir("run_recheck").string();
  const wsr::RunArtifacts art = wsr::run_scenario(cfg);

  const Eigen::VectorXd x = wsr::read_solution_csv(art.solution_path);
  const Eigen::VectorXd y = wsr::read_observation_csv(art.observation_path);
  const wsr::ForwardModel model = wsr::assemble_forward(cfg.inverse_n, cfg.epsilon);
  const auto op = wsr::build_weighted_operator(model.A, cfg.b_scheme);
  const Eigen::VectorXd b = op.apply_b(y);

  const nlohmann::json report = nlohmann::json::parse(slurp(art.report_path));
  const double objective = report.at("summary").at("objective").get<double>();
  const double kkt = report.at("summary").at("kkt_residual").get<double>();
  EXPECT_NEAR(wsr::objective(op, b, cfg.alpha, x), objective,
              1e-12 * std::max(1.0, std::abs(objective)));
  EXPECT_NEAR(wsr::kkt_residual(op, b, cfg.alpha, x), kkt, 1e-12 * std::max(1.0, kkt));

  // The synthesized noise level is recoverable from the stored observation.
  const Eigen::VectorXd clean = model.A.col(report.at("truth").at("nodes").at(0).get<int>());
  EXPECT_NEAR((y - clean).norm() / clean.norm(), cfg.noise.level,
              cfg.noise.level * 1e-14);
}

TEST(RunScenario, AnalysesLandInTheReport) {
  ScenarioConfig cfg = basic_scenario("analyses");
  cfg.sources = {{0.25, 0.25, 1.0}, {0.75, 0.75, 1.0}};
  cfg.analyses = {true, true, true};
  cfg.overlap_taus = {0.0, 0.5, 1.0};
  cfg.output_dir = fresh_dir("run_analyses").string();
  const wsr::RunArtifacts art = wsr::run_scenario(cfg);

  const nlohmann::json report = nlohmann::json::parse(slurp(art.report_path));
  EXPECT_TRUE(report.contains("certificate"));
  EXPECT_TRUE(report.contains("gram"));
  EXPECT_TRUE(report.contains("overlap"));
  ASSERT_TRUE(report.contains("mutual_coherence"));
  const double mu = report.at("mutual_coherence").get<double>();
  EXPECT_GT(mu, 0.0);
  EXPECT_LT(mu, 1.0);

  const auto& overlap = report.at("overlap");
  ASSERT_EQ(overlap.size(), 1u);
  EXPECT_TRUE(std::filesystem::exists(overlap.at(0).at("csv").get<std::string>()));
  // Full overlap at tau = 0 (every component passes), none at tau = 1.
  EXPECT_EQ(overlap.at(0).at("ratio").at(0).get<double>(), 1.0);
  EXPECT_EQ(overlap.at(0).at("ratio").at(2).get<double>(), 0.0);
}

TEST(SweepOverlap, MatchesDirectOverlapComputation) {
  ScenarioConfig cfg = basic_scenario("sweep");
  cfg.forward_n = cfg.inverse_n = 8;
  cfg.sources = {{0.25, 0.25, 1.0}, {0.75, 0.75, 1.0}};
  cfg.overlap_taus = {0.0, 0.4, 0.8, 1.0};
  cfg.overlap_schemes = {WeightingScheme::identity(), WeightingScheme::truncated_pinv(8)};
  cfg.output_dir = fresh_dir("sweep").string();

  const auto entries = wsr::sweep_overlap(cfg);
  ASSERT_EQ(entries.size(), 2u);

  const wsr::ForwardModel model = wsr::assemble_forward(8, 1.0);
  const auto op = wsr::build_weighted_operator(model.A, WeightingScheme::identity());
  const auto direct =
      wsr::disjointness_overlap(op, entries[0].j, entries[0].k, cfg.overlap_taus);
  EXPECT_EQ(entries[0].scheme_label, "identity");
  EXPECT_EQ(entries[0].ratios, direct.ratios);
  // The strict threshold empties every support at tau = 1, so a first zero
  // always exists; it must point at the first zero of the directly computed
  // ratios.
  ASSERT_TRUE(entries[0].first_zero_tau.has_value());
  EXPECT_EQ(direct.ratios.back(), 0.0);
  std::size_t first = 0;
  while (direct.ratios[first] != 0.0) ++first;
  EXPECT_EQ(*entries[0].first_zero_tau, cfg.overlap_taus[first]);

  for (const auto& e : entries) {
    ASSERT_TRUE(std::filesystem::exists(e.csv_path));
    std::ifstream in(e.csv_path);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "tau,ratio");
  }
  EXPECT_TRUE(std::filesystem::exists(
      std::filesystem::path(cfg.output_dir) / "sweep.json"));
}

#ifdef WSR_SCENARIO_DIR
TEST(BundledScenarios, AllConfigsLoadAndValidate) {
  const std::vector<std::string> names = {
      "intro",
      "intro_unweighted",
      "single_composite",
      "three_sources_screened_poisson",
      "three_sources_helmholtz_noise",
      "adjacent_inverse_crime_16",
      "adjacent_gap_128_64",
      "pre_orthogonalizer_sources_sinks",
      "overlap_sweep"};
  for (const std::string& name : names) {
    SCOPED_TRACE(name);
    const std::string path = std::string(WSR_SCENARIO_DIR) + "/" + name + ".json";
    ASSERT_TRUE(std::filesystem::exists(path));
    const wsr::ScenarioConfig cfg = wsr::load_scenario(path);
    EXPECT_EQ(cfg.name, name);
    EXPECT_FALSE(cfg.output_dir.empty());
    EXPECT_FALSE(cfg.sources.empty());
  }
}
#endif

}  // namespace
