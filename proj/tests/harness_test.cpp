#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "sppm/harness.hpp"
#include "sppm/serialization.hpp"

using namespace sppm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sppm_harness_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Config, ParsesAFullDocument) {
  const auto c = parse_experiment_config(R"({
    "problem": {"n": 20, "d_y": 2, "d_z": 2, "seed": 3},
    "algorithms": [{"name": "sppm", "gamma": 0.01},
                   {"name": "lsvrp", "gamma": "auto", "p": 0.1, "label": "fast"}],
    "iterations": 50, "trials": 2, "seed": 9, "output_dir": "o",
    "target_error": 1e-6, "delta_convention": "plain-norm", "record_every": 5, "x0": "normal"})");
  ASSERT_TRUE(c.problem.spec.has_value());
  EXPECT_EQ(c.problem.spec->n, 20u);
  ASSERT_EQ(c.algorithms.size(), 2u);
  EXPECT_EQ(c.algorithms[0].label, "sppm_g0.01");
  EXPECT_FALSE(c.algorithms[1].gamma.has_value());
  EXPECT_EQ(c.algorithms[1].label, "fast");
  EXPECT_EQ(c.delta_convention, DeltaConvention::kPlainNorm);
  EXPECT_EQ(c.record_every, 5);
}

TEST(Config, RejectsInvalidDocuments) {
  const std::vector<std::string> bad = {
      R"({"algorithms": [{"name": "sppm", "gamma": 0.1}], "trials": 0})",
      R"({"algorithms": [{"name": "sppm", "gamma": 0.1}], "bogus": 1})",
      R"({"algorithms": [{"name": "sppm", "gamma": 0.1, "extra": 2}]})",
      R"({"algorithms": [{"name": "sppm", "gamma": "auto"}]})",
      R"({"algorithms": [{"name": "sppm", "gamma": -1}]})",
      R"({"algorithms": [{"name": "lsvrp", "gamma": 0.1, "p": 0}]})",
      R"({"algorithms": [{"name": "newton", "gamma": 0.1}]})",
      R"({"algorithms": []})",
      R"({"algorithms": [{"name": "sppm", "gamma": 0.1}, {"name": "sppm", "gamma": 0.1}]})",
      R"({"problem": {"n": 5, "d_y": 0}, "algorithms": [{"name": "sppm", "gamma": 0.1}]})",
      R"({"problem": {"builtin": "saddle", "n": 3}, "algorithms": [{"name": "sppm", "gamma": 0.1}]})",
      R"({"algorithms": [{"name": "sppm", "gamma": 0.1}], "x0": "ones"})",
      R"({"algorithms": [{"name": "sppm", "gamma": 0.1}], "target_error": 0})",
      R"(not json)",
  };
  for (const auto& doc : bad) {
    EXPECT_THROW(parse_experiment_config(doc), std::exception) << doc;
  }
}

TEST(Config, AutoGammaNeedsModulusAndConstant) {
  AlgorithmSpec s;
  s.algorithm = Algorithm::kSppmOc;
  EXPECT_DOUBLE_EQ(resolve_gamma(s, 1.0, 2.0, 10), 0.25);
  EXPECT_THROW(resolve_gamma(s, 0.0, 2.0, 10), InvalidArgument);
  EXPECT_THROW(resolve_gamma(s, 1.0, std::nan(""), 10), InvalidArgument);
  s.algorithm = Algorithm::kSppm;
  EXPECT_THROW(resolve_gamma(s, 1.0, 2.0, 10), InvalidArgument);
}

TEST(Commands, GenerateIsDeterministicAndValidates) {
  const auto dir = scratch("generate");
  std::stringstream log;
  SaddleSpec spec;
  EXPECT_EQ(cmd_generate(spec, (dir / "a.json").string(), log), kExitOk);
  EXPECT_EQ(cmd_generate(spec, (dir / "b.json").string(), log), kExitOk);
  EXPECT_EQ(fnv1a_hex(slurp(dir / "a.json")), fnv1a_hex(slurp(dir / "b.json")));
  const auto ens = load_ensemble((dir / "a.json").string());
  EXPECT_EQ(ens.size(), 200u);
  EXPECT_EQ(ens.dim(), 7);
  EXPECT_NE(log.str().find("mu"), std::string::npos);
  spec.d_y = 0;
  EXPECT_EQ(cmd_generate(spec, (dir / "c.json").string(), log), kExitValidation);
  fs::remove_all(dir);
}

TEST(Commands, RunWritesTracesAndMatchesEquivalentMethods) {
  const auto dir = scratch("run");
  auto c = parse_experiment_config(R"({
    "problem": {"n": 20, "seed": 2},
    "algorithms": [{"name": "sppm-oc", "gamma": "auto"}, {"name": "lsvrp", "gamma": "auto", "p": 1}],
    "iterations": 200, "trials": 3, "seed": 5})");
  c.output_dir = dir.string();
  std::stringstream log;
  ASSERT_EQ(cmd_run(c, log), kExitOk) << log.str();
  for (const char* f : {"sppm-oc.csv", "lsvrp_p1.csv", "sppm-oc_trial0.csv", "sppm-oc_trial0.meta.json", "summary.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  std::ifstream a(dir / "sppm-oc_trial0.csv"), b(dir / "lsvrp_p1_trial0.csv");
  const auto ra = parse_trace_csv(a), rb = parse_trace_csv(b);
  ASSERT_EQ(ra.size(), rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) EXPECT_EQ(ra[i].sq_error, rb[i].sq_error);
  fs::remove_all(dir);
}

TEST(Commands, RunRejectsZeroTrials) {
  ExperimentConfig c;
  c.problem.builtin = "tightness";
  c.algorithms.push_back({Algorithm::kSppm, 0.1, 1.0, "s"});
  c.trials = 0;
  std::stringstream log;
  EXPECT_EQ(cmd_run(c, log), kExitValidation);
}

TEST(Commands, RunIsDeterministic) {
  const auto d1 = scratch("det1"), d2 = scratch("det2");
  auto c = parse_experiment_config(R"({
    "problem": {"n": 10, "seed": 1},
    "algorithms": [{"name": "point-saga", "gamma": 0.001}, {"name": "lsvrp", "gamma": 0.001, "p": 0.2}],
    "iterations": 100, "trials": 4, "seed": 11})");
  std::stringstream log;
  c.output_dir = d1.string();
  ASSERT_EQ(cmd_run(c, log), kExitOk);
  c.output_dir = d2.string();
  ASSERT_EQ(cmd_run(c, log), kExitOk);
  for (const char* f : {"point-saga.csv", "lsvrp_p0.2.csv", "summary.csv"}) {
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}

// Larger stepsizes settle in a larger neighborhood.
TEST(Commands, SppmPlateauGrowsWithStepsize) {
  ExperimentConfig c;
  c.problem.builtin = "saddle";
  c.algorithms.push_back({Algorithm::kSppm, 1e-3, 1.0, "small"});
  c.algorithms.push_back({Algorithm::kSppm, 1e-1, 1.0, "large"});
  c.iterations = 20000;
  c.trials = 2;
  c.record_every = 100;
  std::stringstream log;
  const auto results = run_experiment(builtin_problem("saddle", 0), c, log);
  const auto small = aggregate(results[0].traces, c.record_every, c.iterations);
  const auto large = aggregate(results[1].traces, c.record_every, c.iterations);
  double tail_small = 0.0, tail_large = 0.0;
  for (std::size_t i = small.size() / 2; i < small.size(); ++i) {
    tail_small += small[i].sq_error_mean;
    tail_large += large[i].sq_error_mean;
  }
  EXPECT_GT(tail_large, 10.0 * tail_small);
}

TEST(Commands, ReproduceIsDeterministic) {
  const auto d1 = scratch("rep1"), d2 = scratch("rep2");
  ReproduceOptions o;
  o.figure = "fig2";
  o.trials = 2;
  o.iterations = 3000;
  std::stringstream log;
  o.output_dir = d1.string();
  ASSERT_NE(cmd_reproduce(o, log), kExitValidation);
  o.output_dir = d2.string();
  ASSERT_NE(cmd_reproduce(o, log), kExitValidation);
  EXPECT_EQ(slurp(d1 / "summary.csv"), slurp(d2 / "summary.csv"));
  EXPECT_EQ(slurp(d1 / "point-saga.csv"), slurp(d2 / "point-saga.csv"));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(Commands, VerifyPassesAndCatchesAHalvedConstant) {
  VerifyOptions o;
  o.states = 200;
  o.property_cases = 200;
  std::stringstream log;
  EXPECT_EQ(cmd_verify(o, log), kExitOk) << log.str();
  o.delta_scale = 0.5;
  std::stringstream bad;
  EXPECT_EQ(cmd_verify(o, bad), kExitVerification) << bad.str();
  EXPECT_NE(bad.str().find("FAIL"), std::string::npos);
}

TEST(Commands, VerifyTightnessEquality) {
  VerifyOptions o;
  o.problem.builtin = "tightness";
  std::stringstream log;
  EXPECT_EQ(cmd_verify(o, log), kExitOk) << log.str();
  EXPECT_NE(log.str().find("PASS sppm one-step equality"), std::string::npos);
}

TEST(Commands, VerifyRejectsBadOptions) {
  VerifyOptions o;
  o.delta_scale = 0.0;
  std::stringstream log;
  EXPECT_EQ(cmd_verify(o, log), kExitValidation);
  o.delta_scale = 1.0;
  o.problem.builtin = "nonexistent";
  EXPECT_EQ(cmd_verify(o, log), kExitValidation);
}

TEST(Commands, EstimateReportsConstants) {
  const auto dir = scratch("estimate");
  EstimateOptions o;
  o.csv_path = (dir / "c.csv").string();
  std::stringstream log;
  ASSERT_EQ(cmd_estimate(o, log), kExitOk);
  const std::string csv = slurp(dir / "c.csv");
  for (const char* f : {"mu,", "L,", "delta_spectral,", "delta_empirical,", "sigma_star_sq,",
                        "gamma_sppm-oc,", "factor_point-saga,"}) {
    EXPECT_NE(csv.find(f), std::string::npos) << f;
  }
  fs::remove_all(dir);
}

TEST(Commands, EstimateTwoPieceExample) {
  const auto x_star = Vector::Constant(1, 1.0);
  const auto c = estimate_constants(builtin_problem("two-piece", 0), x_star, 0);
  EXPECT_NEAR(c.delta_empirical, 2.0, 1e-12);
  EXPECT_DOUBLE_EQ(c.sigma_star_sq, 4.0);
  EXPECT_TRUE(std::isnan(c.delta_spectral));
}

TEST(Commands, EstimateIdenticalMembersIsUnbounded) {
  EstimateOptions o;
  o.problem.builtin = "identical";
  std::stringstream log;
  ASSERT_EQ(cmd_estimate(o, log), kExitOk);
  EXPECT_NE(log.str().find("optimal gamma unbounded; any gamma contracts"), std::string::npos);
}

TEST(Aggregation, TrialSeedsAreDistinct) {
  std::set<std::uint64_t> seeds;
  for (int t = 0; t < 1000; ++t) seeds.insert(trial_seed(7, t));
  EXPECT_EQ(seeds.size(), 1000u);
  EXPECT_EQ(trial_seed(7, 3), trial_seed(7, 3));
}
