#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sppm/harness.hpp"

namespace {

sppm::ProblemSource problem_source(const std::string& path, const std::string& builtin) {
  sppm::ProblemSource src;
  if (!path.empty()) src.path = path;
  if (!builtin.empty()) src.builtin = builtin;
  return src;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic proximal point methods: generate, run, reproduce, verify, estimate"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string out;
  std::string config_path;
  std::int64_t trials = -1;
  std::int64_t iters = -1;
  double target = -1.0;
  std::string problem;
  std::string builtin;

  auto* gen = app.add_subcommand("generate", "write a seeded saddle-point ensemble");
  sppm::SaddleSpec spec;
  std::int64_t n = 200, dy = 3, dz = 4;
  gen->add_option("--seed", seed, "generator seed");
  std::string gen_out = "ensemble.json";
  gen->add_option("--out", gen_out, "output file");
  gen->add_option("--n", n, "number of operators");
  gen->add_option("--dy", dy, "dimension of y");
  gen->add_option("--dz", dz, "dimension of z");

  auto* run = app.add_subcommand("run", "run the algorithms of a config file");
  run->add_option("--config", config_path, "experiment config (JSON)")->required();
  run->add_option("--seed", seed, "override the base seed");
  run->add_option("--out", out, "override the output directory");
  run->add_option("--trials", trials, "override the trial count");
  run->add_option("--iters", iters, "override the iteration count");
  run->add_option("--target-error", target, "override the target squared error");

  auto* rep = app.add_subcommand("reproduce", "regenerate the stepsize sweep (fig1) or method comparison (fig2)");
  std::string figure;
  std::string convention = "plain-norm";
  rep->add_option("figure", figure, "fig1 (SPPM stepsizes) or fig2 (methods)")->required()->check(CLI::IsMember({"fig1", "fig2"}));
  rep->add_option("--seed", seed, "base seed");
  std::string rep_out = "out";
  rep->add_option("--out", rep_out, "output directory");
  rep->add_option("--trials", trials, "trials per algorithm");
  rep->add_option("--iters", iters, "iterations per run");
  rep->add_option("--target-error", target, "squared error used for call counts");
  rep->add_option("--delta-convention", convention, "certified or plain-norm")
      ->check(CLI::IsMember({"certified", "plain-norm"}));

  auto* ver = app.add_subcommand("verify", "run the invariant and step-inequality suite");
  double delta_scale = 1.0;
  double mu = -1.0;
  std::int64_t states = 1000;
  ver->add_option("--problem", problem, "ensemble file");
  ver->add_option("--builtin", builtin, "saddle, two-piece, tightness or identical");
  ver->add_option("--seed", seed, "seed for generated problems and probes");
  ver->add_option("--delta-scale", delta_scale, "multiply the certified delta (negative control < 1)");
  ver->add_option("--mu", mu, "override the strong monotonicity modulus");
  ver->add_option("--states", states, "trajectory states per step check");

  auto* est = app.add_subcommand("estimate", "report constants, stepsizes and rates");
  est->add_option("--problem", problem, "ensemble file");
  est->add_option("--builtin", builtin, "saddle, two-piece, tightness or identical");
  est->add_option("--seed", seed, "seed for generated problems and probes");
  est->add_option("--mu", mu, "override the strong monotonicity modulus");
  est->add_option("--out", out, "CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sppm::kExitValidation;
  }

  if (gen->parsed()) {
    if (n < 1 || dy < 1 || dz < 1) {
      std::cout << "validation error: n, dy and dz must be at least 1\n";
      return sppm::kExitValidation;
    }
    spec.n = static_cast<std::size_t>(n);
    spec.d_y = dy;
    spec.d_z = dz;
    spec.seed = seed;
    return sppm::cmd_generate(spec, gen_out, std::cout);
  }
  if (run->parsed()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cout << "validation error: cannot open config '" << config_path << "'\n";
      return sppm::kExitValidation;
    }
    std::stringstream text;
    text << in.rdbuf();
    sppm::ExperimentConfig config;
    try {
      config = sppm::parse_experiment_config(text.str());
    } catch (const std::exception& e) {
      std::cout << "validation error: " << e.what() << '\n';
      return sppm::kExitValidation;
    }
    if (run->count("--seed")) config.seed = seed;
    if (run->count("--out")) config.output_dir = out;
    if (run->count("--trials")) config.trials = trials;
    if (run->count("--iters")) config.iterations = iters;
    if (run->count("--target-error")) config.target_error = target;
    return sppm::cmd_run(config, std::cout);
  }
  if (rep->parsed()) {
    sppm::ReproduceOptions opts;
    opts.figure = figure;
    opts.seed = seed;
    opts.output_dir = rep_out;
    if (rep->count("--trials")) opts.trials = trials;
    if (rep->count("--iters")) opts.iterations = iters;
    if (rep->count("--target-error")) opts.target_error = target;
    opts.delta_convention = sppm::parse_delta_convention(convention);
    if (opts.trials < 1 || opts.iterations < 0 || !(opts.target_error > 0.0)) {
      std::cout << "validation error: trials >= 1, iters >= 0 and target-error > 0 required\n";
      return sppm::kExitValidation;
    }
    return sppm::cmd_reproduce(opts, std::cout);
  }
  if (ver->parsed()) {
    sppm::VerifyOptions opts;
    opts.problem = problem_source(problem, builtin);
    opts.seed = seed;
    opts.delta_scale = delta_scale;
    if (ver->count("--mu")) opts.mu = mu;
    opts.states = states;
    return sppm::cmd_verify(opts, std::cout);
  }
  sppm::EstimateOptions opts;
  opts.problem = problem_source(problem, builtin);
  opts.seed = seed;
  if (est->count("--mu")) opts.mu = mu;
  if (!out.empty()) opts.csv_path = out;
  return sppm::cmd_estimate(opts, std::cout);
}
