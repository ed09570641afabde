#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sppm/problems.hpp"
#include "sppm/runner.hpp"

namespace sppm {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitVerification = 2 };

/// Which delta feeds the "auto" stepsizes. `certified` is the spectral
/// constant (a valid similarity bound); `plain-norm` is sqrt of the mean plain
/// operator norm, which gives stepsizes near 1e-3 on the default saddle
/// instance but carries no guarantee.
enum class DeltaConvention { kCertified, kPlainNorm };

std::string_view to_string(DeltaConvention c);
DeltaConvention parse_delta_convention(std::string_view name);

struct AlgorithmSpec {
  Algorithm algorithm = Algorithm::kSppm;
  /// Empty means "auto": the method's optimal stepsize.
  std::optional<double> gamma;
  double p = 1.0;
  std::string label;
};

/// Either a file path, a builtin name (saddle, two-piece, tightness,
/// identical), or an inline saddle spec.
struct ProblemSource {
  std::optional<std::string> path;
  std::optional<std::string> builtin;
  std::optional<SaddleSpec> spec;
};

struct ExperimentConfig {
  ProblemSource problem;
  std::vector<AlgorithmSpec> algorithms;
  std::int64_t iterations = 1000;
  std::int64_t trials = 1;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::optional<double> target_error;
  DeltaConvention delta_convention = DeltaConvention::kCertified;
  std::int64_t record_every = 1;
  /// "zero" or "normal" (one standard-normal draw shared by every trial).
  std::string x0 = "zero";
};

/// Strict JSON reader: unknown keys are rejected at every level.
ExperimentConfig parse_experiment_config(const std::string& text);
void validate(const ExperimentConfig& config);

OperatorEnsemble load_problem(const ProblemSource& src, std::uint64_t seed);
OperatorEnsemble builtin_problem(const std::string& name, std::uint64_t seed);

/// Every constant the reports need. Fields that do not apply (non-affine
/// members) are NaN.
struct ProblemConstants {
  double mu = 0.0;
  double lipschitz = 0.0;
  double delta_spectral = 0.0;
  double delta_plain = 0.0;
  double delta_affine_exact = 0.0;
  double delta_empirical = 0.0;
  /// Average-similarity constant (uniform weights only). Exact for small
  /// affine ensembles, otherwise a probe-based lower bound.
  double delta_tilde = 0.0;
  bool delta_tilde_exact = false;
  double sigma_star_sq = 0.0;
};

ProblemConstants estimate_constants(const OperatorEnsemble& ens, const Vector& x_star,
                                    std::uint64_t seed);

double delta_for(const ProblemConstants& c, DeltaConvention conv);

/// Stepsize for one algorithm entry. Throws InvalidArgument when "auto"
/// cannot be resolved (SPPM, mu <= 0, delta unknown or zero).
double resolve_gamma(const AlgorithmSpec& spec, double mu, double delta, std::size_t n);

std::string default_label(const AlgorithmSpec& spec);

struct AlgorithmResult {
  AlgorithmSpec spec;
  double gamma = 0.0;
  std::vector<Trace> traces;
};

struct AggregateRow {
  std::int64_t k = 0;
  double cost_mean = 0.0;
  double sq_error_mean = 0.0;
  double sq_error_p10 = 0.0;
  double sq_error_p90 = 0.0;
  double lyapunov_mean = 0.0;
};

/// Rows on the common recording grid, averaged over trials.
std::vector<AggregateRow> aggregate(const std::vector<Trace>& traces, std::int64_t record_every,
                                    std::int64_t iters);

/// Seed of trial t: Rng(base).split(t).seed(). Shared by every algorithm.
std::uint64_t trial_seed(std::uint64_t base, std::int64_t trial);

/// Runs every algorithm entry over all trials (trials in parallel).
std::vector<AlgorithmResult> run_experiment(const OperatorEnsemble& ens,
                                            const ExperimentConfig& config, std::ostream& log);

/// Writes <label>.csv (aggregate), <label>_trial0.csv and .meta.json, and
/// summary.csv with calls-to-target statistics.
void write_results(const std::string& dir, const OperatorEnsemble& ens,
                   const ExperimentConfig& config, const std::vector<AlgorithmResult>& results);

// Subcommands. All return an ExitCode and write human-readable text to `out`.

int cmd_generate(const SaddleSpec& spec, const std::string& out_path, std::ostream& out);
int cmd_run(const ExperimentConfig& config, std::ostream& out);

struct ReproduceOptions {
  std::string figure = "fig2";
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::int64_t trials = 4;
  std::int64_t iterations = 50000;
  double target_error = 1e-10;
  DeltaConvention delta_convention = DeltaConvention::kPlainNorm;
  std::int64_t record_every = 10;
};

int cmd_reproduce(const ReproduceOptions& opts, std::ostream& out);

struct VerifyOptions {
  ProblemSource problem;
  std::uint64_t seed = 0;
  /// Multiplies the certified delta; values below 1 are a negative control.
  double delta_scale = 1.0;
  std::optional<double> mu;
  std::int64_t states = 1000;
  std::int64_t property_cases = 1000;
};

int cmd_verify(const VerifyOptions& opts, std::ostream& out);

struct EstimateOptions {
  ProblemSource problem;
  std::uint64_t seed = 0;
  std::optional<double> mu;
  std::optional<std::string> csv_path;
};

int cmd_estimate(const EstimateOptions& opts, std::ostream& out);

}  // namespace sppm
