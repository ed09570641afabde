#include "sppm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sppm/serialization.hpp"

namespace sppm {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kX0Stream = ~0ull;

std::string fmt(double v, int digits = 6) {
  if (std::isnan(v)) return "n/a";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw InvalidArgument("unknown key '" + key + "' in " + where);
  }
}

SaddleSpec spec_from_json(const json& j) {
  reject_unknown(j, {"n", "d_y", "d_z", "seed", "eig_base", "normal_mean", "normal_var"},
                 "problem spec");
  SaddleSpec s;
  if (j.contains("n")) s.n = j["n"].get<std::size_t>();
  if (j.contains("d_y")) s.d_y = j["d_y"].get<Index>();
  if (j.contains("d_z")) s.d_z = j["d_z"].get<Index>();
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("eig_base")) s.eig_base = j["eig_base"].get<double>();
  if (j.contains("normal_mean")) s.normal_mean = j["normal_mean"].get<double>();
  if (j.contains("normal_var")) s.normal_var = j["normal_var"].get<double>();
  return s;
}

/// Runs `fn`, mapping validation problems to exit code 1.
int guarded(std::ostream& out, const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const InvalidArgument& e) {
    out << "validation error: " << e.what() << '\n';
  } catch (const DimensionMismatch& e) {
    out << "validation error: " << e.what() << '\n';
  } catch (const json::exception& e) {
    out << "validation error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    out << "error: " << e.what() << '\n';
  }
  return kExitValidation;
}

std::vector<Vector> probe_points(const OperatorEnsemble& ens, const Vector& x_star,
                                 std::uint64_t seed) {
  std::vector<Vector> probes;
  if (ens.dim() == 1) {
    for (int i = 0; i < 100; ++i) {
      Vector x(1);
      x(0) = x_star(0) - 3.0 + 6.0 * (i + 0.5) / 100.0;
      bool on_break = false;
      for (const auto& m : ens.members()) on_break = on_break || at_breakpoint(m, x);
      if (!on_break && x != x_star) probes.push_back(x);
    }
    return probes;
  }
  Rng rng = Rng(seed).split(0x9e0be);
  for (int i = 0; i < 200; ++i) probes.push_back(x_star + rng.normal_vector(ens.dim()));
  if (ens.all_affine()) {
    Matrix c = Matrix::Zero(ens.dim(), ens.dim());
    for (std::size_t i = 0; i < ens.size(); ++i) {
      const Matrix d = ens.affine_member(i).linear() - ens.mean_linear();
      c += ens.weight(i) * d.transpose() * d;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (c + c.transpose()));
    probes.push_back(x_star + eig.eigenvectors().col(ens.dim() - 1));
  }
  return probes;
}

// One point per member: shared points, single displaced members and
// independent draws from the probe list.
std::vector<std::vector<Vector>> probe_sets(const OperatorEnsemble& ens, const Vector& x_star,
                                            const std::vector<Vector>& probes,
                                            std::uint64_t seed) {
  std::vector<std::vector<Vector>> sets;
  if (probes.empty()) return sets;
  const std::size_t n = ens.size();
  Rng rng = Rng(seed).split(0x5e75);
  const std::size_t shared = std::min<std::size_t>(probes.size(), 50);
  for (std::size_t j = 0; j < shared; ++j) sets.emplace_back(n, probes[j]);
  const std::size_t spikes = std::min<std::size_t>(n, 20);
  for (std::size_t j = 0; j < spikes; ++j) {
    for (std::size_t q = 0; q < shared; q += std::max<std::size_t>(1, shared / 10)) {
      std::vector<Vector> set(n, x_star);
      set[j] = probes[q];
      sets.push_back(std::move(set));
    }
  }
  for (int t = 0; t < 50; ++t) {
    std::vector<Vector> set;
    for (std::size_t i = 0; i < n; ++i) {
      set.push_back(probes[static_cast<std::size_t>(rng.uniform() * double(probes.size())) %
                           probes.size()]);
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

Vector initial_point(const std::string& mode, const OperatorEnsemble& ens, std::uint64_t seed) {
  if (mode == "zero") return Vector::Zero(ens.dim());
  if (mode == "normal") return Rng(seed).split(kX0Stream).normal_vector(ens.dim());
  throw InvalidArgument("x0 must be \"zero\" or \"normal\"");
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string gamma_text(const AlgorithmSpec& s) { return s.gamma ? fmt(*s.gamma, 17) : "auto"; }

}  // namespace

std::string_view to_string(DeltaConvention c) {
  return c == DeltaConvention::kCertified ? "certified" : "plain-norm";
}

DeltaConvention parse_delta_convention(std::string_view name) {
  if (name == "certified") return DeltaConvention::kCertified;
  if (name == "plain-norm") return DeltaConvention::kPlainNorm;
  throw InvalidArgument("delta_convention must be \"certified\" or \"plain-norm\"");
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  const json j = json::parse(text);
  reject_unknown(j,
                 {"problem", "algorithms", "iterations", "trials", "seed", "output_dir",
                  "target_error", "delta_convention", "record_every", "x0"},
                 "config");
  ExperimentConfig c;
  if (j.contains("problem")) {
    const json& p = j["problem"];
    if (p.is_string()) {
      c.problem.path = p.get<std::string>();
    } else if (p.is_object() && p.contains("builtin")) {
      reject_unknown(p, {"builtin"}, "problem");
      c.problem.builtin = p["builtin"].get<std::string>();
    } else {
      c.problem.spec = spec_from_json(p);
    }
  }
  if (!j.contains("algorithms") || !j["algorithms"].is_array()) {
    throw InvalidArgument("config needs an 'algorithms' array");
  }
  for (const auto& a : j["algorithms"]) {
    reject_unknown(a, {"name", "gamma", "p", "label"}, "algorithm entry");
    AlgorithmSpec s;
    s.algorithm = parse_algorithm(a.at("name").get<std::string>());
    if (a.contains("gamma")) {
      if (a["gamma"].is_string()) {
        if (a["gamma"].get<std::string>() != "auto") throw InvalidArgument("gamma must be a number or \"auto\"");
      } else {
        s.gamma = a["gamma"].get<double>();
      }
    }
    if (a.contains("p")) s.p = a["p"].get<double>();
    s.label = a.contains("label") ? a["label"].get<std::string>() : default_label(s);
    c.algorithms.push_back(s);
  }
  if (j.contains("iterations")) c.iterations = j["iterations"].get<std::int64_t>();
  if (j.contains("trials")) c.trials = j["trials"].get<std::int64_t>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  if (j.contains("target_error")) c.target_error = j["target_error"].get<double>();
  if (j.contains("delta_convention")) {
    c.delta_convention = parse_delta_convention(j["delta_convention"].get<std::string>());
  }
  if (j.contains("record_every")) c.record_every = j["record_every"].get<std::int64_t>();
  if (j.contains("x0")) c.x0 = j["x0"].get<std::string>();
  validate(c);
  return c;
}

void validate(const ExperimentConfig& c) {
  if (c.problem.spec) validate(*c.problem.spec);
  if (c.trials < 1) throw InvalidArgument("trials must be at least 1");
  if (c.iterations < 0) throw InvalidArgument("iterations must be nonnegative");
  if (c.record_every < 1) throw InvalidArgument("record_every must be at least 1");
  if (c.algorithms.empty()) throw InvalidArgument("at least one algorithm is required");
  if (c.target_error && !(*c.target_error > 0.0)) throw InvalidArgument("target_error must be positive");
  if (c.x0 != "zero" && c.x0 != "normal") throw InvalidArgument("x0 must be \"zero\" or \"normal\"");
  std::set<std::string> labels;
  for (const auto& a : c.algorithms) {
    if (a.gamma && !(*a.gamma > 0.0)) throw InvalidArgument("gamma must be positive");
    if (a.algorithm == Algorithm::kLsvrp && !(a.p > 0.0 && a.p <= 1.0)) {
      throw InvalidArgument("p must lie in (0, 1]");
    }
    if (a.algorithm == Algorithm::kSppm && !a.gamma) {
      throw InvalidArgument("sppm has no optimal stepsize; \"auto\" cannot be resolved");
    }
    if (!labels.insert(a.label).second) throw InvalidArgument("duplicate label '" + a.label + "'");
  }
}

OperatorEnsemble builtin_problem(const std::string& name, std::uint64_t seed) {
  if (name == "saddle") {
    SaddleSpec s;
    s.seed = seed;
    return generate_saddle_instance(s);
  }
  if (name == "two-piece") return build_two_piece_example();
  if (name == "tightness") {
    Vector zero = Vector::Zero(1);
    return build_tightness_instance(1.0, zero, {Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)});
  }
  if (name == "identical") {
    SaddleSpec s;
    s.n = 1;
    s.seed = seed;
    const OperatorEnsemble one = generate_saddle_instance(s);
    std::vector<Operator> members(10, one.member(0));
    return OperatorEnsemble(std::move(members), {}, one.root());
  }
  throw InvalidArgument("unknown builtin problem '" + name + "'");
}

OperatorEnsemble load_problem(const ProblemSource& src, std::uint64_t seed) {
  if (src.path) {
    if (!fs::exists(*src.path)) throw InvalidArgument("problem file '" + *src.path + "' not found");
    return load_ensemble(*src.path);
  }
  if (src.builtin) return builtin_problem(*src.builtin, seed);
  SaddleSpec spec = src.spec.value_or(SaddleSpec{});
  if (!src.spec) spec.seed = seed;
  return generate_saddle_instance(spec);
}

ProblemConstants estimate_constants(const OperatorEnsemble& ens, const Vector& x_star,
                                    std::uint64_t seed) {
  ProblemConstants c;
  c.mu = ensemble_modulus(ens);
  if (ens.all_affine()) {
    c.lipschitz = ensemble_lipschitz(ens);
    c.delta_spectral = estimate_delta_spectral(ens);
    c.delta_plain = estimate_delta_plain_norm(ens);
    c.delta_affine_exact = estimate_delta_affine_exact(ens);
  } else {
    c.lipschitz = c.delta_spectral = c.delta_plain = c.delta_affine_exact = kNaN;
  }
  const auto probes = probe_points(ens, x_star, seed);
  c.delta_empirical = empirical_similarity(ens, x_star, probes);
  if (!ens.is_uniform()) {
    c.delta_tilde = kNaN;
  } else if (ens.all_affine() && ens.size() * static_cast<std::size_t>(ens.dim()) <= 4000) {
    c.delta_tilde = estimate_delta_tilde_affine_exact(ens);
    c.delta_tilde_exact = true;
  } else {
    c.delta_tilde = empirical_average_similarity(ens, x_star, probe_sets(ens, x_star, probes, seed));
  }
  try {
    c.sigma_star_sq = sigma_star_sq(ens, x_star);
  } catch (const InvalidArgument&) {
    c.sigma_star_sq = kNaN;
  }
  return c;
}

double delta_for(const ProblemConstants& c, DeltaConvention conv) {
  const double d = conv == DeltaConvention::kPlainNorm ? c.delta_plain : c.delta_spectral;
  return std::isnan(d) ? c.delta_empirical : d;
}

double resolve_gamma(const AlgorithmSpec& spec, double mu, double delta, std::size_t n) {
  if (spec.gamma) {
    require_positive_gamma(*spec.gamma);
    return *spec.gamma;
  }
  if (spec.algorithm == Algorithm::kSppm) {
    throw InvalidArgument("sppm has no optimal stepsize; \"auto\" cannot be resolved");
  }
  if (!(mu > 0.0)) throw InvalidArgument("\"auto\" gamma needs a positive strong monotonicity modulus");
  if (!std::isfinite(delta)) throw InvalidArgument("\"auto\" gamma needs a similarity constant");
  double g = 0.0;
  switch (spec.algorithm) {
    case Algorithm::kSppmOc:
      g = sppm_oc_rate(std::nullopt, mu, delta).optimal_gamma;
      break;
    case Algorithm::kLsvrp:
      g = lsvrp_rate(std::nullopt, mu, delta, spec.p).optimal_gamma;
      break;
    default:
      g = point_saga_rate(std::nullopt, mu, delta, n).optimal_gamma;
      break;
  }
  if (!std::isfinite(g)) {
    throw InvalidArgument("optimal gamma is unbounded (delta = 0); any gamma contracts, give one");
  }
  return g;
}

std::string default_label(const AlgorithmSpec& s) {
  std::string label(to_string(s.algorithm));
  if (s.algorithm == Algorithm::kLsvrp) label += "_p" + fmt(s.p, 6);
  if (s.gamma) label += "_g" + fmt(*s.gamma, 6);
  return label;
}

std::uint64_t trial_seed(std::uint64_t base, std::int64_t trial) {
  return Rng(base).split(static_cast<std::uint64_t>(trial)).seed();
}

std::vector<AggregateRow> aggregate(const std::vector<Trace>& traces, std::int64_t record_every,
                                    std::int64_t iters) {
  std::vector<std::vector<const TraceRow*>> grids;
  for (const auto& t : traces) {
    std::vector<const TraceRow*> g;
    for (const auto& r : t.rows) {
      if (r.k % record_every == 0 || r.k == iters) g.push_back(&r);
    }
    grids.push_back(std::move(g));
  }
  std::size_t len = std::numeric_limits<std::size_t>::max();
  for (const auto& g : grids) len = std::min(len, g.size());
  if (grids.empty()) len = 0;
  std::vector<AggregateRow> out;
  out.reserve(len);
  const double m = static_cast<double>(traces.size());
  for (std::size_t row = 0; row < len; ++row) {
    AggregateRow a;
    a.k = grids[0][row]->k;
    std::vector<double> errs;
    for (std::size_t t = 0; t < traces.size(); ++t) {
      const TraceRow& r = *grids[t][row];
      a.cost_mean += static_cast<double>(r.member_calls + static_cast<std::int64_t>(traces[t].n) * r.full_calls) / m;
      a.sq_error_mean += r.sq_error / m;
      a.lyapunov_mean += r.lyapunov / m;
      errs.push_back(r.sq_error);
    }
    a.sq_error_p10 = percentile(errs, 0.1);
    a.sq_error_p90 = percentile(errs, 0.9);
    out.push_back(a);
  }
  return out;
}

std::vector<AlgorithmResult> run_experiment(const OperatorEnsemble& ens,
                                            const ExperimentConfig& config, std::ostream& log) {
  validate(config);
  const Vector x_star = solution_of(ens);
  const ProblemConstants cst = estimate_constants(ens, x_star, config.seed);
  const double delta = delta_for(cst, config.delta_convention);
  const Vector x0 = initial_point(config.x0, ens, config.seed);
  const auto trials = static_cast<std::size_t>(config.trials);

  std::vector<AlgorithmResult> results;
  for (const auto& spec : config.algorithms) {
    AlgorithmResult res;
    res.spec = spec;
    // Certified Point-SAGA stepsizes come from the average-similarity constant.
    const bool use_tilde = spec.algorithm == Algorithm::kPointSaga &&
                           config.delta_convention == DeltaConvention::kCertified &&
                           std::isfinite(cst.delta_tilde);
    const double d = use_tilde ? cst.delta_tilde : delta;
    res.gamma = resolve_gamma(spec, cst.mu, d, ens.size());
    log << spec.label << ": gamma = " << fmt(res.gamma, 8) << " (" << gamma_text(spec) << ", "
        << (use_tilde ? "delta~" : "delta " + std::string(to_string(config.delta_convention)))
        << " = " << fmt(d) << ")\n";
    const ResolventTable table(ens, res.gamma);
    RunConfig rc;
    rc.algorithm = spec.algorithm;
    rc.gamma = res.gamma;
    rc.p = spec.p;
    rc.iters = config.iterations;
    rc.x0 = x0;
    rc.x_star = x_star;
    if (cst.mu > 0.0) rc.mu = cst.mu;
    if (std::isfinite(d)) rc.delta = d;
    if (std::isfinite(cst.sigma_star_sq)) rc.sigma_star_sq = cst.sigma_star_sq;
    rc.target_error = config.target_error;
    rc.record_every = config.record_every;

    res.traces.resize(trials);
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(trials);
    auto worker = [&]() {
      for (std::size_t t = next++; t < trials; t = next++) {
        try {
          RunConfig mine = rc;
          mine.seed = trial_seed(config.seed, static_cast<std::int64_t>(t));
          res.traces[t] = run(table, mine);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      }
    };
    const std::size_t workers =
        std::max<std::size_t>(1, std::min<std::size_t>(trials, std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    results.push_back(std::move(res));
  }
  return results;
}

void write_results(const std::string& dir, const OperatorEnsemble& ens,
                   const ExperimentConfig& config, const std::vector<AlgorithmResult>& results) {
  fs::create_directories(dir);
  const std::string hash = ensemble_hash(ens);
  std::ofstream summary(fs::path(dir) / "summary.csv");
  summary << "label,algorithm,gamma,p,trials,reached,calls_to_target_mean,calls_to_target_median,"
             "calls_to_target_min,calls_to_target_max,final_sq_error_mean\n";
  for (const auto& r : results) {
    {
      std::ofstream out(fs::path(dir) / (r.spec.label + ".csv"));
      out << "k,cost_mean,sq_error_mean,sq_error_p10,sq_error_p90,lyapunov_mean\n";
      for (const auto& a : aggregate(r.traces, config.record_every, config.iterations)) {
        out << a.k << ',' << csv_num(a.cost_mean) << ',' << csv_num(a.sq_error_mean)
            << ',' << csv_num(a.sq_error_p10) << ',' << csv_num(a.sq_error_p90) << ','
            << csv_num(a.lyapunov_mean) << '\n';
      }
    }
    {
      std::ofstream out(fs::path(dir) / (r.spec.label + "_trial0.csv"));
      write_trace_csv(out, r.traces.front().rows);
      std::ofstream meta(fs::path(dir) / (r.spec.label + "_trial0.meta.json"));
      meta << trace_metadata(r.traces.front(), hash);
    }
    std::vector<double> costs;
    double final_err = 0.0;
    for (const auto& t : r.traces) {
      if (t.target_cost) costs.push_back(static_cast<double>(*t.target_cost));
      final_err += t.rows.back().sq_error / static_cast<double>(r.traces.size());
    }
    summary << r.spec.label << ',' << to_string(r.spec.algorithm) << ',' << csv_num(r.gamma)
            << ',' << csv_num(r.spec.algorithm == Algorithm::kLsvrp ? r.spec.p : 1.0) << ','
            << r.traces.size() << ',' << costs.size() << ',';
    if (costs.empty()) {
      summary << "nan,nan,nan,nan,";
    } else {
      double mean = 0.0;
      for (double c : costs) mean += c / static_cast<double>(costs.size());
      summary << csv_num(mean) << ',' << csv_num(percentile(costs, 0.5)) << ','
              << csv_num(*std::min_element(costs.begin(), costs.end())) << ','
              << csv_num(*std::max_element(costs.begin(), costs.end())) << ',';
    }
    summary << csv_num(final_err) << '\n';
  }
}

int cmd_generate(const SaddleSpec& spec, const std::string& out_path, std::ostream& out) {
  return guarded(out, [&] {
    const OperatorEnsemble ens = generate_saddle_instance(spec);
    const Vector x_star = *ens.root();
    json meta;
    meta["spec"] = {{"n", spec.n},
                    {"d_y", spec.d_y},
                    {"d_z", spec.d_z},
                    {"seed", spec.seed},
                    {"eig_base", spec.eig_base},
                    {"normal_mean", spec.normal_mean},
                    {"normal_var", spec.normal_var}};
    meta["mu"] = ensemble_modulus(ens);
    meta["L"] = ensemble_lipschitz(ens);
    meta["delta_spectral"] = estimate_delta_spectral(ens);
    meta["delta_plain_norm"] = estimate_delta_plain_norm(ens);
    meta["x_star"] = std::vector<double>(x_star.data(), x_star.data() + x_star.size());
    meta["rng"] = std::string(Rng::kName);
    meta["normal_method"] = std::string(Rng::kNormalMethod);
    const fs::path path(out_path);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_ensemble(out_path, ens, meta.dump());
    out << "wrote " << out_path << ": n=" << ens.size() << " d=" << ens.dim()
        << " mu=" << fmt(meta["mu"].get<double>(), 10) << " L=" << fmt(meta["L"].get<double>(), 8)
        << " delta_spectral=" << fmt(meta["delta_spectral"].get<double>())
        << " hash=" << ensemble_hash(ens) << '\n';
    return kExitOk;
  });
}

int cmd_run(const ExperimentConfig& config, std::ostream& out) {
  return guarded(out, [&] {
    validate(config);
    const OperatorEnsemble ens = load_problem(config.problem, config.seed);
    const auto results = run_experiment(ens, config, out);
    write_results(config.output_dir, ens, config, results);
    for (const auto& r : results) {
      out << r.spec.label << ": final mean sq_error over " << r.traces.size() << " trial(s) = "
          << fmt(aggregate(r.traces, config.record_every, config.iterations).back().sq_error_mean)
          << '\n';
    }
    out << "results in " << config.output_dir << '\n';
    return kExitOk;
  });
}

namespace {

double tail_mean(const std::vector<AggregateRow>& rows) {
  const std::size_t start = rows.size() - std::max<std::size_t>(1, rows.size() / 5);
  double s = 0.0;
  for (std::size_t i = start; i < rows.size(); ++i) s += rows[i].sq_error_mean;
  return s / static_cast<double>(rows.size() - start);
}

}  // namespace

int cmd_reproduce(const ReproduceOptions& opts, std::ostream& out) {
  return guarded(out, [&] {
    ExperimentConfig c;
    c.problem.builtin = "saddle";
    c.iterations = opts.iterations;
    c.trials = opts.trials;
    c.seed = opts.seed;
    c.output_dir = opts.output_dir;
    c.target_error = opts.target_error;
    c.delta_convention = opts.delta_convention;
    c.record_every = opts.record_every;
    c.x0 = "normal";
    auto add = [&c](Algorithm a, std::optional<double> g, double p) {
      AlgorithmSpec s{a, g, p, {}};
      s.label = default_label(s);
      c.algorithms.push_back(s);
    };
    if (opts.figure == "fig1") {
      for (double g : {1e-3, 1e-2, 1e-1}) add(Algorithm::kSppm, g, 1.0);
      add(Algorithm::kSppmOc, std::nullopt, 1.0);
      add(Algorithm::kLsvrp, std::nullopt, 0.05);
    } else if (opts.figure == "fig2") {
      add(Algorithm::kSppmOc, std::nullopt, 1.0);
      for (double p : {1.0, 0.1, 0.05, 1.0 / 200.0}) add(Algorithm::kLsvrp, std::nullopt, p);
      add(Algorithm::kPointSaga, std::nullopt, 1.0);
    } else {
      throw InvalidArgument("figure must be fig1 or fig2");
    }
    const OperatorEnsemble ens = load_problem(c.problem, c.seed);
    const auto results = run_experiment(ens, c, out);
    write_results(c.output_dir, ens, c, results);

    std::vector<std::vector<AggregateRow>> agg;
    for (const auto& r : results) agg.push_back(aggregate(r.traces, c.record_every, c.iterations));
    auto verdict = [&out](bool ok, const std::string& what) {
      out << (ok ? "[ok]    " : "[fails] ") << what << '\n';
    };
    if (opts.figure == "fig1") {
      const double p1 = tail_mean(agg[0]), p2 = tail_mean(agg[1]), p3 = tail_mean(agg[2]);
      out << "sppm plateaus: gamma=1e-3 " << fmt(p1) << ", 1e-2 " << fmt(p2) << ", 1e-1 " << fmt(p3)
          << '\n';
      verdict(p1 < p2 && p2 < p3, "sppm plateau grows with gamma");
      const double lowest = std::min({p1, p2, p3});
      verdict(agg[3].back().sq_error_mean < lowest && agg[4].back().sq_error_mean < lowest,
              "variance-reduced methods end below every sppm plateau");
    } else {
      auto cost = [&](std::size_t a, std::size_t t) -> double {
        const auto& tc = results[a].traces[t].target_cost;
        return tc ? static_cast<double>(*tc) : std::numeric_limits<double>::infinity();
      };
      std::int64_t ordered = 0;
      for (std::size_t t = 0; t < results[0].traces.size(); ++t) {
        const bool ok = cost(5, t) <= 1.25 * cost(2, t) && cost(2, t) < cost(3, t) &&
                        cost(3, t) < cost(0, t);
        ordered += ok ? 1 : 0;
        out << "trial " << t << " calls to " << fmt(c.target_error.value()) << ": point-saga "
            << fmt(cost(5, t)) << ", lsvrp(0.1) " << fmt(cost(2, t)) << ", lsvrp(0.05) "
            << fmt(cost(3, t)) << ", sppm-oc " << fmt(cost(0, t)) << ", lsvrp(1) " << fmt(cost(1, t))
            << ", lsvrp(1/n) " << fmt(cost(4, t)) << '\n';
      }
      verdict(ordered == static_cast<std::int64_t>(results[0].traces.size()),
              "point-saga <~ lsvrp(0.1) < lsvrp(0.05) < sppm-oc in call units (" +
                  std::to_string(ordered) + "/" + std::to_string(results[0].traces.size()) + ")");
      bool same = true;
      for (std::size_t t = 0; t < results[0].traces.size(); ++t) {
        const auto& a = results[0].traces[t].rows;
        const auto& b = results[1].traces[t].rows;
        same = same && a.size() == b.size();
        for (std::size_t i = 0; same && i < a.size(); ++i) same = a[i].sq_error == b[i].sq_error;
      }
      verdict(same, "sppm-oc and lsvrp(p=1) share identical error paths");
    }
    out << "results in " << c.output_dir << '\n';
    return kExitOk;
  });
}

namespace {

struct CheckResult {
  std::string name;
  std::int64_t cases = 0;
  std::int64_t failures = 0;
  std::int64_t skipped = 0;
  double min_rel_slack = std::numeric_limits<double>::infinity();

  void add(const StepCheck& c) {
    ++cases;
    if (!c.holds) ++failures;
    min_rel_slack = std::min(min_rel_slack, c.rhs > 0.0 ? c.slack / c.rhs : c.slack);
  }
  void add(bool ok, double rel_slack) {
    ++cases;
    if (!ok) ++failures;
    min_rel_slack = std::min(min_rel_slack, rel_slack);
  }
};

Vector random_point(const Vector& center, double scale, Rng& rng) {
  return center + scale * rng.normal_vector(center.size());
}

}  // namespace

int cmd_verify(const VerifyOptions& opts, std::ostream& out) {
  return guarded(out, [&] {
    if (!(opts.delta_scale > 0.0)) throw InvalidArgument("delta scale must be positive");
    if (opts.states < 1 || opts.property_cases < 1) throw InvalidArgument("counts must be positive");
    ProblemSource src = opts.problem;
    if (!src.path && !src.builtin && !src.spec) src.builtin = "saddle";
    const OperatorEnsemble ens = load_problem(src, opts.seed);
    const Vector x_star = solution_of(ens);
    const ProblemConstants cst = estimate_constants(ens, x_star, opts.seed);
    const double mu = opts.mu.value_or(cst.mu);
    const double delta_base = ens.all_affine() ? cst.delta_spectral : cst.delta_empirical;
    const double delta = opts.delta_scale * delta_base;
    // Point-SAGA needs the average-similarity constant, which the expected
    // similarity constant does not bound in general.
    const double delta_tilde = opts.delta_scale * cst.delta_tilde;
    const double xs = std::max(1.0, x_star.norm());
    const auto stars = solution_elements(ens, x_star);
    Rng rng = Rng(opts.seed).split(0x7e51f);
    std::vector<CheckResult> results;

    out << "problem: n=" << ens.size() << " d=" << ens.dim() << " mu=" << fmt(mu)
        << " delta=" << fmt(delta) << " delta~=" << fmt(delta_tilde) << " (scale "
        << fmt(opts.delta_scale) << ")\n";

    {
      CheckResult r{"resolvent fixed point at the solution"};
      for (std::int64_t c = 0; c < opts.property_cases; ++c) {
        const auto i = static_cast<std::size_t>(c) % ens.size();
        const double g = std::pow(10.0, -3.0 + 4.0 * rng.uniform());
        const double err = (resolvent(ens.member(i), g, x_star + g * stars[i]) - x_star).norm();
        r.add(err <= 1e-10 * xs, 1.0 - err / (1e-10 * xs));
      }
      results.push_back(r);
    }
    {
      CheckResult r{"resolvent contraction"};
      for (std::int64_t c = 0; c < opts.property_cases; ++c) {
        const auto i = static_cast<std::size_t>(rng.uniform() * double(ens.size())) % ens.size();
        const double g = std::pow(10.0, -3.0 + 4.0 * rng.uniform());
        const double mu_i = std::max(0.0, strong_monotonicity_modulus(ens.member(i)));
        const Vector x = random_point(x_star, 3.0, rng), y = random_point(x_star, 3.0, rng);
        const double lhs =
            (resolvent(ens.member(i), g, x) - resolvent(ens.member(i), g, y)).norm();
        const double rhs = (x - y).norm() / (1.0 + g * mu_i);
        r.add(lhs <= rhs + 1e-12 * std::max(1.0, (x - y).norm()), rhs > 0 ? (rhs - lhs) / rhs : 0.0);
      }
      results.push_back(r);
    }
    {
      CheckResult r{"resolvent inverse consistency"};
      for (std::int64_t c = 0; c < opts.property_cases; ++c) {
        const auto i = static_cast<std::size_t>(rng.uniform() * double(ens.size())) % ens.size();
        const double g = std::pow(10.0, -3.0 + 4.0 * rng.uniform());
        const Vector v = random_point(x_star, 3.0, rng);
        const Vector xp = resolvent(ens.member(i), g, v);
        r.add(resolvent_consistent(ens.member(i), g, v, xp, 1e-9 * std::max(1.0, v.norm())), 0.0);
      }
      results.push_back(r);
    }

    const bool have_rates = mu > 0.0 && std::isfinite(delta);
    if (have_rates) {
      const Vector x0 = random_point(x_star, 1.0, rng);
      auto opt_or_one = [](double g) { return std::isfinite(g) ? g : 1.0; };
      {
        CheckResult r{"sppm-oc step inequality along a trajectory"};
        const ResolventTable res(ens, opt_or_one(sppm_oc_rate(std::nullopt, mu, delta).optimal_gamma));
        SppmOcState s{x0, 0};
        Rng path = rng.split(1);
        CallCounter calls;
        for (std::int64_t k = 0; k < opts.states; ++k) {
          try {
            r.add(verify_step_inequality(s, res, x_star, StepParams{mu, delta, 1.0}));
          } catch (const AmbiguousSelection&) {
            ++r.skipped;
          }
          s = sppm_oc_step(s, res, path, calls);
        }
        results.push_back(r);
      }
      for (double p : {0.05, 1.0 / static_cast<double>(ens.size())}) {
        CheckResult r{"l-svrp step inequality along a trajectory (p=" + fmt(p, 4) + ")"};
        const ResolventTable res(ens, opt_or_one(lsvrp_rate(std::nullopt, mu, delta, p).optimal_gamma));
        CallCounter calls;
        LsvrpState s = lsvrp_init(ens, x0, calls);
        Rng path = rng.split(2);
        for (std::int64_t k = 0; k < opts.states; ++k) {
          try {
            r.add(verify_step_inequality(s, res, x_star, StepParams{mu, delta, p}));
          } catch (const AmbiguousSelection&) {
            ++r.skipped;
          }
          s = lsvrp_step(s, res, p, path, calls);
        }
        results.push_back(r);
      }
      if (ens.is_uniform()) {
        CheckResult r{"point-saga step inequality along a trajectory (delta~=" + fmt(delta_tilde) + ")"};
        const ResolventTable res(
            ens, opt_or_one(point_saga_rate(std::nullopt, mu, delta_tilde, ens.size()).optimal_gamma));
        CallCounter calls;
        PointSagaState s = point_saga_init(ens, x0, calls, true);
        Rng path = rng.split(3);
        for (std::int64_t k = 0; k < opts.states; ++k) {
          r.add(verify_step_inequality(s, res, x_star, StepParams{mu, delta_tilde, 1.0}));
          s = point_saga_step(std::move(s), res, path, calls);
        }
        results.push_back(r);
      }
      if (ens.all_affine()) {
        // Stale anchors: x already at the solution while w is not. The
        // Lyapunov weight on w is smallest relative to the variance term here.
        CheckResult r{"l-svrp step inequality at stale-anchor states"};
        Matrix cmat = Matrix::Zero(ens.dim(), ens.dim());
        for (std::size_t i = 0; i < ens.size(); ++i) {
          const Matrix d = ens.affine_member(i).linear() - ens.mean_linear();
          cmat += ens.weight(i) * d.transpose() * d;
        }
        Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (cmat + cmat.transpose()));
        std::vector<Vector> dirs;
        for (Index j = 0; j < ens.dim(); ++j) dirs.push_back(eig.eigenvectors().col(j));
        for (int j = 0; j < 20; ++j) dirs.push_back(rng.normal_vector(ens.dim()).normalized());
        for (double p : {0.05, 0.1, 0.5, 1.0}) {
          const ResolventTable res(ens, opt_or_one(lsvrp_rate(std::nullopt, mu, delta, p).optimal_gamma));
          for (const auto& v : dirs) {
            for (double scale : {1e-3, 1.0, 1e3}) {
              LsvrpState s;
              s.x = x_star;
              s.w = x_star + scale * v;
              s.a_bar = ensemble_mean_element(ens, s.w);
              r.add(verify_step_inequality(s, res, x_star, StepParams{mu, delta, p}));
            }
          }
        }
        results.push_back(r);
      }
    }

    // The SPPM bound needs every member to be strongly monotone, so it uses
    // the members' own modulus rather than an override.
    if (cst.mu > 0.0 && std::isfinite(cst.sigma_star_sq)) {
      bool all_shifted = true;
      for (const auto& m : ens.members()) {
        all_shifted = all_shifted && std::holds_alternative<ShiftedScalingOperator>(m);
      }
      CheckResult r{all_shifted ? "sppm one-step equality (tightness)" : "sppm one-step bound"};
      for (std::int64_t c = 0; c < opts.property_cases; ++c) {
        const double g = std::pow(10.0, -3.0 + 4.0 * rng.uniform());
        const ResolventTable res(ens, g);
        SppmState s{random_point(x_star, 3.0, rng), 0};
        try {
          const StepCheck chk = verify_step_inequality(s, res, x_star, cst.mu, cst.sigma_star_sq);
          if (all_shifted) {
            const double tol = 1e-10 * std::max(1.0, chk.rhs);
            r.add(std::abs(chk.slack) <= tol, 1.0 - std::abs(chk.slack) / tol);
          } else {
            r.add(chk);
          }
        } catch (const AmbiguousSelection&) {
          ++r.skipped;
        }
      }
      results.push_back(r);
    }

    if (mu > 0.0) {
      // Each method at its own optimal stepsize: far above it the iteration
      // amplifies rounding and the solution is no longer numerically stable.
      CheckResult r{"variance-reduced stationarity at the solution state"};
      const double fallback = 1.0 / mu;
      auto pick = [&](double g) { return std::isfinite(g) && std::isfinite(delta) ? g : fallback; };
      const double d = std::isfinite(delta) ? delta : 0.0;
      const ResolventTable oc_res(ens, pick(sppm_oc_rate(std::nullopt, mu, d).optimal_gamma));
      const ResolventTable lv_res(ens, pick(lsvrp_rate(std::nullopt, mu, d, 0.5).optimal_gamma));
      const ResolventTable ps_res(
          ens, pick(point_saga_rate(std::nullopt, mu, std::isfinite(delta_tilde) ? delta_tilde : 0.0,
                                    ens.size()).optimal_gamma));
      Rng path = rng.split(4);
      CallCounter calls;
      SppmOcState oc{x_star, 0};
      LsvrpState lv{x_star, x_star, ensemble_mean_element(ens, x_star), 0};
      PointSagaState ps = point_saga_solution_state(ens, x_star);
      const bool uniform = ens.is_uniform();
      for (std::int64_t k = 0; k < opts.property_cases / 3 + 1; ++k) {
        oc = sppm_oc_step(oc, oc_res, path, calls);
        lv = lsvrp_step(lv, lv_res, 0.5, path, calls);
        double worst = std::max((oc.x - x_star).norm(), (lv.x - x_star).norm());
        if (uniform) {
          ps = point_saga_step(std::move(ps), ps_res, path, calls);
          worst = std::max(worst, (ps.x - x_star).norm());
        }
        const double tol = 1e-12 * xs;
        r.add(worst <= tol, 1.0 - worst / tol);
      }
      results.push_back(r);
    }

    if (ens.is_uniform()) {
      CheckResult r{"point-saga table consistency"};
      const double g = mu > 0.0 ? 1.0 / (mu * double(ens.size())) : 1e-3;
      const ResolventTable res(ens, g);
      CallCounter calls;
      PointSagaState s = point_saga_init(ens, random_point(x_star, 1.0, rng), calls, true);
      Rng path = rng.split(5);
      for (std::int64_t k = 0; k < opts.property_cases; ++k) {
        s = point_saga_step(std::move(s), res, path, calls);
        Vector mean = Vector::Zero(ens.dim());
        for (const auto& t : s.table) mean += t;
        mean /= double(ens.size());
        double worst = (mean - s.a_bar).norm() / (1e-9 * std::max(1.0, mean.norm()));
        for (std::size_t i = 0; i < ens.size(); ++i) {
          if (const auto* a = std::get_if<AffineOperator>(&ens.member(i))) {
            const Vector direct = a->evaluate((*s.shadow_w)[i]);
            worst = std::max(worst, (direct - s.table[i]).norm() /
                                        (1e-9 * std::max(1.0, direct.norm())));
          }
        }
        r.add(worst <= 1.0, 1.0 - worst);
      }
      results.push_back(r);
    }

    bool ok = true;
    for (const auto& r : results) {
      ok = ok && r.failures == 0;
      out << (r.failures == 0 ? "PASS " : "FAIL ") << r.name << ": cases=" << r.cases
          << " failures=" << r.failures;
      if (r.skipped) out << " skipped=" << r.skipped;
      out << " min_rel_slack=" << fmt(r.min_rel_slack, 4) << '\n';
    }
    if (!have_rates) out << "note: step inequalities skipped (mu <= 0 or delta unknown)\n";
    out << (ok ? "all checks passed\n" : "verification failed\n");
    return ok ? kExitOk : kExitVerification;
  });
}

int cmd_estimate(const EstimateOptions& opts, std::ostream& out) {
  return guarded(out, [&] {
    ProblemSource src = opts.problem;
    if (!src.path && !src.builtin && !src.spec) src.builtin = "saddle";
    const OperatorEnsemble ens = load_problem(src, opts.seed);
    const Vector x_star = solution_of(ens);
    const ProblemConstants c = estimate_constants(ens, x_star, opts.seed);
    const double mu = opts.mu.value_or(c.mu);
    const double delta = std::isnan(c.delta_spectral) ? c.delta_empirical : c.delta_spectral;
    const std::size_t n = ens.size();

    std::vector<std::pair<std::string, double>> rows = {
        {"mu", mu},
        {"L", c.lipschitz},
        {"delta_spectral", c.delta_spectral},
        {"delta_empirical", c.delta_empirical},
        {"delta_plain_norm", c.delta_plain},
        {"delta_affine_exact", c.delta_affine_exact},
        {"delta_tilde", c.delta_tilde},
        {"sigma_star_sq", c.sigma_star_sq},
    };
    out << "problem: n=" << n << " d=" << ens.dim() << '\n';
    for (const auto& [k, v] : rows) out << "  " << k << " = " << fmt(v, 10) << '\n';
    if (ens.all_affine() && std::abs(c.delta_plain - c.delta_spectral) > 1e-12 * (1.0 + c.delta_spectral)) {
      out << "  note: delta_plain_norm (sqrt of the mean operator norm) is not a certified\n"
             "        similarity constant; rates below use delta_spectral\n";
    }
    if (!(mu > 0.0)) {
      out << "  rates unavailable: mu <= 0 (pass --mu to supply a modulus)\n";
    } else if (delta == 0.0) {
      out << "  delta = 0: optimal gamma unbounded; any gamma contracts\n";
      rows.push_back({"gamma_sppm_oc", std::numeric_limits<double>::infinity()});
    } else {
      struct Line {
        std::string name;
        RateReport r;
      };
      std::vector<Line> lines = {{"sppm-oc", sppm_oc_rate(std::nullopt, mu, delta)}};
      for (double p : {0.1, 0.05, 1.0 / double(n)}) {
        lines.push_back({"lsvrp_p" + fmt(p, 4), lsvrp_rate(std::nullopt, mu, delta, p)});
      }
      if (std::isfinite(c.delta_tilde)) {
        lines.push_back({"point-saga", point_saga_rate(std::nullopt, mu, c.delta_tilde, n)});
      }
      out << "  sppm: no optimal gamma; neighborhood gamma*sigma^2/(2mu+gamma*mu^2)\n";
      for (const auto& l : lines) {
        out << "  " << l.name << ": gamma = " << fmt(l.r.optimal_gamma, 8)
            << " factor = " << fmt(l.r.contraction_factor, 12)
            << " complexity = " << fmt(l.r.iteration_complexity_constant, 8) << '\n';
        rows.push_back({"gamma_" + l.name, l.r.optimal_gamma});
        rows.push_back({"factor_" + l.name, l.r.contraction_factor});
      }
    }
    if (opts.csv_path) {
      const fs::path path(*opts.csv_path);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      std::ofstream csv(path);
      csv << "field,value\n";
      for (const auto& [k, v] : rows) csv << k << ',' << csv_num(v) << '\n';
    }
    return kExitOk;
  });
}

}  // namespace sppm
