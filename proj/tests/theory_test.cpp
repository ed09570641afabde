#include <gtest/gtest.h>

#include "sppm/algorithms.hpp"
#include "sppm/problems.hpp"
#include "sppm/theory.hpp"

using namespace sppm;

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

OperatorEnsemble scalar_affine(std::initializer_list<double> slopes, std::initializer_list<double> offsets) {
  std::vector<Operator> m;
  auto o = offsets.begin();
  for (double s : slopes) m.push_back(AffineOperator(Matrix::Constant(1, 1, s), scalar(*o++)));
  return OperatorEnsemble(std::move(m));
}

const OperatorEnsemble& saddle() {
  static const OperatorEnsemble ens = generate_saddle_instance({});
  return ens;
}

}  // namespace

TEST(SigmaStar, Examples) {
  const auto tight = build_tightness_instance(1.0, scalar(0), {scalar(1), scalar(-1)});
  EXPECT_DOUBLE_EQ(sigma_star_sq(tight, scalar(0)), 1.0);
  EXPECT_DOUBLE_EQ(sigma_star_sq(build_two_piece_example(), scalar(1)), 4.0);
  const auto single = scalar_affine({2.0}, {-4.0});
  EXPECT_DOUBLE_EQ(sigma_star_sq(single, scalar(2)), 0.0);
  EXPECT_THROW(sigma_star_sq(single, scalar(3)), InvalidArgument);
}

TEST(SppmBound, Examples) {
  const SppmBound b0 = sppm_bound(0, 1.0, 1.0, 1.0, 2.0);
  EXPECT_DOUBLE_EQ(b0.exact, 2.0);
  EXPECT_DOUBLE_EQ(b0.simplified, 2.0 + 1.0 / 3.0);
  EXPECT_NEAR(sppm_bound(1, 1.0, 1.0, 1.0, 1.0).exact, 0.5, 1e-15);
  EXPECT_NEAR(sppm_bound(2000, 1.0, 1.0, 1.0, 1.0).exact, 1.0 / 3.0, 1e-15);
}

TEST(SppmBound, NoiseFreeIsAPurePower) {
  // 1 + gamma is exact for these stepsizes, so the power is the oracle
  for (double g : {0.5, 1.0, 3.0, 10.0}) {
    for (std::int64_t k : {1, 7, 50}) {
      const double want = std::pow(1.0 + g, -2.0 * double(k)) * 3.0;
      EXPECT_DOUBLE_EQ(sppm_bound(k, g, 1.0, 0.0, 3.0).exact, want);
    }
  }
  // otherwise the log1p form is the more accurate one
  for (double g : {1e-3, 0.1}) {
    const double want = std::exp(-2.0 * 50.0 * std::log1p(g)) * 3.0;
    EXPECT_NEAR(sppm_bound(50, g, 1.0, 0.0, 3.0).exact, want, 1e-14 * want);
  }
}

TEST(SppmBound, SmallStepsizesKeepPrecision) {
  // the neighborhood term is gamma sigma^2/(2 mu) to first order
  const double g = 1e-9;
  const SppmBound b = sppm_bound(1000000, g, 1.0, 1.0, 0.0);
  const double decay = std::pow(1.0 + g, -2e6);
  EXPECT_NEAR(b.exact, (1.0 - decay) * g / (2.0 + g), 1e-6 * b.exact);
}

TEST(Rates, SppmOcExamples) {
  const RateReport r = sppm_oc_rate(std::nullopt, 1.0, 2.0);
  EXPECT_DOUBLE_EQ(r.optimal_gamma, 0.25);
  EXPECT_NEAR(r.contraction_factor, 0.8, 1e-15);
  EXPECT_NEAR(sppm_oc_rate(0.5, 1.0, 0.0).contraction_factor, 1.0 / 2.25, 1e-15);
  const RateReport z = sppm_oc_rate(std::nullopt, 1.0, 0.0);
  EXPECT_TRUE(std::isinf(z.optimal_gamma));
  EXPECT_DOUBLE_EQ(z.contraction_factor, 0.0);
}

TEST(Rates, LsvrpExamples) {
  const RateReport one = lsvrp_rate(std::nullopt, 1.0, 2.0, 1.0);
  EXPECT_DOUBLE_EQ(one.optimal_gamma, 0.25);
  EXPECT_NEAR(one.contraction_factor, 0.8, 1e-15);
  const RateReport half = lsvrp_rate(std::nullopt, 1.0, 2.0, 0.5);
  EXPECT_NEAR(half.optimal_gamma, 0.2, 1e-15);
  EXPECT_NEAR(half.contraction_factor, 5.0 / 6.0, 1e-15);
  EXPECT_NEAR(half.iteration_complexity_constant, 4.0 + 2.0, 1e-15);
}

TEST(Rates, PointSagaExamples) {
  const RateReport one = point_saga_rate(std::nullopt, 1.0, 2.0, 1);
  EXPECT_DOUBLE_EQ(one.optimal_gamma, 0.25);
  EXPECT_NEAR(one.contraction_factor, 0.8, 1e-15);
  const RateReport two = point_saga_rate(std::nullopt, 1.0, 2.0, 2);
  EXPECT_NEAR(two.optimal_gamma, 0.2, 1e-15);
  EXPECT_NEAR(two.contraction_factor, 5.0 / 6.0, 1e-15);
  EXPECT_NEAR(two.iteration_complexity_constant, 4.0 + 2.0, 1e-15);
  EXPECT_NEAR(point_saga_rate(0.3, 1.0, 0.0, 1).contraction_factor, 1.0 / 1.3, 1e-15);
}

TEST(Rates, SaddleStepsizeIsOfOrderOneThousandth) {
  // saddle-scale constants: mu = 1, delta = 26.5
  EXPECT_NEAR(sppm_oc_rate(std::nullopt, 1.0, 26.5).optimal_gamma, 1.42e-3, 1e-5);
}

TEST(Rates, InvalidInputsRejected) {
  EXPECT_THROW(sppm_oc_rate(std::nullopt, 0.0, 1.0), InvalidArgument);
  EXPECT_THROW(lsvrp_rate(std::nullopt, 1.0, 1.0, 0.0), InvalidArgument);
  EXPECT_THROW(point_saga_rate(std::nullopt, 1.0, 1.0, 0), InvalidArgument);
  EXPECT_THROW(sppm_oc_rate(-1.0, 1.0, 1.0), InvalidArgument);
}

// Branch equality at the optimum and local optimality, over random inputs.
TEST(RateProperties, OptimalStepsizeBalancesAndMinimizes) {
  Rng rng(41);
  for (int c = 0; c < 1000; ++c) {
    const double mu = std::pow(10.0, -2.0 + 3.0 * rng.uniform());
    const double delta = mu * std::pow(10.0, 3.0 * rng.uniform());
    const double p = std::max(1e-3, rng.uniform());
    const auto n = static_cast<std::size_t>(1 + rng.uniform() * 500);

    const RateReport lv = lsvrp_rate(std::nullopt, mu, delta, p);
    ASSERT_LE(std::abs(lv.branch_resolvent - lv.branch_variance), 1e-12) << "case " << c;
    const RateReport ps = point_saga_rate(std::nullopt, mu, delta, n);
    ASSERT_LE(std::abs(ps.branch_resolvent - ps.branch_variance), 1e-12) << "case " << c;
    const RateReport oc = sppm_oc_rate(std::nullopt, mu, delta);
    ASSERT_NEAR(oc.contraction_factor, delta * delta / (delta * delta + mu * mu), 1e-12);

    for (double s : {0.9, 1.1}) {
      ASSERT_LE(oc.contraction_factor, sppm_oc_rate(oc.optimal_gamma * s, mu, delta).contraction_factor + 1e-15);
      ASSERT_LE(lv.contraction_factor, lsvrp_rate(lv.optimal_gamma * s, mu, delta, p).contraction_factor + 1e-15);
      ASSERT_LE(ps.contraction_factor, point_saga_rate(ps.optimal_gamma * s, mu, delta, n).contraction_factor + 1e-15);
    }
  }
}

TEST(PredictedIterations, Examples) {
  EXPECT_EQ(predicted_iterations(0.5, 1.0, 0.25), 2);
  EXPECT_EQ(predicted_iterations(0.5, 1.0, 0.2), 3);
  EXPECT_EQ(predicted_iterations(0.5, 0.1, 1.0), 0);
}

TEST(Lyapunov, Examples) {
  const Vector xs = Vector::Zero(2);
  const Vector unit = Vector::Unit(2, 0);
  EXPECT_DOUBLE_EQ(lyapunov(LsvrpState{xs, xs, xs, 0}, xs, 0.2, 1.0, 0.5), 0.0);
  EXPECT_NEAR(lyapunov(LsvrpState{unit, unit, xs, 0}, xs, 0.2, 1.0, 0.5), 1.4, 1e-15);
  PointSagaState s;
  s.x = unit;
  s.shadow_w = std::vector<Vector>{unit, unit};
  EXPECT_NEAR(lyapunov(s, xs, 0.2, 1.0), 1.4, 1e-15);
  s.shadow_w.reset();
  EXPECT_THROW(lyapunov(s, xs, 0.2, 1.0), InvalidArgument);
}

TEST(Similarity, SpectralExamples) {
  EXPECT_DOUBLE_EQ(estimate_delta_spectral(scalar_affine({3.0, 1.0}, {0.0, 0.0})), 1.0);
  EXPECT_DOUBLE_EQ(estimate_delta_spectral(scalar_affine({2.0, 2.0, 2.0}, {1.0, -1.0, 0.0})), 0.0);
  const auto& ens = saddle();
  const double d = estimate_delta_spectral(ens);
  EXPECT_GE(d, estimate_delta_affine_exact(ens));
}

TEST(Similarity, IdenticalMembersHaveZeroDelta) {
  const Operator a = generate_saddle_instance({.n = 1, .seed = 2}).member(0);
  const OperatorEnsemble ens(std::vector<Operator>(6, a));
  EXPECT_EQ(estimate_delta_spectral(ens), 0.0);
  EXPECT_EQ(estimate_delta_affine_exact(ens), 0.0);
  const Vector xs = solution_of(ens);
  Rng rng(3);
  std::vector<Vector> probes;
  for (int i = 0; i < 50; ++i) probes.push_back(xs + rng.normal_vector(ens.dim()));
  EXPECT_EQ(empirical_similarity(ens, xs, probes), 0.0);
  // the average-similarity constant does not vanish here
  EXPECT_NEAR(estimate_delta_tilde_affine_exact(ens),
              lipschitz_constant(std::get<AffineOperator>(a)), 1e-9 * 1000.0);
}

TEST(Similarity, TwoPieceExampleIsExactlyTwo) {
  const auto ens = build_two_piece_example();
  std::vector<Vector> grid;
  for (double x : {-1.0, 0.0, 0.5, 2.0, 3.0}) grid.push_back(scalar(x));
  EXPECT_DOUBLE_EQ(empirical_similarity(ens, scalar(1), grid), 2.0);
}

// The spectral constant dominates every probe ratio.
TEST(SimilarityProperties, EmpiricalBelowSpectral) {
  Rng rng(43);
  for (int c = 0; c < 1000; ++c) {
    const Index d = 1 + static_cast<Index>(rng.uniform() * 4);
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 5);
    std::vector<Operator> members;
    for (std::size_t i = 0; i < n; ++i) {
      Matrix g(d, d);
      for (Index r = 0; r < d; ++r)
        for (Index s = 0; s < d; ++s) g(r, s) = rng.normal();
      members.push_back(AffineOperator(g * g.transpose() + Matrix::Identity(d, d), rng.normal_vector(d)));
    }
    const OperatorEnsemble ens(std::move(members));
    const Vector xs = solution_of(ens);
    std::vector<Vector> probes;
    for (int i = 0; i < 5; ++i) probes.push_back(xs + rng.normal_vector(d));
    const double spectral = estimate_delta_spectral(ens);
    ASSERT_LE(empirical_similarity(ens, xs, probes), spectral + 1e-9) << "case " << c;
    ASSERT_LE(estimate_delta_affine_exact(ens), spectral + 1e-9) << "case " << c;
  }
}

TEST(SimilarityProperties, AverageSimilarityBelowItsExactValue) {
  Rng rng(44);
  for (int c = 0; c < 200; ++c) {
    const Index d = 1 + static_cast<Index>(rng.uniform() * 3);
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 4);
    std::vector<Operator> members;
    for (std::size_t i = 0; i < n; ++i) {
      Matrix g(d, d);
      for (Index r = 0; r < d; ++r)
        for (Index s = 0; s < d; ++s) g(r, s) = rng.normal();
      members.push_back(AffineOperator(g * g.transpose() + Matrix::Identity(d, d), rng.normal_vector(d)));
    }
    const OperatorEnsemble ens(std::move(members));
    const Vector xs = solution_of(ens);
    std::vector<std::vector<Vector>> sets;
    for (int t = 0; t < 5; ++t) {
      std::vector<Vector> set;
      for (std::size_t i = 0; i < n; ++i) set.push_back(xs + rng.normal_vector(d));
      sets.push_back(std::move(set));
    }
    ASSERT_LE(empirical_average_similarity(ens, xs, sets),
              estimate_delta_tilde_affine_exact(ens) * (1.0 + 1e-9) + 1e-12);
  }
}

TEST(StepInequality, SolutionStateHoldsWithZeroSides) {
  const auto& ens = saddle();
  const Vector xs = solution_of(ens);
  const double mu = 1.0, delta = estimate_delta_spectral(ens);
  const ResolventTable res(ens, sppm_oc_rate(std::nullopt, mu, delta).optimal_gamma);
  const StepCheck c = verify_step_inequality(SppmOcState{xs, 0}, res, xs, {mu, delta, 1.0});
  EXPECT_TRUE(c.holds);
  EXPECT_LE(c.lhs, 1e-20);
  EXPECT_EQ(c.rhs, 0.0);
}

TEST(StepInequality, TwoPieceExampleByHand) {
  const auto ens = build_two_piece_example();
  const ResolventTable res(ens, 0.25);
  const StepCheck c = verify_step_inequality(SppmOcState{scalar(0), 0}, res, scalar(1), {1.0, 2.0, 1.0});
  // h_i = a_i(0) - a(0) with a(0) = -3
  double lhs = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    const double a = evaluate_element(ens.member(i), scalar(0))(0);
    const double v = 0.25 * (a + 3.0);
    const double x = resolvent(ens.member(i), 0.25, scalar(v))(0);
    lhs += 0.5 * (x - 1.0) * (x - 1.0);
  }
  EXPECT_NEAR(c.lhs, lhs, 1e-15);
  EXPECT_NEAR(c.rhs, 0.8, 1e-15);
  EXPECT_TRUE(c.holds);
}

TEST(StepInequality, TightnessIsAnEqualityForSppm) {
  const auto ens = build_tightness_instance(1.0, scalar(0), {scalar(1), scalar(-1)});
  const ResolventTable res(ens, 1.0);
  const StepCheck c = verify_step_inequality(SppmState{scalar(1), 0}, res, scalar(0), 1.0, 1.0);
  EXPECT_NEAR(c.lhs, 0.5, 1e-15);
  EXPECT_NEAR(c.rhs, 0.5, 1e-15);
  Rng rng(45);
  for (int k = 0; k < 1000; ++k) {
    const double g = std::pow(10.0, -3.0 + 4.0 * rng.uniform());
    const ResolventTable r(ens, g);
    const StepCheck e = verify_step_inequality(SppmState{scalar(3.0 * rng.normal()), 0}, r, scalar(0), 1.0, 1.0);
    ASSERT_LE(std::abs(e.slack), 1e-10 * std::max(1.0, e.rhs));
  }
}

TEST(StepInequality, BreakpointStatesAreAmbiguous) {
  const auto ens = build_two_piece_example();
  const ResolventTable res(ens, 0.25);
  // the solution itself may sit on a breakpoint
  EXPECT_NO_THROW(verify_step_inequality(SppmOcState{scalar(1), 0}, res, scalar(1), {1.0, 2.0, 1.0}));
  EXPECT_THROW(verify_step_inequality(SppmOcState{scalar(1), 0}, res, scalar(2), {1.0, 2.0, 1.0}),
               AmbiguousSelection);
}

// The one-step inequalities along trajectories of a small saddle instance.
TEST(StepInequality, HoldsAlongTrajectories) {
  const auto ens = generate_saddle_instance({.n = 20, .seed = 6});
  const Vector xs = solution_of(ens);
  const double mu = ensemble_modulus(ens);
  const double delta = estimate_delta_spectral(ens);
  const double delta_tilde = estimate_delta_tilde_affine_exact(ens);
  Rng rng(46);
  const Vector x0 = xs + rng.normal_vector(ens.dim());
  CallCounter calls;
  {
    const ResolventTable res(ens, sppm_oc_rate(std::nullopt, mu, delta).optimal_gamma);
    SppmOcState s{x0, 0};
    for (int k = 0; k < 300; ++k) {
      ASSERT_TRUE(verify_step_inequality(s, res, xs, {mu, delta, 1.0}).holds) << k;
      s = sppm_oc_step(s, res, rng, calls);
    }
  }
  for (double p : {0.05, 0.5}) {
    const ResolventTable res(ens, lsvrp_rate(std::nullopt, mu, delta, p).optimal_gamma);
    LsvrpState s = lsvrp_init(ens, x0, calls);
    for (int k = 0; k < 300; ++k) {
      ASSERT_TRUE(verify_step_inequality(s, res, xs, {mu, delta, p}).holds) << k;
      s = lsvrp_step(s, res, p, rng, calls);
    }
  }
  {
    const ResolventTable res(ens, point_saga_rate(std::nullopt, mu, delta_tilde, ens.size()).optimal_gamma);
    PointSagaState s = point_saga_init(ens, x0, calls);
    for (int k = 0; k < 300; ++k) {
      ASSERT_TRUE(verify_step_inequality(s, res, xs, {mu, delta_tilde, 1.0}).holds) << k;
      s = point_saga_step(std::move(s), res, rng, calls);
    }
  }
}

// Halving the constant breaks the L-SVRP inequality at a stale anchor.
TEST(StepInequality, HalvedDeltaIsCaught) {
  const auto& ens = saddle();
  const Vector xs = solution_of(ens);
  const double mu = 1.0, delta = 0.5 * estimate_delta_spectral(ens);
  Matrix c = Matrix::Zero(ens.dim(), ens.dim());
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const Matrix d = ens.affine_member(i).linear() - ens.mean_linear();
    c += ens.weight(i) * d.transpose() * d;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(c);
  const Vector v = eig.eigenvectors().col(ens.dim() - 1);
  const double p = 0.05;
  const ResolventTable res(ens, lsvrp_rate(std::nullopt, mu, delta, p).optimal_gamma);
  LsvrpState s{xs, xs + v, ensemble_mean_element(ens, xs + v), 0};
  EXPECT_FALSE(verify_step_inequality(s, res, xs, {mu, delta, p}).holds);
}

TEST(ExactSppmMoments, MatchesTheBoundOnTheTightnessInstance) {
  const auto ens = build_tightness_instance(1.0, scalar(0), {scalar(1), scalar(-1)});
  for (double g : {0.1, 1.0, 10.0}) {
    const auto e = sppm_exact_expected_sq_error(ens, scalar(0), scalar(2), g, 50);
    for (std::int64_t k = 1; k <= 50; ++k) {
      const double b = sppm_bound(k, g, 1.0, 1.0, 4.0).exact;
      ASSERT_LE(std::abs(e[k] - b), 1e-10 * b) << "gamma=" << g << " k=" << k;
    }
  }
}
