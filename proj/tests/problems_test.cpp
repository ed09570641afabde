#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "sppm/problems.hpp"
#include "sppm/serialization.hpp"
#include "sppm/theory.hpp"

using namespace sppm;

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

}  // namespace

TEST(RandomMatrices, PrescribedSpectrum) {
  Rng rng(1);
  EXPECT_NEAR(random_matrix_with_spectrum({7.0}, rng)(0, 0), 7.0, 1e-15);
  for (int c = 0; c < 50; ++c) {
    const Matrix m = random_matrix_with_spectrum({1.0, 10.0, 100.0}, rng);
    EXPECT_LE((m - m.transpose()).norm(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
    EXPECT_NEAR(eig.eigenvalues()(0), 1.0, 1e-9);
    EXPECT_NEAR(eig.eigenvalues()(1), 10.0, 1e-9);
    EXPECT_NEAR(eig.eigenvalues()(2), 100.0, 1e-9);
  }
}

TEST(RandomMatrices, OrthogonalBasis) {
  Rng rng(2);
  const Matrix q = random_orthogonal(5, rng);
  EXPECT_LE((q.transpose() * q - Matrix::Identity(5, 5)).norm(), 1e-12);
}

TEST(SaddleInstance, MembersAreUnitModulusWithLipschitzNearOneThousand) {
  const auto ens = generate_saddle_instance({});
  ASSERT_EQ(ens.size(), 200u);
  ASSERT_EQ(ens.dim(), 7);
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const auto& a = ens.affine_member(i);
    EXPECT_NEAR(strong_monotonicity_modulus(a), 1.0, 1e-8);
    const double l = lipschitz_constant(a);
    EXPECT_GE(l, 1000.0 * (1.0 - 1e-9));
    EXPECT_LE(l, 1000.0 * 1.05);
    // coupling block columns have unit length
    const Matrix q = a.linear().block(3, 0, 4, 3);
    for (Index j = 0; j < 3; ++j) EXPECT_NEAR(q.col(j).norm(), 1.0, 1e-12);
  }
}

TEST(SaddleInstance, DeterministicPerSeed) {
  const SaddleSpec spec{.n = 30, .seed = 77};
  EXPECT_EQ(ensemble_hash(generate_saddle_instance(spec)), ensemble_hash(generate_saddle_instance(spec)));
  SaddleSpec other = spec;
  other.seed = 78;
  EXPECT_NE(ensemble_hash(generate_saddle_instance(spec)), ensemble_hash(generate_saddle_instance(other)));
}

TEST(SaddleInstance, RootSolvesTheMeanOperator) {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const auto ens = generate_saddle_instance({.seed = seed});
    ASSERT_TRUE(ens.root().has_value());
    EXPECT_LE(ensemble_mean_element(ens, *ens.root()).norm(), 1e-8);
  }
}

TEST(SaddleInstance, RejectsEmptyDimensions) {
  EXPECT_THROW(generate_saddle_instance({.n = 0}), InvalidArgument);
  EXPECT_THROW(generate_saddle_instance({.d_y = 0}), InvalidArgument);
  EXPECT_THROW(generate_saddle_instance({.d_z = 0}), InvalidArgument);
}

TEST(TwoPieceExample, MeanOperatorAndRoot) {
  const auto ens = build_two_piece_example();
  EXPECT_DOUBLE_EQ(ensemble_mean_element(ens, scalar(2))(0), 3.0);
  // 0 lies in A(1) = [-1, 1]: the members contribute [1, 3] and [-3, -1]
  const auto& a1 = std::get<PiecewiseScalarOperator>(ens.member(0));
  const auto& a2 = std::get<PiecewiseScalarOperator>(ens.member(1));
  EXPECT_TRUE(a1.contains(1.0, 2.0));
  EXPECT_TRUE(a2.contains(1.0, -2.0));
  EXPECT_DOUBLE_EQ(solution_of(ens)(0), 1.0);
  const auto stars = solution_elements(ens, scalar(1));
  EXPECT_DOUBLE_EQ(stars[0](0), 2.0);
  EXPECT_DOUBLE_EQ(stars[1](0), -2.0);
}

TEST(TightnessInstance, ConstantsAndNoiseFreeCase) {
  const auto ens = build_tightness_instance(1.0, scalar(0), {scalar(1), scalar(-1)});
  EXPECT_DOUBLE_EQ(sigma_star_sq(ens, scalar(0)), 1.0);
  EXPECT_DOUBLE_EQ(solution_of(ens)(0), 0.0);

  const auto flat = build_tightness_instance(2.0, scalar(3), {scalar(0), scalar(0)});
  const ResolventTable res(flat, 0.5);
  Vector x = scalar(7);
  for (int k = 0; k < 10; ++k) {
    const Vector next = res.apply(static_cast<std::size_t>(k % 2), x);
    EXPECT_NEAR(next(0) - 3.0, (x(0) - 3.0) / 2.0, 1e-15);
    x = next;
  }
}

TEST(TightnessInstance, RejectsOffsetsThatDoNotAverageToZero) {
  EXPECT_THROW(build_tightness_instance(1.0, scalar(0), {scalar(1), scalar(0)}), InvalidArgument);
  EXPECT_THROW(build_tightness_instance(0.0, scalar(0), {scalar(1), scalar(-1)}), InvalidArgument);
}

TEST(EnsembleFiles, RoundTripPreservesEveryMember) {
  const auto dir = std::filesystem::temp_directory_path() / "sppm_problems_test";
  std::filesystem::create_directories(dir);
  for (const auto& ens : {generate_saddle_instance({.n = 15, .seed = 4}), build_two_piece_example(),
                          build_tightness_instance(1.0, scalar(0.5), {scalar(2), scalar(-2)})}) {
    const auto path = (dir / "e.json").string();
    save_ensemble(path, ens, R"({"note":"test"})");
    const auto back = load_ensemble(path);
    EXPECT_EQ(ensemble_hash(back), ensemble_hash(ens));
    ASSERT_EQ(back.size(), ens.size());
    Rng rng(5);
    for (std::size_t i = 0; i < ens.size(); ++i) {
      const Vector x = rng.normal_vector(ens.dim()) + Vector::Constant(ens.dim(), 0.123);
      EXPECT_EQ(evaluate_element(back.member(i), x), evaluate_element(ens.member(i), x));
    }
    std::ifstream in(path);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    EXPECT_NE(ensemble_metadata(text).find("test"), std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST(EnsembleFiles, RejectsMalformedDocuments) {
  EXPECT_THROW(parse_ensemble("{}"), InvalidArgument);
  EXPECT_THROW(parse_ensemble("not json"), InvalidArgument);
  EXPECT_THROW(parse_ensemble(R"({"format":"sppm-ensemble/1","dim":1,"n":1,"weights":[1],)"
                              R"("members":[{"kind":"mystery"}]})"),
               InvalidArgument);
}
