#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <random>

#include "oracles.hpp"
#include "pptex/pde.hpp"

using namespace pptex;

namespace {

double max_abs_diff(const ImageField& f, const Eigen::VectorXd& v) {
  double m = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) m = std::max(m, std::abs(f.values()[i] - v(Eigen::Index(i))));
  return m;
}

Eigen::MatrixXd dense_of(const StencilOperator& op) {
  const std::size_t n = op.width() * op.height();
  Eigen::MatrixXd M{Eigen::Index(n), Eigen::Index(n)};
  for (std::size_t j = 0; j < n; ++j) {
    ImageField e(op.width(), op.height(), 0.0);
    e.values()[j] = 1.0;
    const ImageField col = op.apply(e);
    for (std::size_t i = 0; i < n; ++i) M(Eigen::Index(i), Eigen::Index(j)) = col.values()[i];
  }
  return M;
}

}  // namespace

TEST(Laplacian, ConstantFieldMapsToZero) {
  const ImageField f(7, 3, 42.5);
  const ImageField lap = laplacian_apply(f);
  for (double v : lap.values()) EXPECT_EQ(v, 0.0);
}

TEST(Laplacian, TwoCells) {
  const ImageField f(1, 2, std::vector<double>{3.0, 10.0});
  const ImageField out = laplacian_apply(f);
  EXPECT_DOUBLE_EQ(out.values()[0], 7.0);
  EXPECT_DOUBLE_EQ(out.values()[1], -7.0);
}

TEST(Laplacian, MatchesDenseOracle) {
  std::mt19937_64 rng(11);
  const ImageField f = oracle::random_field(5, 5, rng);
  const Eigen::VectorXd expect = oracle::neumann_laplacian(5, 5) * oracle::to_vec(f);
  const ImageField out = laplacian_apply(f);
  EXPECT_LE(max_abs_diff(out, expect), 1e-12);
  EXPECT_NEAR(out.sum(), 0.0, 1e-10);
}

TEST(AssembleSystem, TwoCellOperators) {
  const auto sys = assemble_system(1, 2, SolverConfig{5.0, 1.0, 50});
  const Eigen::MatrixXd A = dense_of(sys.A()), B = dense_of(sys.B());
  EXPECT_DOUBLE_EQ(A(0, 0), 7.0);
  EXPECT_DOUBLE_EQ(A(0, 1), -6.0);
  EXPECT_DOUBLE_EQ(A(1, 0), -6.0);
  EXPECT_DOUBLE_EQ(A(1, 1), 7.0);
  EXPECT_DOUBLE_EQ(B(0, 0), 6.0);
  EXPECT_DOUBLE_EQ(B(0, 1), -5.0);
  EXPECT_DOUBLE_EQ(B(1, 1), 6.0);
}

TEST(AssembleSystem, TauZeroIsHeatStep) {
  const auto sys = assemble_system(3, 4, SolverConfig{0.0, 1.0, 1});
  const Eigen::MatrixXd L = oracle::neumann_laplacian(3, 4);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(12, 12);
  EXPECT_LE((dense_of(sys.A()) - (I - L)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((dense_of(sys.B()) - I).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(AssembleSystem, RowSumsAreOneAndAIsSymmetricPositiveDefinite) {
  for (auto [w, h] : {std::pair{1, 1}, {1, 5}, {4, 3}, {6, 6}}) {
    const auto sys = assemble_system(std::size_t(w), std::size_t(h), SolverConfig{});
    const Eigen::MatrixXd A = dense_of(sys.A()), B = dense_of(sys.B());
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      EXPECT_NEAR(A.row(i).sum(), 1.0, 1e-12);
      EXPECT_NEAR(B.row(i).sum(), 1.0, 1e-12);
    }
    EXPECT_LE((A - A.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(A).info(), Eigen::Success);
    // identical 5-point sparsity
    EXPECT_TRUE(((A.array() != 0.0) == (B.array() != 0.0)).all());
  }
}

TEST(AssembleSystem, StoredEntriesMatchAppliedOperator) {
  const auto sys = assemble_system(4, 3, SolverConfig{});
  const Eigen::MatrixXd A = dense_of(sys.A());
  for (std::size_t p = 0; p < 12; ++p)
    for (std::size_t q = 0; q < 12; ++q) EXPECT_DOUBLE_EQ(sys.A().entry(p, q), A(Eigen::Index(p), Eigen::Index(q)));
}

TEST(AssembleSystem, RejectsBadConfiguration) {
  EXPECT_THROW(assemble_system(0, 4, SolverConfig{}), ConfigError);
  EXPECT_THROW(assemble_system(4, 4, SolverConfig{-1.0, 1.0, 1}), ConfigError);
  EXPECT_THROW(assemble_system(4, 4, SolverConfig{5.0, 0.0, 1}), ConfigError);
  const std::size_t huge = std::size_t(1) << 40;
  EXPECT_THROW(assemble_system(huge, huge, SolverConfig{}), ConfigError);
}

TEST(BandedCholesky, MatchesDenseFactorOfRandomBandMatrix) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  const int n = 30, b = 4;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = std::max(0, i - b); j < i; ++j) A(i, j) = A(j, i) = d(rng);
  A.diagonal().array() += 2.0 * b + 1.0;

  const BandedCholesky chol(n, b, [&](std::size_t i, std::size_t j) { return A(Eigen::Index(i), Eigen::Index(j)); });
  const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(A).matrixL();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) EXPECT_NEAR(chol.factor_entry(std::size_t(i), std::size_t(j)), L(i, j), 1e-12);

  Eigen::VectorXd rhs = Eigen::VectorXd::NullaryExpr(n, [&] { return d(rng); });
  std::vector<double> x(rhs.data(), rhs.data() + n);
  chol.solve_in_place(x);
  const Eigen::VectorXd expect = A.ldlt().solve(rhs);
  for (int i = 0; i < n; ++i) EXPECT_NEAR(x[std::size_t(i)], expect(i), 1e-12);
}

TEST(BandedCholesky, IndefiniteMatrixIsNumericError) {
  EXPECT_THROW(BandedCholesky(3, 1, [](std::size_t i, std::size_t j) { return i == j ? -1.0 : 0.0; }),
               NumericError);
}

TEST(EvolveStep, TwoCellClosedForm) {
  const auto sys = assemble_system(1, 2, SolverConfig{});
  const ImageField out = evolve_step(ImageField(1, 2, std::vector<double>{0.0, 10.0}), sys);
  EXPECT_NEAR(out.values()[0], 10.0 / 13.0, 1e-14);
  EXPECT_NEAR(out.values()[1], 120.0 / 13.0, 1e-14);
}

TEST(EvolveStep, ConstantFieldIsFixedPoint) {
  const auto sys = assemble_system(9, 5, SolverConfig{});
  const ImageField out = evolve_step(ImageField(9, 5, 77.0), sys);
  for (double v : out.values()) EXPECT_NEAR(v, 77.0, 1e-12);
}

TEST(EvolveStep, MatchesDenseSolveOnRandom4x4) {
  std::mt19937_64 rng(3);
  const ImageField f = oracle::random_field(4, 4, rng);
  const auto sys = assemble_system(4, 4, SolverConfig{});
  EXPECT_LE(max_abs_diff(evolve_step(f, sys), oracle::dense_step(oracle::to_vec(f), 4, 4, 5.0, 1.0)), 1e-9);
}

TEST(EvolveStep, WideAndTallGridsAgreeWithOracle) {
  // Wide grids are numbered column-major internally; both paths must agree.
  std::mt19937_64 rng(8);
  for (auto [w, h] : {std::pair{6, 2}, {2, 6}, {5, 3}, {1, 6}, {6, 1}}) {
    const ImageField f = oracle::random_field(std::size_t(w), std::size_t(h), rng);
    const auto sys = assemble_system(std::size_t(w), std::size_t(h), SolverConfig{});
    EXPECT_LE(max_abs_diff(evolve_step(f, sys), oracle::dense_step(oracle::to_vec(f), w, h, 5.0, 1.0)), 1e-9)
        << w << "x" << h;
  }
}

TEST(EvolveStep, ResidualAndConservation) {
  std::mt19937_64 rng(21);
  const ImageField f = oracle::random_field(17, 13, rng);
  const auto sys = assemble_system(17, 13, SolverConfig{});
  const ImageField next = evolve_step(f, sys);
  const Eigen::VectorXd rhs = oracle::to_vec(sys.B().apply(f));
  const Eigen::VectorXd lhs = oracle::to_vec(sys.A().apply(next));
  EXPECT_LE((lhs - rhs).norm(), 1e-8 * rhs.norm());
  EXPECT_LE(std::abs(next.sum() - f.sum()), 1e-8 * std::abs(f.sum()) + 1e-8);
}

TEST(EvolveStep, ShapeMismatchIsContractViolation) {
  const auto sys = assemble_system(4, 4, SolverConfig{});
  EXPECT_THROW(evolve_step(ImageField(4, 5), sys), ContractViolation);
}

TEST(EvolveStep, Linearity) {
  std::mt19937_64 rng(4);
  const auto sys = assemble_system(8, 6, SolverConfig{});
  for (int trial = 0; trial < 10; ++trial) {
    const ImageField f = oracle::random_field(8, 6, rng, -50, 50);
    const ImageField g = oracle::random_field(8, 6, rng, -50, 50);
    const double a = 2.5 - trial, b = 0.25 * trial;
    ImageField combo(8, 6);
    for (std::size_t i = 0; i < combo.size(); ++i) combo.values()[i] = a * f.values()[i] + b * g.values()[i];
    const ImageField lhs = evolve_step(combo, sys);
    const ImageField ef = evolve_step(f, sys), eg = evolve_step(g, sys);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < combo.size(); ++i) {
      const double rhs = a * ef.values()[i] + b * eg.values()[i];
      err = std::max(err, std::abs(lhs.values()[i] - rhs));
      scale = std::max(scale, std::abs(rhs));
    }
    EXPECT_LE(err, 1e-8 * scale + 1e-12);
  }
}

TEST(SpectralBound, AmplificationFactorsOn6x6) {
  // Eigen-oracle: Neumann Laplacian eigenvalues lie in (-8, 0] and the
  // per-mode factor (1 - 5 lambda) / (1 - 6 lambda) in [41/49, 1].
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(oracle::neumann_laplacian(6, 6));
  const Eigen::VectorXd lambda = es.eigenvalues();
  EXPECT_GT(lambda.minCoeff(), -8.0);
  EXPECT_LE(lambda.maxCoeff(), 1e-12);
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double g = (1 - 5 * lambda(i)) / (1 - 6 * lambda(i));
    EXPECT_GE(g, 41.0 / 49.0);
    EXPECT_LE(g, 1.0 + 1e-15);
  }
}

TEST(SpectralBound, MeanRemovedNormContracts) {
  std::mt19937_64 rng(12);
  const auto sys = assemble_system(6, 6, SolverConfig{});
  for (int trial = 0; trial < 50; ++trial) {
    const ImageField f = oracle::random_field(6, 6, rng);
    const ImageField g = evolve_step(f, sys);
    const Eigen::VectorXd df = oracle::to_vec(f).array() - f.mean();
    const Eigen::VectorXd dg = oracle::to_vec(g).array() - g.mean();
    EXPECT_LE(dg.norm(), df.norm());
    EXPECT_GE(dg.norm(), 41.0 / 49.0 * df.norm() - 1e-6);
  }
}

TEST(EvolveSequence, LengthAndFirstFrame) {
  std::mt19937_64 rng(1);
  const ImageField f = oracle::random_field(10, 8, rng);
  const auto frames = evolve_sequence(f, SolverConfig{});
  ASSERT_EQ(frames.size(), 51u);
  EXPECT_EQ(frames.front(), f);
}

TEST(EvolveSequence, ConstantImageOneStep) {
  const auto frames = evolve_sequence(ImageField(5, 5, 3.0), SolverConfig{5.0, 1.0, 1});
  ASSERT_EQ(frames.size(), 2u);
  for (double v : frames[1].values()) EXPECT_NEAR(v, 3.0, 1e-12);
}

TEST(EvolveSequence, TwoStepsMatchDoubleDenseSolve) {
  const ImageField f(1, 2, std::vector<double>{0.0, 10.0});
  const auto frames = evolve_sequence(f, SolverConfig{5.0, 1.0, 2});
  ASSERT_EQ(frames.size(), 3u);
  const Eigen::VectorXd once = oracle::dense_step(oracle::to_vec(f), 1, 2, 5.0, 1.0);
  const Eigen::VectorXd twice = oracle::dense_step(once, 1, 2, 5.0, 1.0);
  EXPECT_LE(max_abs_diff(frames[1], once), 1e-9);
  EXPECT_LE(max_abs_diff(frames[2], twice), 1e-9);
}

TEST(ImageFieldTest, RejectsNonFiniteAndBadSizes) {
  EXPECT_THROW(ImageField(2, 2, std::vector<double>{1, 2, 3}), InputError);
  EXPECT_THROW(ImageField(1, 1, std::vector<double>{std::nan("")}), InputError);
  EXPECT_THROW(ImageField(0, 3), ConfigError);
}
