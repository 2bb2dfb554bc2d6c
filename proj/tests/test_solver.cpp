#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "kaczlab/solver.hpp"
#include "test_support.hpp"

using namespace kaczlab;
using namespace kaczlab::testing;

namespace {

Vector eigen_least_norm(const DenseMatrix& A, const Vector& b) {
  Eigen::MatrixXd E(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j)
      E(i, j) = A(i, j);
  const Eigen::VectorXd eb = Eigen::Map<const Eigen::VectorXd>(b.data(), b.size());
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(E);
  cod.setThreshold(1e-10);
  const Eigen::VectorXd x = cod.solve(eb);
  return Vector(x.data(), x.data() + x.size());
}

// g_pi from its defining sum, with explicit trailing projector chains.
Vector explicit_offset(const DenseMatrix& A, const Vector& b, const std::vector<std::size_t>& order) {
  const std::size_t n = A.cols();
  Vector g(n, 0.0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    double sq = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      sq += A(i, j) * A(i, j);
    const std::vector<std::size_t> trailing(order.begin() + static_cast<long>(k) + 1, order.end());
    const DenseMatrix chain = explicit_projector_chain(A, trailing);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c)
        g[r] += chain(r, c) * b[i] / sq * A(i, c);
  }
  return g;
}

}  // namespace

TEST(ProjectRow, FixedPointOnHyperplane) {
  const Vector a{1.0, 2.0, 3.0};
  const Vector x{1.0, 1.0, 1.0};
  const Vector y = project_row(x, a, 6.0);
  EXPECT_LE(max_abs_diff(x, y), 1e-15);
}

TEST(ProjectRow, AxisCase) {
  const Vector y = project_row(Vector{0.0, 0.0}, Vector{1.0, 0.0}, 1.0);
  EXPECT_EQ(y, (Vector{1.0, 0.0}));
}

TEST(ProjectRow, MatchesExplicitProjectorOracle) {
  std::mt19937_64 gen(77);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector a = random_vector(5, gen);
    const Vector x = random_vector(5, gen);
    const double rhs = random_vector(1, gen)[0];
    double sq = 0.0;
    for (double v : a)
      sq += v * v;
    // p = (rhs/|a|^2) a lies on the hyperplane; x' = x - (a a^T/|a|^2)(x - p).
    Vector expected(5);
    for (std::size_t r = 0; r < 5; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 5; ++c)
        s += a[r] * a[c] / sq * (x[c] - rhs / sq * a[c]);
      expected[r] = x[r] - s;
    }
    const Vector y = project_row(x, a, rhs);
    EXPECT_LE(max_abs_diff(y, expected), 1e-12 * (1.0 + euclid(x)));
    EXPECT_NEAR(dot(a, y), rhs, 1e-12 * (1.0 + std::abs(rhs)) * euclid(a) * euclid(a));
  }
}

TEST(ProjectRow, ZeroRowIsRejected) {
  try {
    project_row(Vector{1.0, 2.0}, Vector{0.0, 0.0}, 1.0, 4);
    FAIL() << "expected ZeroRowError";
  } catch (const ZeroRowError& e) {
    EXPECT_EQ(e.row(), 4u);
  }
}

TEST(RunEpoch, OrthonormalSquareSystemSolvesInOneSweep) {
  std::mt19937_64 gen(8);
  const DenseMatrix Q = orthonormal_rows(4, 4, gen);
  const Vector x_true = random_vector(4, gen);
  const Vector b = multiply(Q, x_true);
  const Vector x = run_epoch(random_vector(4, gen), Q, b, Permutation({2, 0, 3, 1}));
  EXPECT_LE(max_abs_diff(x, x_true), 1e-12);
}

TEST(RunEpoch, SingleRowEqualsProjection) {
  const DenseMatrix A{{2.0, -1.0, 0.5}};
  const Vector b{3.0};
  const Vector x{0.3, 0.2, -0.7};
  EXPECT_EQ(run_epoch(x, A, b, identity_permutation(1)), project_row(x, A.row(0), 3.0));
}

TEST(RunEpoch, MatchesExplicitAffineForm) {
  std::mt19937_64 gen(606);
  for (int trial = 0; trial < 20; ++trial) {
    const DenseMatrix A = random_rank_matrix(6, 4, trial % 2 ? 4 : 2, gen);
    const Vector b = multiply(A, random_vector(4, gen));
    const auto order = shuffled_indices(6, gen);
    const DenseMatrix T = explicit_projector_chain(A, order);
    const Vector g = explicit_offset(A, b, order);
    const Vector x = random_vector(4, gen);
    const Vector expected = add(naive_product(T, DenseMatrix(4, 1, x)).data(), g);
    const Vector got = run_epoch(x, A, b, Permutation(order));
    EXPECT_LE(max_abs_diff(got, expected), 1e-10 * std::max(1.0, euclid(expected)));
  }
}

TEST(RunEpoch, RejectsZeroRowWithIndex) {
  const DenseMatrix A{{1, 0}, {0, 0}, {0, 1}};
  try {
    run_epoch(Vector{0, 0}, A, Vector{1, 0, 1}, identity_permutation(3));
    FAIL();
  } catch (const ZeroRowError& e) {
    EXPECT_EQ(e.row(), 1u);
  }
}

TEST(RrSgdEpoch, DynamicStepReproducesKaczmarzExactly) {
  std::mt19937_64 gen(1);
  const DenseMatrix A = random_matrix(7, 3, gen);
  const Vector b = random_vector(7, gen);
  const Vector x = random_vector(3, gen);
  const Permutation order(shuffled_indices(7, gen));
  const Vector sgd = rr_sgd_epoch(x, A, b, order, [&](std::size_t i) { return 1.0 / dot(A.row(i), A.row(i)); });
  EXPECT_EQ(sgd, run_epoch(x, A, b, order));
}

TEST(RrSgdEpoch, SolutionIsStationary) {
  std::mt19937_64 gen(2);
  const DenseMatrix A = random_matrix(6, 3, gen);
  const Vector x_true = random_vector(3, gen);
  const Vector b = multiply(A, x_true);
  for (double gamma : {1e-3, 0.05, 0.3}) {
    const Vector y = rr_sgd_epoch(x_true, A, b, Permutation(shuffled_indices(6, gen)), gamma);
    EXPECT_LE(max_abs_diff(y, x_true), 1e-13);
  }
  EXPECT_THROW(rr_sgd_epoch(x_true, A, b, identity_permutation(6), 0.0), DomainError);
}

TEST(RrSgdEpoch, MeanSquaredErrorDecaysAtConstantStep) {
  // Full column rank 10 x 3 with gamma = 1 / (sqrt(2) m ||A||^2). The
  // trial-averaged squared error must contract; it is compared with
  // (1 - gamma sigma_min^2 / 2)^k, the in-expectation rate for f = |Ax-b|^2/(2m)
  // whose strong convexity constant is sigma_min^2 / m.
  std::mt19937_64 gen(10);
  const DenseMatrix A = random_matrix(10, 3, gen);
  const Vector x_true = random_vector(3, gen);
  const Vector b = multiply(A, x_true);
  const auto d = svd(A);
  const double m = 10.0;
  const double gamma = 1.0 / (std::sqrt(2.0) * m * d.singular_values.front() * d.singular_values.front());
  const double smin = d.singular_values.back();
  const double e0 = euclid(x_true) * euclid(x_true);

  const int trials = 200, epochs = 20;
  std::vector<double> mean_sq(epochs + 1, 0.0);
  mean_sq[0] = e0;
  RngState rng(5);
  for (int t = 0; t < trials; ++t) {
    Vector x(3, 0.0);
    for (int k = 1; k <= epochs; ++k) {
      x = rr_sgd_epoch(x, A, b, random_permutation(10, rng), gamma);
      const double e = distance(x, x_true);
      mean_sq[k] += e * e / trials;
    }
  }
  for (int k = 1; k <= epochs; ++k) {
    EXPECT_LT(mean_sq[k], mean_sq[k - 1]);
    EXPECT_LE(mean_sq[k], std::pow(1.0 - gamma * smin * smin / 2.0, k) * e0);
  }
}

TEST(Solve, LeastNormLimitFromZeroStart) {
  std::mt19937_64 gen(31);
  const DenseMatrix A = random_matrix(12, 5, gen);
  const Vector b = multiply(A, random_vector(5, gen));
  SolverConfig cfg;
  cfg.rse_tolerance = 1e-20;
  cfg.residual_tolerance = 1e-14;
  const SolveReport r = solve(A, b, Vector(5, 0.0), cfg);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(max_abs_diff(r.solution, eigen_least_norm(A, b)), 1e-9);
}

TEST(Solve, ZeroRightHandSideConvergesImmediately) {
  std::mt19937_64 gen(32);
  const DenseMatrix A = random_matrix(4, 3, gen);
  const SolveReport r = solve(A, Vector(4, 0.0), Vector(3, 0.0), SolverConfig{});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.epochs_run, 0u);
  EXPECT_EQ(r.solution, Vector(3, 0.0));
  EXPECT_TRUE(r.traces.empty());
}

TEST(Solve, RankDeficientConvergesToPseudoinverseSolution) {
  std::mt19937_64 gen(33);
  const DenseMatrix A = random_rank_matrix(8, 5, 3, gen);
  const Vector b = multiply(A, random_vector(5, gen));
  SolverConfig cfg;
  cfg.seed = 19;
  cfg.max_epochs = 5000;
  cfg.rse_tolerance = 1e-24;
  cfg.residual_tolerance = 1e-15;
  const SolveReport r = solve(A, b, Vector(5, 0.0), cfg);
  EXPECT_LE(max_abs_diff(r.solution, eigen_least_norm(A, b)), 1e-8);
}

TEST(Solve, IteratesStayInStartPlusRowSpace) {
  std::mt19937_64 gen(34);
  const DenseMatrix A = random_rank_matrix(7, 6, 3, gen);
  const Vector b = multiply(A, random_vector(6, gen));
  const Vector x0 = random_vector(6, gen);
  const DenseMatrix P = row_space_projector(A);
  for (Variant v : {Variant::rrk, Variant::sok, Variant::ik, Variant::rk, Variant::rr_sgd_const}) {
    for (std::size_t epochs : {1u, 3u, 10u}) {
      SolverConfig cfg;
      cfg.variant = v;
      cfg.max_epochs = epochs;
      cfg.step = 0.01;
      const SolveReport r = solve(A, b, x0, cfg);
      const Vector dx = subtract(r.solution, x0);
      const Vector off = subtract(dx, multiply(P, dx));
      EXPECT_LE(euclid(off), 1e-10 * (1.0 + euclid(r.solution))) << to_string(v) << " " << epochs;
    }
  }
}

TEST(Solve, ErrorNeverIncreasesForKaczmarzVariants) {
  std::mt19937_64 gen(35);
  for (int trial = 0; trial < 10; ++trial) {
    const DenseMatrix A = random_rank_matrix(9, 6, trial % 3 == 0 ? 6 : 4, gen);
    const Vector b = multiply(A, random_vector(6, gen));
    for (Variant v : {Variant::rrk, Variant::sok, Variant::ik, Variant::rk}) {
      SolverConfig cfg;
      cfg.variant = v;
      cfg.seed = static_cast<std::uint64_t>(trial);
      cfg.max_epochs = 60;
      const SolveReport r = solve(A, b, random_vector(6, gen), cfg);
      double prev = r.initial_error;
      for (const auto& t : r.traces) {
        EXPECT_LE(t.error_to_projected_start, prev * (1 + 1e-12) + 1e-14) << to_string(v);
        prev = t.error_to_projected_start;
      }
    }
  }
}

TEST(Solve, VariantTraceShapes) {
  std::mt19937_64 gen(36);
  const DenseMatrix A = random_matrix(6, 4, gen);
  const Vector b = multiply(A, random_vector(4, gen));
  SolverConfig cfg;
  cfg.max_epochs = 5;
  cfg.rse_tolerance = 1e-300;
  cfg.residual_tolerance = 1e-300;

  cfg.variant = Variant::ik;
  for (const auto& t : solve(A, b, Vector(4, 0.0), cfg).traces)
    EXPECT_EQ(Permutation(t.row_order), identity_permutation(6));

  cfg.variant = Variant::sok;
  const auto sok = solve(A, b, Vector(4, 0.0), cfg);
  ASSERT_EQ(sok.traces.size(), 5u);
  for (const auto& t : sok.traces)
    EXPECT_EQ(t.row_order, sok.traces.front().row_order);
  RngState rng(cfg.seed);
  EXPECT_EQ(Permutation(sok.traces.front().row_order), random_permutation(6, rng));

  cfg.variant = Variant::rrk;
  const auto rrk = solve(A, b, Vector(4, 0.0), cfg);
  bool any_differs = false;
  for (const auto& t : rrk.traces) {
    EXPECT_NO_THROW(Permutation{t.row_order});
    any_differs |= t.row_order != rrk.traces.front().row_order;
  }
  EXPECT_TRUE(any_differs);

  cfg.variant = Variant::rk;
  for (const auto& t : solve(A, b, Vector(4, 0.0), cfg).traces) {
    EXPECT_FALSE(t.is_permutation);
    EXPECT_EQ(t.row_order.size(), 6u);
  }
}

TEST(Solve, DeterministicForFixedSeed) {
  std::mt19937_64 gen(37);
  const DenseMatrix A = random_rank_matrix(10, 7, 5, gen);
  const Vector b = multiply(A, random_vector(7, gen));
  for (Variant v : {Variant::rrk, Variant::sok, Variant::rk, Variant::rr_sgd_const}) {
    SolverConfig cfg;
    cfg.variant = v;
    cfg.seed = 99;
    cfg.step = 0.005;
    cfg.max_epochs = 40;
    EXPECT_EQ(solve(A, b, Vector(7, 0.0), cfg), solve(A, b, Vector(7, 0.0), cfg));
  }
}

TEST(Solve, RejectsZeroRowsUpFront) {
  const DenseMatrix A{{1, 2}, {0, 0}, {3, 1}};
  try {
    solve(A, Vector{1, 0, 2}, Vector{0, 0}, SolverConfig{});
    FAIL();
  } catch (const ZeroRowError& e) {
    EXPECT_EQ(e.row(), 1u);
  }
}

TEST(Solve, InconsistentSystemWarnsAndStagnates) {
  const DenseMatrix A{{1, 0}, {1, 0}, {0, 1}};
  const Vector b{1, 2, 1};
  SolverConfig cfg;
  cfg.variant = Variant::ik;
  cfg.max_epochs = 500;
  const SolveReport r = solve(A, b, Vector{0, 0}, cfg);
  EXPECT_FALSE(r.consistent);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.stop_reason, StopReason::stagnation);
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_NE(r.warnings.front().find("InconsistencyWarning"), std::string::npos);
}

TEST(SolverConfig, Validation) {
  SolverConfig cfg;
  cfg.max_epochs = 0;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg = SolverConfig{};
  cfg.rse_tolerance = 0;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg = SolverConfig{};
  cfg.variant = Variant::rr_sgd_const;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg.step = 0.1;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(parse_variant("rrsgd"), Variant::rr_sgd_const);
  EXPECT_FALSE(parse_variant("bogus").has_value());
}
