#include <grmf/subproblem.hpp>

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "test_util.hpp"

using namespace grmf;
using testutil::random_matrix;
using testutil::random_vector;

namespace {

HyperParams params(double l1, double l2, double l3, double t1 = 1.0, double t2 = 1.0,
                   Variant variant = Variant::GRMF) {
  HyperParams h;
  h.lambda1 = l1;
  h.lambda2 = l2;
  h.lambda3 = l3;
  h.tau1 = t1;
  h.tau2 = t2;
  h.variant = variant;
  return h;
}

SubproblemState state_for(const Vector& x, const ActiveSets& active, double nu = 1.0) {
  SubproblemState s;
  s.x = x;
  s.pairs = PairValues(static_cast<int>(x.size()));
  s.duals = PairValues(static_cast<int>(x.size()));
  s.active = active;
  s.nu = nu;
  return s;
}

// Instance of the structured-recovery example: x* = (2, 2, 0), b = A x*.
struct Structured {
  Matrix A;
  Vector b;
  Vector truth;
};

Structured structured_instance(std::uint64_t seed) {
  Rng rng(seed);
  Structured s;
  s.truth = Vector(3);
  s.truth << 2, 2, 0;
  s.A = random_matrix(rng, 20, 3);
  s.b = s.A * s.truth;
  return s;
}

}  // namespace

TEST(UpdateCoordinate, SinglePointWeightedLeastSquares) {
  Matrix A(1, 1);
  A << 1;
  Vector b(1), x(1), x_ref(1);
  b << 4;
  x << 0;
  x_ref << 10;  // outside F
  SubproblemState s = state_for(x, ActiveSets{});
  s.irls_weights = Vector::Constant(1, 2.5);
  EXPECT_NEAR(update_coordinate(0, A, b, s, x_ref, params(1, 1, 0)), 4.0, 1e-14);
}

TEST(UpdateCoordinate, DeadZoneGivesExactZero) {
  Rng rng(21);
  const Matrix A = random_matrix(rng, 6, 3, 0.1);
  const Vector b = random_vector(rng, 6, 0.1);
  const Vector x = random_vector(rng, 3);
  const Vector x_ref = Vector::Zero(3);  // every coordinate in F
  SubproblemState s = state_for(x, active_sets(x_ref, 1, 1e-9, Variant::GRMF));
  s.irls_weights = (b - A * x).array().square() + 1e-6;
  // lambda1 / tau1 = 1e6 swamps any gamma*.
  for (int l = 0; l < 3; ++l) EXPECT_EQ(update_coordinate(l, A, b, s, x_ref, params(1e6, 0, 0.1)), 0.0);
}

TEST(UpdateCoordinate, MatchesGoldenSectionOnAugmentedLagrangian) {
  Rng rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix A = random_matrix(rng, 6, 3);
    const Vector b = random_vector(rng, 6, 2.0);
    const Vector x = random_vector(rng, 3);
    const Vector x_ref = random_vector(rng, 3, 0.6);
    for (Variant v : {Variant::GRMF, Variant::NGRMF, Variant::GMF_L2}) {
      const HyperParams h = params(0.7, 0.9, 0.3, 0.5, 0.8, v);
      SubproblemState s = state_for(x, active_sets(x_ref, h.tau1, h.tau2, v), rng.uniform(0.5, 3.0));
      for (const Edge e : s.active.E) {
        s.pairs[e] = rng.normal();
        s.duals[e] = rng.normal();
      }
      s.irls_weights = (b - A * x).array().square() + h.epsilon;
      Vector w(6);
      for (int i = 0; i < 6; ++i) w[i] = v == Variant::GMF_L2 ? 2.0 : 1.0 / std::sqrt(s.irls_weights[i]);

      for (int l = 0; l < 3; ++l) {
        // Coordinate restriction of the quadratic majorant plus the
        // augmented Lagrangian terms, with D frozen.
        auto f = [&](double t) {
          Vector z = x;
          z[l] = t;
          const Vector res = b - A * z;
          double val = 0.5 * (w.array() * res.array().square()).sum();
          const bool kappa = v != Variant::NGRMF || x_ref[l] < 0;
          if (kappa) val += h.lambda3 * t * t;
          if (std::abs(x_ref[l]) < h.tau1) val += h.lambda1 / h.tau1 * std::abs(t);
          for (const Edge e : s.active.E) {
            const double d = z[e.lo] - z[e.hi] - s.pairs[e];
            val += s.duals[e] * d + 0.5 * s.nu * d * d;
          }
          return val;
        };
        const double expected = oracle::golden_section(f, -60, 60);
        EXPECT_NEAR(update_coordinate(l, A, b, s, x_ref, h), expected, 1e-6)
            << "variant " << to_string(v) << " coordinate " << l;
      }
    }
  }
}

TEST(UpdateCoordinate, NonPositiveCurvatureIsNumericalError) {
  const Matrix A = Matrix::Zero(3, 2);
  const Vector b = Vector::Ones(3), x = Vector::Ones(2), x_ref = Vector::Constant(2, 5.0);
  SubproblemState s = state_for(x, ActiveSets{});
  s.irls_weights = Vector::Ones(3);
  EXPECT_THROW(update_coordinate(0, A, b, s, x_ref, params(0, 0, 0)), NumericalError);
}

TEST(UpdatePair, Examples) {
  Vector x(2);
  x << 3, 3;
  ActiveSets active;
  active.E = {{0, 1}};
  SubproblemState s = state_for(x, active);
  EXPECT_EQ(update_pair(0, 1, s, params(1, 1, 0)), 0.0);

  x << 5, 0;
  s = state_for(x, active, 1.0);
  EXPECT_EQ(update_pair(0, 1, s, params(1, 2, 0, 1, 1)), 3.0);
}

TEST(UpdatePair, ZeroWeightLimit) {
  Rng rng(23);
  for (int k = 0; k < 50; ++k) {
    Vector x = random_vector(rng, 2, 3.0);
    ActiveSets active;
    active.E = {{0, 1}};
    SubproblemState s = state_for(x, active, rng.uniform(0.1, 10));
    s.duals.at(0, 1) = rng.normal();
    EXPECT_NEAR(update_pair(0, 1, s, params(0, 0, 0)), x[0] - x[1] + s.duals.at(0, 1) / s.nu, 1e-12);
  }
}

TEST(UpdatePair, PairsOutsideEKeepTheirValue) {
  Vector x(3);
  x << 0, 10, 20;
  SubproblemState s = state_for(x, ActiveSets{});
  s.pairs.at(0, 2) = -7.5;
  EXPECT_EQ(update_pair(0, 2, s, params(1, 1, 0)), -7.5);
}

TEST(UpdateDuals, Examples) {
  Vector x(2);
  x << 1, 1;
  ActiveSets active;
  active.E = {{0, 1}};
  HyperParams h = params(1, 1, 0);
  h.rho = 1.5;

  SubproblemState s = state_for(x, active, 2.0);
  s.duals.at(0, 1) = 0.25;
  SubproblemState t = update_duals(s, h);
  EXPECT_EQ(t.duals.at(0, 1), 0.25);
  EXPECT_EQ(t.nu, 3.0);

  x << 2, 1;  // residual x0 - x1 - pair = 1
  s = state_for(x, active, 2.0);
  t = update_duals(s, h);
  EXPECT_EQ(t.duals.at(0, 1), 2.0);

  s = state_for(x, active, h.nu0);
  for (int k = 0; k < 3; ++k) s = update_duals(s, h);
  EXPECT_EQ(s.nu, h.nu0 * h.rho * h.rho * h.rho);
}

TEST(Admm, PenaltyGrowsGeometrically) {
  Rng rng(24);
  const Matrix A = random_matrix(rng, 8, 3);
  const Vector b = random_vector(rng, 8);
  HyperParams h = params(1, 1, 0.1, 1, 1);
  h.eps_admm = 1e-300;
  h.max_admm = 17;
  const Vector x0 = Vector::Zero(3);
  SubproblemState s = state_for(x0, ActiveSets{}, h.nu0);
  s = admm_solve(A, b, active_sets(x0, 1, 1, Variant::GRMF), s, x0, h);
  double expected = 0;
  // The loop may stop early once x is exactly stationary; nu still follows
  // nu0 * rho^k for the k iterations that ran.
  ASSERT_LE(s.iterations, 17);
  expected = h.nu0;
  for (int k = 0; k < s.iterations; ++k) expected *= h.rho;
  EXPECT_EQ(s.nu, expected);
}

TEST(Admm, UnpenalizedMatchesNewtonOracle) {
  Rng rng(25);
  for (int inst = 0; inst < 10; ++inst) {
    const int r = 1 + inst % 3, n = 5 + inst % 4;
    const Matrix A = random_matrix(rng, n, r);
    const Vector b = random_vector(rng, n, 2.0);
    HyperParams h = params(0, 0, 0.05);
    // Near-interpolating fits make the eps = 1e-6 smoothing stiff enough that
    // a single ADMM call crawls; a milder smoothing keeps this a test of the
    // update rules rather than of conditioning.
    h.epsilon = 1e-2;
    h.eps_admm = 1e-18;
    h.max_admm = 2000;
    const Vector x_ref = Vector::Zero(r);
    SubproblemState s = state_for(x_ref, ActiveSets{});
    s = admm_solve(A, b, ActiveSets{}, s, x_ref, h);
    const Vector expected = oracle::newton_smooth_l1_ridge(A, b, 0.05, h.epsilon);
    EXPECT_LE((s.x - expected).norm(), 1e-4) << "instance " << inst;
  }
}

TEST(Admm, ConsensusAtExit) {
  Rng rng(26);
  for (int inst = 0; inst < 20; ++inst) {
    const Matrix A = random_matrix(rng, 10, 4);
    const Vector b = random_vector(rng, 10);
    HyperParams h = params(0.5, 0.5, 0.01, 0.5, 0.5);
    const Vector x_ref = random_vector(rng, 4, 0.3);
    const ActiveSets active = active_sets(x_ref, h.tau1, h.tau2, h.variant);
    SubproblemState s = state_for(x_ref, active);
    for (const Edge e : active.E) s.pairs[e] = x_ref[e.lo] - x_ref[e.hi];
    s = admm_solve(A, b, active, s, x_ref, h);
    for (const Edge e : active.E) EXPECT_LE(std::abs(s.x[e.lo] - s.x[e.hi] - s.pairs[e]), 1e-4);
  }
}

TEST(DcSolve, IdentityDesignRecoversB) {
  Rng rng(27);
  const Vector b = random_vector(rng, 4, 3.0);
  HyperParams h = params(0, 0, 0);
  h.eps_admm = 1e-14;
  h.max_admm = 500;
  const DcResult r = dc_solve(Matrix::Identity(4, 4), b, Vector::Zero(4), h);
  EXPECT_LE((r.x - b).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(DcSolve, RecoversSparsityAndGrouping) {
  HyperParams h = params(0.5, 0.5, 1e-3, 0.5, 0.5);
  h.eps_admm = 1e-10;
  h.eps_dc = 1e-10;
  int recovered = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Structured s = structured_instance(seed);
    const DcResult r = dc_solve(s.A, s.b, Vector::Zero(3), h);
    EXPECT_LE(subproblem_objective(s.A, s.b, r.x, h), subproblem_objective(s.A, s.b, s.truth, h) + 1e-6);
    recovered += std::abs(r.x[2]) <= 1e-6 && std::abs(r.x[0] - r.x[1]) <= 1e-6;
  }
  EXPECT_GE(recovered, 18);
}

// With lambda1 = lambda2 = 0 the subproblem is convex, so the solver from a
// fixed start must reach the global minimum.
TEST(DcSolve, ConvexCaseMatchesGridOracle) {
  Rng rng(28);
  for (int inst = 0; inst < 10; ++inst) {
    const Matrix A = random_matrix(rng, 5, 2);
    const Vector b = random_vector(rng, 5, 1.5);
    HyperParams h = params(0, 0, 0.2);
    h.eps_admm = 1e-14;
    h.max_admm = 1000;
    const DcResult r = dc_solve(A, b, Vector::Zero(2), h);
    const auto grid = oracle::grid_minimum(2, 401, -3, 3, [&](const Vector& x) { return subproblem_objective(A, b, x, h); });
    EXPECT_LE(subproblem_objective(A, b, r.x, h), grid.value + 1e-3) << "instance " << inst;
  }
}

// Non-convex case: started inside the basin of the grid minimizer the solver
// must be at least as good as the grid.
TEST(DcSolve, LocalAccuracyAgainstGridOracle) {
  Rng rng(29);
  for (int inst = 0; inst < 10; ++inst) {
    const Matrix A = random_matrix(rng, 5, 2);
    const Vector b = random_vector(rng, 5, 1.5);
    HyperParams h = params(0.5, 0.5, 0.05, 0.5, 0.5);
    h.eps_admm = 1e-12;
    h.eps_dc = 1e-12;
    h.max_admm = 1000;
    const auto grid = oracle::grid_minimum(2, 401, -3, 3, [&](const Vector& x) { return subproblem_objective(A, b, x, h); });
    const DcResult r = dc_solve(A, b, grid.argmin, h);
    EXPECT_LE(subproblem_objective(A, b, r.x, h), grid.value + 1e-3) << "instance " << inst;
  }
}

TEST(DcSolve, TrueObjectiveIsNonIncreasing) {
  Rng rng(30);
  for (int inst = 0; inst < 30; ++inst) {
    const int r = 2 + inst % 4;
    const Matrix A = random_matrix(rng, 12, r);
    const Vector b = random_vector(rng, 12, 2.0);
    const Variant v = static_cast<Variant>(inst % 3);
    const HyperParams h = params(0.8, 0.8, 0.05, 0.7, 0.7, v);
    const DcResult res = dc_solve(A, b, random_vector(rng, r), h);
    double prev = res.trace.initial_objective;
    for (const auto& it : res.trace.iterations) {
      EXPECT_LE(it.objective, prev + 10 * h.eps_admm);
      prev = it.objective;
    }
    EXPECT_NEAR(prev, subproblem_objective(A, b, res.x, h), 1e-9 * std::max(1.0, std::abs(prev)));
  }
}

TEST(DcSolve, MajorizationGap) {
  Rng rng(31);
  for (int inst = 0; inst < 20; ++inst) {
    const int r = 2 + inst % 3;
    const Matrix A = random_matrix(rng, 8, r);
    const Vector b = random_vector(rng, 8);
    const Variant v = inst % 2 ? Variant::GRMF : Variant::GMF_L2;
    const HyperParams h = params(0.6, 0.9, 0.1, 0.5, 0.5, v);
    const Vector x_ref = random_vector(rng, r, 0.5);
    const ActiveSets active = active_sets(x_ref, h.tau1, h.tau2, v);
    const double m_ref = majorized_objective(A, b, x_ref, active, h);
    const double s_ref = subproblem_objective(A, b, x_ref, h);
    for (int k = 0; k < 100; ++k) {
      const Vector x = random_vector(rng, r, 1.5);
      EXPECT_GE(majorized_objective(A, b, x, active, h) - m_ref, subproblem_objective(A, b, x, h) - s_ref - 1e-8);
    }
  }
}

TEST(DcSolve, MajorizedObjectiveForms) {
  Rng rng(32);
  const Matrix A = random_matrix(rng, 6, 3);
  const Vector b = random_vector(rng, 6), x = random_vector(rng, 3);
  const HyperParams h = params(1, 1, 0.3);
  EXPECT_NEAR(majorized_objective(A, b, x, ActiveSets{}, h), smooth_abs_loss(A, b, x, h.epsilon) + 0.3 * x.squaredNorm(),
              1e-12);

  HyperParams hn = h;
  hn.variant = Variant::NGRMF;
  const Vector nonneg = Vector::Constant(3, 4.0);
  const ActiveSets a = active_sets(nonneg, hn.tau1, hn.tau2, hn.variant);
  EXPECT_TRUE(a.N.empty());
  // All three coordinates coincide, so every pair is in E but every
  // difference at x is evaluated explicitly below.
  double expected = smooth_abs_loss(A, b, x, h.epsilon);
  for (const Edge e : a.E) expected += std::abs(x[e.lo] - x[e.hi]);
  EXPECT_NEAR(majorized_objective(A, b, x, a, hn), expected, 1e-12);
}

TEST(DcSolve, FixedPointConsistency) {
  Rng rng(33);
  for (int inst = 0; inst < 10; ++inst) {
    const Matrix A = random_matrix(rng, 10, 3);
    const Vector b = random_vector(rng, 10, 2.0);
    HyperParams h = params(0.5, 0.5, 0.05, 0.5, 0.5);
    h.eps_admm = 1e-12;
    h.max_admm = 1000;
    const DcResult first = dc_solve(A, b, Vector::Zero(3), h);
    const DcResult again = dc_solve(A, b, first.x, h);
    EXPECT_LE((again.x - first.x).squaredNorm(), h.eps_dc);
  }
}

TEST(DcSolve, GmfL2UnpenalizedIsLeastSquares) {
  Rng rng(34);
  for (int inst = 0; inst < 5; ++inst) {
    const Matrix A = random_matrix(rng, 20, 3);
    const Vector b = random_vector(rng, 20, 2.0);
    HyperParams h = params(0, 0, 0, 1, 1, Variant::GMF_L2);
    h.eps_admm = 1e-20;
    h.eps_dc = 1e-20;
    h.max_admm = 2000;
    const DcResult r = dc_solve(A, b, Vector::Zero(3), h);
    EXPECT_LE((r.x - oracle::least_squares(A, b)).norm(), 1e-6);
  }
}

TEST(DcSolve, BitIdenticalReruns) {
  Rng rng(35);
  const Matrix A = random_matrix(rng, 9, 4);
  const Vector b = random_vector(rng, 9), x0 = random_vector(rng, 4);
  const HyperParams h = params(0.5, 0.5, 0.05, 0.5, 0.5);
  const DcResult a = dc_solve(A, b, x0, h), c = dc_solve(A, b, x0, h);
  EXPECT_EQ(a.x, c.x);
  ASSERT_EQ(a.trace.iterations.size(), c.trace.iterations.size());
  for (std::size_t k = 0; k < a.trace.iterations.size(); ++k)
    EXPECT_EQ(a.trace.iterations[k].objective, c.trace.iterations[k].objective);
}

TEST(DcSolve, NonFiniteIsReportedWithIteration) {
  Matrix A = Matrix::Ones(3, 2);
  const Vector b = Vector::Constant(3, 1e300);
  HyperParams h = params(0, 0, 0);
  try {
    dc_solve(A, b, Vector::Zero(2), h);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("DC iteration 1"), std::string::npos) << e.what();
  }
}

TEST(DcSolve, RejectsBadInput) {
  EXPECT_THROW(dc_solve(Matrix::Ones(3, 2), Vector::Ones(2), Vector::Zero(2), HyperParams{}), std::invalid_argument);
  Vector x0 = Vector::Zero(2);
  x0[1] = std::nan("");
  EXPECT_THROW(dc_solve(Matrix::Ones(3, 2), Vector::Ones(3), x0, HyperParams{}), std::invalid_argument);
  HyperParams bad;
  bad.rho = 0.5;
  EXPECT_THROW(dc_solve(Matrix::Ones(3, 2), Vector::Ones(3), Vector::Zero(2), bad), std::invalid_argument);
}
