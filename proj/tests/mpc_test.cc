#include "clqr/mpc.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "clqr/polytope.hpp"
#include "clqr/presets.hpp"

namespace clqr {
namespace {

constexpr double kExample1GoldenValue = 6.5592389212266795;

// Stage-wise cost Σ_{k<N} x_kᵀQx_k + u_kᵀRu_k + x_NᵀP*x_N by forward simulation.
double StageCost(const LtiSystem& s, const Matrix& Pstar, const Vector& x0, const Vector& U, int N) {
  Vector x = x0;
  double J = 0.0;
  for (int k = 0; k < N; ++k) {
    const Vector u = U.segment(k * s.m(), s.m());
    J += x.dot(s.Q * x) + u.dot(s.R * u);
    x = s.A * x + s.B * u;
  }
  return J + x.dot(Pstar * x);
}

bool StageFeasible(const ProblemInstance& inst, const Vector& x0, const Vector& U, int N, double tol) {
  const LtiSystem& s = inst.system;
  Vector x = x0;
  for (int k = 0; k < N; ++k) {
    const Vector u = U.segment(k * s.m(), s.m());
    if (inst.input_set.num_rows() && (inst.input_set.H * u - inst.input_set.h).maxCoeff() > tol) return false;
    x = s.A * x + s.B * u;
    if (inst.state_set.num_rows() && (inst.state_set.H * x - inst.state_set.h).maxCoeff() > tol) return false;
  }
  return true;
}

struct Fixture {
  ProblemInstance inst;
  RiccatiSolution ric;
  Polyhedron olqr;
  MpqpData mpqp;
};

Fixture Make(const ProblemInstance& inst, int N) {
  Fixture f{inst, SolveDare(inst.system), {}, {}};
  const InvariantSetResult inv = LqrInvariantSet(inst, f.ric);
  EXPECT_TRUE(inv.converged);
  f.olqr = inv.set;
  f.mpqp = Condense(inst.system, inst.state_set, inst.input_set, f.ric.P, N);
  return f;
}

TEST(MpcTest, ScalarCondensedMatricesByHand) {
  const LtiSystem s{Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const MpqpData d = Condense(s, Polyhedron::Unconstrained(1), Polyhedron::Unconstrained(1),
                              Matrix::Constant(1, 1, phi), 1);
  EXPECT_NEAR(d.Y(0, 0), 2.0 * (1.0 + phi), 1e-12);
  EXPECT_NEAR(d.H(0, 0), 2.0 * (1.0 + phi), 1e-12);
  EXPECT_NEAR(d.F(0, 0), 2.0 * phi, 1e-12);
  EXPECT_NEAR(d.Y(0, 0), 5.2360679, 1e-7);
  EXPECT_NEAR(d.F(0, 0), 3.2360679, 1e-7);
}

TEST(MpcTest, ZeroDynamicsHasNoCrossTerm) {
  ProblemInstance inst = Example1Instance();
  inst.system.A.setZero();
  const MpqpData d = Condense(inst.system, inst.state_set, inst.input_set, inst.system.Q, 1);
  EXPECT_EQ(d.F.norm(), 0.0);
}

TEST(MpcTest, Example3Dimensions) {
  const ProblemInstance inst = Example3Instance();
  const MpqpData d = Condense(inst.system, inst.state_set, inst.input_set, SolveDare(inst.system).P, 6);
  EXPECT_EQ(d.H.rows(), 6);
  EXPECT_EQ(d.H.cols(), 6);
  EXPECT_EQ(d.G.rows(), 36);
  EXPECT_GT(MinEigenvalue(d.H), 1e-10);
}

TEST(MpcTest, CondensedCostAndConstraintsMatchStageWise) {
  for (const ProblemInstance& inst : {Example1Instance(), Example2Instance(), Example3Instance()}) {
    const int N = 7;
    const RiccatiSolution ric = SolveDare(inst.system);
    const MpqpData d = Condense(inst.system, inst.state_set, inst.input_set, ric.P, N);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> ux(-4.0, 4.0), uu(-3.0, 3.0);
    int feasible = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      Vector x(d.n), U(d.num_decisions());
      for (Index i = 0; i < x.size(); ++i) x[i] = ux(rng);
      for (Index i = 0; i < U.size(); ++i) U[i] = uu(rng) * (trial % 2 ? 0.2 : 1.0);
      const double stage = StageCost(inst.system, ric.P, x, U, N);
      const double condensed = 0.5 * x.dot(d.Y * x) + 0.5 * U.dot(d.H * U) + x.dot(d.F * U);
      EXPECT_LE(std::abs(stage - condensed), 1e-8 * std::max(1.0, std::abs(stage)));
      const bool cond_ok = d.G.rows() == 0 || (d.G * U - d.w - d.S * x).maxCoeff() <= 0.0;
      // Sign agreement away from the boundary.
      const double margin = d.G.rows() ? (d.G * U - d.w - d.S * x).cwiseAbs().minCoeff() : 1.0;
      if (margin > 1e-9) {
        EXPECT_EQ(cond_ok, StageFeasible(inst, x, U, N, 0.0));
      }
      feasible += cond_ok;
    }
    EXPECT_GT(feasible, 0);
  }
}

TEST(MpcTest, OriginGivesZero) {
  const Fixture f = Make(Example1Instance(), 10);
  const MpcSolution sol = SolveMpc(f.mpqp, Vector::Zero(2));
  EXPECT_EQ(sol.U.norm(), 0.0);
  EXPECT_EQ(sol.value, 0.0);
  EXPECT_EQ(ComputeValueGradient(f.mpqp, sol, Vector::Zero(2)).gradient.norm(), 0.0);
}

TEST(MpcTest, InsideLqrSetReproducesLqr) {
  for (const ProblemInstance& inst : {Example1Instance(), Example3Instance()}) {
    const Fixture f = Make(inst, 6);
    const Matrix Acl = inst.system.A - inst.system.B * f.ric.K;
    std::mt19937_64 rng(3);
    for (const Vector& x : SampleUniform(f.olqr, 50, rng)) {
      const Vector xs = 0.5 * x;  // deep inside
      const MpcSolution sol = SolveMpc(f.mpqp, xs);
      Vector xk = xs;
      for (int k = 0; k < f.mpqp.N; ++k) {
        EXPECT_LE((sol.U.segment(k * f.mpqp.m, f.mpqp.m) + f.ric.K * xk).cwiseAbs().maxCoeff(), 1e-7);
        xk = Acl * xk;
      }
      EXPECT_NEAR(sol.value, xs.dot(f.ric.P * xs), 1e-9 * (1.0 + sol.value));
      const ValueGradient g = ComputeValueGradient(f.mpqp, sol, xs);
      EXPECT_LE((g.gradient - 2.0 * f.ric.P * xs).norm(), 1e-6);
    }
  }
}

TEST(MpcTest, Example1GoldenValue) {
  const Fixture f = Make(Example1Instance(), 10);
  Vector x(2);
  x << 0.0, 2.0;
  const MpcSolution a = SolveMpc(f.mpqp, x);
  const MpcSolution b = SolveMpc(f.mpqp, x, &a);
  EXPECT_NEAR(a.value, b.value, 1e-9);
  EXPECT_NEAR(a.value, 0.5 * x.dot(f.mpqp.Y * x) + 0.5 * a.U.dot(f.mpqp.H * a.U) + x.dot(f.mpqp.F * a.U), 1e-9);
  // Regression baseline pinned from the first run.
  EXPECT_NEAR(a.value, kExample1GoldenValue, 1e-9);
}

TEST(MpcTest, SolutionInvariants) {
  const Fixture f = Make(Example3Instance(), 6);
  std::mt19937_64 rng(5);
  int solved = 0;
  for (const Vector& x : SampleUniform(f.inst.state_set, 300, rng)) {
    MpcSolution sol;
    try {
      sol = SolveMpc(f.mpqp, x);
    } catch (const InfeasibleError&) {
      continue;
    }
    ++solved;
    const QpProblem p = f.mpqp.QpAt(x);
    const KktReport k = CheckKkt(p, sol.U, sol.lambda);
    EXPECT_LE(k.complementarity, 1e-7);
    EXPECT_GE(sol.lambda.minCoeff(), 0.0);
    EXPECT_TRUE(StageFeasible(f.inst, x, sol.U, 6, 1e-8));
  }
  EXPECT_GT(solved, 50);
}

TEST(MpcTest, InfeasibleStateThrows) {
  const Fixture f = Make(Example3Instance(), 6);
  Vector x(2);
  x << 3.0, 3.0;
  EXPECT_THROW(SolveMpc(f.mpqp, x), InfeasibleError);
}

TEST(MpcTest, GradientMatchesFiniteDifferences) {
  for (const ProblemInstance& inst : {Example1Instance(), Example3Instance()}) {
    const Fixture f = Make(inst, inst.state_set.unconstrained() ? 10 : 6);
    std::mt19937_64 rng(11);
    int checked = 0;
    for (const Vector& x : SampleUniform(inst.region_of_interest, 200, rng)) {
      MpcSolution sol;
      try {
        sol = SolveMpc(f.mpqp, x);
      } catch (const InfeasibleError&) {
        continue;
      }
      const ValueGradient g = ComputeValueGradient(f.mpqp, sol, x);
      if (g.degenerate) continue;
      const double h = 1e-5;
      Vector fd(x.size());
      bool ok = true;
      for (Index i = 0; i < x.size() && ok; ++i) {
        Vector xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        try {
          fd[i] = (SolveMpc(f.mpqp, xp).value - SolveMpc(f.mpqp, xm).value) / (2.0 * h);
        } catch (const InfeasibleError&) {
          ok = false;
        }
      }
      if (!ok) continue;
      ++checked;
      EXPECT_LE((fd - g.gradient).norm(), 1e-4 * std::max(1.0, g.gradient.norm())) << x.transpose();
    }
    EXPECT_GT(checked, 40);
  }
}

TEST(MpcTest, RegionHessianEmptyAndPsd) {
  const Fixture f = Make(Example3Instance(), 6);
  EXPECT_EQ(RegionHessian(f.mpqp, {}, f.ric.P), f.ric.P);
  std::mt19937_64 rng(13);
  int checked = 0;
  for (const Vector& x : SampleUniform(f.inst.state_set, 300, rng)) {
    MpcSolution sol;
    try {
      sol = SolveMpc(f.mpqp, x);
    } catch (const InfeasibleError&) {
      continue;
    }
    if (sol.degenerate()) continue;
    const Matrix Pi = RegionHessian(f.mpqp, sol.active_set, f.ric.P);
    EXPECT_GE(MinEigenvalue(Pi - f.ric.P), -1e-10);
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

TEST(MpcTest, RegionHessianMatchesSecondDifferences) {
  // Inside a critical region J* is quadratic with Hessian 2·P_i.
  const Fixture f = Make(Example3Instance(), 6);
  std::mt19937_64 rng(17);
  int checked = 0;
  for (const Vector& x : SampleUniform(f.inst.state_set, 400, rng)) {
    MpcSolution sol;
    try {
      sol = SolveMpc(f.mpqp, x);
    } catch (const InfeasibleError&) {
      continue;
    }
    if (sol.degenerate() || sol.active_set.empty()) continue;
    const double h = 1e-4;
    Matrix hess(2, 2);
    bool same_region = true;
    auto value = [&](const Vector& y) {
      const MpcSolution s = SolveMpc(f.mpqp, y);
      if (s.active_set != sol.active_set) same_region = false;
      return s.value;
    };
    try {
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          Vector ei = Vector::Zero(2), ej = Vector::Zero(2);
          ei[i] = h;
          ej[j] = h;
          hess(i, j) = (value(x + ei + ej) - value(x + ei - ej) - value(x - ei + ej) + value(x - ei - ej)) / (4 * h * h);
        }
      }
    } catch (const InfeasibleError&) {
      continue;
    }
    if (!same_region) continue;
    ++checked;
    const Matrix Pi = RegionHessian(f.mpqp, sol.active_set, f.ric.P);
    EXPECT_LE((hess - 2.0 * Pi).norm(), 1e-3 * (1.0 + Pi.norm())) << x.transpose();
  }
  EXPECT_GT(checked, 10);
}

// Equivalence with the infinite-horizon problem once the terminal state is in O_∞^LQR.
void CheckEquivalence(const ProblemInstance& inst, int N) {
  const Fixture f = Make(inst, N);
  const MpqpData longer = Condense(inst.system, inst.state_set, inst.input_set, f.ric.P, N + 5);
  std::mt19937_64 rng(19);
  int checked = 0;
  for (int round = 0; round < 50 && checked < 50; ++round) {
    for (const Vector& x : SampleUniform(inst.region_of_interest, 50, rng)) {
      if (checked >= 50) break;
      MpcSolution sol;
      try {
        sol = SolveMpc(f.mpqp, x);
      } catch (const InfeasibleError&) {
        continue;
      }
      if (!Contains(f.olqr, f.mpqp.Predict(x, sol.U).back())) continue;
      const MpcSolution lsol = SolveMpc(longer, x);
      EXPECT_LE(std::abs(sol.value - lsol.value), 1e-6 * sol.value) << x.transpose();
      ++checked;
    }
  }
  EXPECT_EQ(checked, 50);
}

TEST(MpcTest, HorizonEquivalenceExample1) { CheckEquivalence(Example1Instance(), 10); }
TEST(MpcTest, HorizonEquivalenceExample3) { CheckEquivalence(Example3Instance(), 6); }

TEST(MpcTest, PrincipleOfOptimalityAlongClosedLoop) {
  const Fixture f = Make(Example1Instance(), 10);
  Vector x(2);
  x << 3.0, -3.0;
  MpcSolution sol = SolveMpc(f.mpqp, x);
  for (int t = 0; t < 30; ++t) {
    const Vector u = sol.FirstInput(2);
    const Vector next = f.inst.system.A * x + f.inst.system.B * u;
    const MpcSolution warm = ShiftForWarmStart(f.mpqp, sol);
    const MpcSolution nsol = SolveMpc(f.mpqp, next, &warm);
    const double stage = x.dot(x) + 0.1 * u.dot(u);
    EXPECT_LE(std::abs(nsol.value - (sol.value - stage)), 1e-6 * std::max(sol.value, 1e-6)) << t;
    x = next;
    sol = nsol;
  }
}

TEST(MpcTest, ChooseHorizonTrivialAndExample1) {
  const ProblemInstance inst = Example1Instance();
  const RiccatiSolution ric = SolveDare(inst.system);
  const Polyhedron olqr = LqrInvariantSet(inst, ric).set;
  EXPECT_EQ(ChooseHorizon(inst, ric, olqr, {Vector::Zero(2)}, 5), 1);
  const int N = ChooseHorizon(inst, ric, olqr, Vertices2d(inst.region_of_interest), 30);
  EXPECT_LE(N, 10);
  EXPECT_THROW(ChooseHorizon(inst, ric, olqr, Vertices2d(inst.region_of_interest), 1), ConvergenceError);
}

TEST(MpcTest, ActiveSetIdFormat) {
  EXPECT_EQ(ActiveSetId({}), "-");
  EXPECT_EQ(ActiveSetId({0, 4, 7}), "0.4.7");
}

// Single integrator x⁺ = x + u with |u|∞ ≤ 1: the N-step set to the unit box is the box of radius N + 1.
MpqpData IntegratorMpqp(int N) {
  const LtiSystem s{Matrix::Identity(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  return Condense(s, Polyhedron::InfinityBall(2, 10.0), Polyhedron::InfinityBall(2, 1.0), Matrix::Identity(2, 2), N);
}

TEST(MpcTest, ReachableInIntegratorBox) {
  const MpqpData d = IntegratorMpqp(3);
  const Polyhedron target = Polyhedron::InfinityBall(2, 1.0);
  EXPECT_TRUE(ReachableIn(d, target, (Vector(2) << 4.0, -4.0).finished()));
  EXPECT_TRUE(ReachableIn(d, target, (Vector(2) << 0.0, 3.9).finished()));
  EXPECT_FALSE(ReachableIn(d, target, (Vector(2) << 4.01, 0.0).finished()));
  EXPECT_FALSE(ReachableIn(d, target, (Vector(2) << -2.0, -4.5).finished()));
}

TEST(MpcTest, ControllableSetIntegratorBox) {
  const Polyhedron K = ControllableSet2d(IntegratorMpqp(3), Polyhedron::InfinityBall(2, 1.0),
                                         Polyhedron::InfinityBall(2, 10.0), 72);
  const double r = 4.0 * (1.0 - 1e-6);
  for (int k = 0; k < 16; ++k) {
    const double t = 2.0 * M_PI * k / 16;
    const Vector c = (Vector(2) << std::cos(t), std::sin(t)).finished();
    EXPECT_NEAR(Support(K, c), r * c.lpNorm<1>(), 1e-6);
  }
}

TEST(MpcTest, ControllableSetClippedByX0) {
  const Polyhedron K = ControllableSet2d(IntegratorMpqp(3), Polyhedron::InfinityBall(2, 1.0),
                                         Polyhedron::InfinityBall(2, 2.5), 72);
  EXPECT_NEAR(Support(K, Vector::Unit(2, 0)), 2.5 * (1.0 - 1e-6), 1e-6);
}

TEST(MpcTest, ControllableSetExample3IsReachableAndControlInvariant) {
  const Fixture f = Make(Example3Instance(), 20);
  const Polyhedron K = ControllableSet2d(f.mpqp, f.olqr, f.inst.state_set, 360);
  const LtiSystem& s = f.inst.system;
  for (const Vector& v : Vertices2d(K)) {
    EXPECT_TRUE(ReachableIn(f.mpqp, f.olqr, v));
    const Vector out = 1.001 * v;
    EXPECT_FALSE(ReachableIn(f.mpqp, f.olqr, out) && Contains(f.inst.state_set, out));
    // Some admissible u keeps Av + Bu inside K.
    const Matrix G = (Matrix(f.inst.input_set.num_rows() + K.num_rows(), s.m())
                          << f.inst.input_set.H, K.H * s.B).finished();
    const Vector h = (Vector(G.rows()) << f.inst.input_set.h, K.h - K.H * s.A * v).finished();
    EXPECT_TRUE(SolveLp(Vector::Zero(s.m()), G, h).optimal());
  }
}

}  // namespace
}  // namespace clqr
