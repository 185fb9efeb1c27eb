#include "clqr/certifier.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "clqr/polytope.hpp"
#include "clqr/presets.hpp"
#include "clqr/riccati.hpp"

namespace clqr {
namespace {

// Example 1 dynamics with inputs loose enough that no constraint is ever active on ±1.
ProblemInstance ToyInstance() {
  ProblemInstance inst = Example1Instance();
  inst.input_set = Polyhedron::InfinityBall(2, 100.0);
  inst.region_of_interest = Polyhedron::InfinityBall(2, 1.0);
  return inst;
}

PwqNetwork QuadraticNet(const Matrix& P, Index M, double bias, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  PwqNetwork net;
  net.Pstar = P;
  net.W.resize(M, P.rows());
  for (Index i = 0; i < net.W.size(); ++i) net.W.data()[i] = gauss(rng);
  net.b = Vector::Constant(M, bias);
  net.r = Vector::Zero(M);
  return net;
}

TrainingSet QuadraticData(const Matrix& P, double spacing, double half) {
  TrainingSet d;
  d.n = P.rows();
  for (double a : GridAxis(-half, half, spacing)) {
    for (double b : GridAxis(-half, half, spacing)) {
      const Vector x = (Vector(2) << a, b).finished();
      d.Add(x, x.dot(P * x), Vector(2.0 * P * x), SampleSource::kGrid, -1, 0.0, "-");
    }
  }
  return d;
}

TEST(CertifierTest, PerfectNetHasZeroError) {
  const Matrix P = SolveDare(ToyInstance().system).P;
  const ErrorStats s = EmpiricalErrors(QuadraticNet(P, 5, -0.2, 1), QuadraticData(P, 0.25, 1.0));
  EXPECT_LE(s.e_bar, 1e-14);
  EXPECT_LE(s.e_grad_bar, 1e-13);
  EXPECT_EQ(s.excluded, 1);  // the origin
  EXPECT_EQ(s.missing_gradients, 0);
}

TEST(CertifierTest, ScaledNetErrorsByHand) {
  const Matrix P = SolveDare(ToyInstance().system).P;
  const TrainingSet d = QuadraticData(P, 0.25, 1.0);
  const ErrorStats s = EmpiricalErrors(QuadraticNet(1.1 * P, 5, -1e3, 1), d);
  EXPECT_NEAR(s.e_bar, 0.1, 1e-12);
  double eg = 0.0;
  for (size_t i = 0; i < d.size(); ++i) {
    const Vector& x = d.states[i];
    if (d.values[i] == 0.0) continue;
    eg = std::max(eg, 0.2 * (P * x).norm() / x.dot(P * x));
    EXPECT_NEAR(s.per_sample[i].beta, 2.0 * (P * x).norm() / x.dot(P * x), 1e-12 * s.per_sample[i].beta);
  }
  EXPECT_NEAR(s.e_grad_bar, eg, 1e-12 * eg);
}

TEST(CertifierTest, OriginOnlyDataCannotCertify) {
  TrainingSet d;
  d.n = 2;
  d.Add(Vector::Zero(2), 0.0, Vector(Vector::Zero(2)), SampleSource::kGrid, -1, 0.0, "-");
  EXPECT_THROW(EmpiricalErrors(QuadraticNet(Matrix::Identity(2, 2), 3, -1.0, 1), d), ValidationError);
}

struct Toy {
  ProblemInstance inst = ToyInstance();
  RiccatiSolution ric = SolveDare(inst.system);
  MpqpData mpqp = Condense(inst.system, inst.state_set, inst.input_set, ric.P, 2);
};

TEST(CertifierTest, PerfectNetCertifies) {
  const Toy toy;
  GridOptions g;
  g.spacing = 0.1;
  g.gradients = true;
  const TrainingSet data = GenerateGrid(toy.mpqp, toy.inst.region_of_interest, g);
  for (const std::string& a : data.active_sets) ASSERT_EQ(a, "-");
  CertifyOptions opt;
  opt.probes.spacing = 0.025;
  const CertificationReport rep = Certify(QuadraticNet(toy.ric.P, 5, -1e3, 2), data, toy.inst, toy.mpqp, opt);
  EXPECT_LE(rep.zeta, 1e-6);
  EXPECT_TRUE(rep.pass);
  EXPECT_TRUE(rep.coverage_clean);
  EXPECT_EQ(rep.augmented, 0);
}

TEST(CertifierTest, ZetaShrinksWithDenserSamplesForExactNet) {
  // Units active away from the origin: regions are not exact, but the errors are zero, so ζ is
  // driven by d alone and falls as the data get denser.
  const Toy toy;
  const PwqNetwork net = QuadraticNet(toy.ric.P, 4, -0.3, 3);
  double last = std::numeric_limits<double>::infinity();
  for (double spacing : {0.2, 0.1, 0.05}) {
    GridOptions g;
    g.spacing = spacing;
    g.gradients = true;
    const TrainingSet data = GenerateGrid(toy.mpqp, toy.inst.region_of_interest, g);
    ProbeOptions p;
    p.spacing = spacing / 4;
    const ZetaResult z = ZetaBound(net, data, toy.mpqp, toy.inst.region_of_interest, p);
    EXPECT_GE(z.zeta, z.errors.e_bar);
    EXPECT_LT(z.zeta, last);
    last = z.zeta;
  }
}

TEST(CertifierTest, ForcedUnitZetaFails) {
  const Toy toy;
  GridOptions g;
  g.spacing = 0.1;
  g.gradients = true;
  const TrainingSet data = GenerateGrid(toy.mpqp, toy.inst.region_of_interest, g);
  CertifyOptions opt;
  opt.probes.spacing = 0.025;
  const CertificationReport rep = Certify(QuadraticNet(2.0 * toy.ric.P, 5, -1e3, 2), data, toy.inst, toy.mpqp, opt);
  EXPECT_NEAR(rep.zeta, 1.0, 1e-12);
  EXPECT_LE(rep.condition_lhs, 1e-12);
  EXPECT_FALSE(rep.pass);
}

TEST(CertifierTest, SparseSamplesAreReported) {
  const Toy toy;
  TrainingSet data;
  data.n = 2;
  const Vector x = (Vector(2) << 1.0, 1.0).finished();
  const MpcSolution sol = SolveMpc(toy.mpqp, x);
  data.Add(x, sol.value, ComputeValueGradient(toy.mpqp, sol, x).gradient, SampleSource::kGrid, -1, 0.0, "-");
  ProbeOptions p;
  p.spacing = 0.05;
  p.augment = false;
  try {
    ZetaBound(QuadraticNet(toy.ric.P, 4, -0.01, 3), data, toy.mpqp, toy.inst.region_of_interest, p);
    FAIL() << "expected a sparsity error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("samples too sparse"), std::string::npos);
  }
}

TEST(CertifierTest, HeldOutErrorsWithinZeta) {
  // A deliberately imperfect network on Example 3: residual units with fixed weights.
  const ProblemInstance inst = Example3Instance();
  const RiccatiSolution ric = SolveDare(inst.system);
  const Polyhedron olqr = LqrInvariantSet(inst, ric).set;
  const MpqpData mpqp = Condense(inst.system, inst.state_set, inst.input_set, ric.P, 6);
  GridOptions g;
  g.spacing = 0.1;
  g.terminal_set = olqr;
  g.gradients = true;
  const TrainingSet data = GenerateGrid(mpqp, inst.state_set, g);
  PwqNetwork net;
  net.Pstar = ric.P;
  net.W = (Matrix(4, 2) << 1, 1, -1, -1, 1, 2, -1, -2).finished();
  net.b = Vector::Constant(4, -1.0);
  net.r = Vector::Constant(4, 0.8);
  ProbeOptions p;
  p.spacing = 0.025;
  p.terminal_set = olqr;
  const ZetaResult z = ZetaBound(net, data, mpqp, inst.state_set, p);
  EXPECT_GE(z.zeta, z.errors.e_bar);
  EXPECT_GT(z.errors.e_bar, 0.01);
  ASSERT_EQ(z.uncovered, 0);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(-3.0, 3.0);
  int held = 0;
  while (held < 1000) {
    const Vector x = (Vector(2) << unit(rng), unit(rng)).finished();
    MpcSolution sol;
    try {
      sol = SolveMpc(mpqp, x);
    } catch (const InfeasibleError&) {
      continue;
    }
    if (!Contains(olqr, mpqp.Predict(x, sol.U).back()) || sol.value <= kNearOriginValue) continue;
    ++held;
    EXPECT_LE(std::abs(Evaluate(net, x) / sol.value - 1.0), z.zeta) << "x = " << x.transpose();
  }
}

TEST(CertifierTest, ConditionRhsMatchesGeneralizedEigenvalue) {
  Matrix P(2, 2);
  P << 2.0, 0.6, 0.6, 1.0;
  Matrix Q(2, 2);
  Q << 1.0, 0.0, 0.0, 4.0;
  const PwqNetwork net = QuadraticNet(P, 3, -1e3, 5);
  const Eigen::SelfAdjointEigenSolver<Matrix> es(Q);
  const Matrix qih = es.operatorInverseSqrt();
  const double oracle = 2.0 * MaxEigenvalue(Symmetrized(qih * P * qih));
  const Polyhedron box = Polyhedron::InfinityBall(2, 3.0);
  EXPECT_NEAR(ConditionRhs(net, Q, box, std::nullopt), oracle, 1e-8 * oracle);
  EXPECT_NEAR(ConditionRhs(net, Q, box, 5.0), oracle, 1e-8 * oracle);
}

TEST(CertifierTest, ConditionRhsAtLeastSampledRatio) {
  Matrix P = Matrix::Identity(2, 2);
  PwqNetwork net = QuadraticNet(P, 4, -0.5, 6);
  net.r = Vector::Constant(4, 1.5);
  const Polyhedron box = Polyhedron::InfinityBall(2, 2.0);
  const double rhs = ConditionRhs(net, Matrix::Identity(2, 2), box, std::nullopt);
  std::mt19937_64 rng(2);
  for (const Vector& x : SampleUniform(box, 2000, rng)) {
    if (x.norm() < 1e-3) continue;
    EXPECT_LE(2.0 * Evaluate(net, x) / x.squaredNorm(), rhs + 1e-9);
  }
}

TEST(CertifierTest, SublevelThresholdFacetOracle) {
  Matrix P(2, 2);
  P << 2.0, 0.6, 0.6, 1.0;
  const PwqNetwork net = QuadraticNet(P, 3, -1e3, 7);
  const double c = 1.5;
  const Polyhedron box = Polyhedron::InfinityBall(2, c);
  // Closed form on facet x_k = ±c: c²/(P⁻¹)_kk when the minimizer stays on the facet.
  const Matrix Pinv = P.inverse();
  double closed = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < 2; ++k) {
    const Index o = 1 - k;
    const double other = -P(o, k) / P(o, o) * c;
    ASSERT_LE(std::abs(other), c);
    closed = std::min(closed, c * c / Pinv(k, k));
  }
  // 1-D scan along every facet.
  double scan = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 40000; ++k) {
    const double s = -c + 2.0 * c * k / 40000.0;
    for (const Vector& x : {Vector((Vector(2) << c, s).finished()), Vector((Vector(2) << s, c).finished())}) {
      scan = std::min(scan, x.dot(P * x));
    }
  }
  const double chi = SublevelThreshold(net, box, 500, 3);
  EXPECT_NEAR(chi, closed, 1e-8 * closed);
  EXPECT_NEAR(scan, closed, 1e-6 * closed);
  std::mt19937_64 rng(9);
  for (int k = 0; k < 1000; ++k) {
    const double s = std::uniform_real_distribution<double>(-c, c)(rng);
    EXPECT_LE(chi, Evaluate(net, (Vector(2) << -c, s).finished()) + 1e-12);
  }
  EXPECT_EQ(AuditSublevelSet(net, box, chi, 10000, 4), 0);
}

TEST(CertifierTest, ReportSerializes) {
  const Toy toy;
  GridOptions g;
  g.spacing = 0.25;
  g.gradients = true;
  const TrainingSet data = GenerateGrid(toy.mpqp, toy.inst.region_of_interest, g);
  CertifyOptions opt;
  opt.mode = CertifyMode::kCorollary10;
  opt.probes.spacing = 0.0625;
  const CertificationReport rep = Certify(QuadraticNet(toy.ric.P, 5, -1e3, 2), data, toy.inst, toy.mpqp, opt);
  ASSERT_TRUE(rep.chi.has_value());
  const nlohmann::json j = ToJson(rep);
  EXPECT_EQ(j.at("mode"), "corollary10");
  EXPECT_EQ(j.at("pass"), rep.pass);
  EXPECT_TRUE(j.at("regions").is_array());
  EXPECT_NE(ToText(rep).find("verdict"), std::string::npos);
  EXPECT_EQ(CertifyModeFromString("theorem9"), CertifyMode::kTheorem9);
  EXPECT_THROW(CertifyModeFromString("lemma"), ConfigError);
}

}  // namespace
}  // namespace clqr
