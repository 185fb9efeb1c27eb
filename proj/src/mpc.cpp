#include "clqr/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "clqr/polytope.hpp"

namespace clqr {

namespace {

constexpr double kSlackTol = 1e-7;
constexpr double kMultiplierTol = 1e-8;

Matrix Rows(const Matrix& M, const std::vector<int>& rows) {
  Matrix out(static_cast<Index>(rows.size()), M.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = M.row(rows[i]);
  return out;
}

}  // namespace

QpProblem MpqpData::QpAt(const Vector& x) const { return {H, F.transpose() * x, G, w + S * x}; }

std::vector<Vector> MpqpData::Predict(const Vector& x, const Vector& U) const {
  const Vector stacked = Sx * x + Su * U;
  std::vector<Vector> states{x};
  for (int k = 0; k < N; ++k) states.push_back(stacked.segment(k * n, n));
  return states;
}

MpqpData Condense(const LtiSystem& sys, const Polyhedron& state_set, const Polyhedron& input_set,
                  const Matrix& Pstar, int N) {
  sys.CheckDimensions();
  if (N < 1) throw ConfigError("horizon must be at least 1");
  if (state_set.dim() != sys.n() || input_set.dim() != sys.m()) throw ConfigError("condense: set dimensions");
  const Index n = sys.n();
  const Index m = sys.m();
  MpqpData d;
  d.N = N;
  d.n = n;
  d.m = m;
  d.terminal_weight = Pstar;

  d.Sx.resize(N * n, n);
  d.Su = Matrix::Zero(N * n, N * m);
  std::vector<Matrix> powers{Matrix::Identity(n, n)};  // A⁰ … A^N
  for (int k = 1; k <= N; ++k) powers.push_back(sys.A * powers.back());
  for (int k = 0; k < N; ++k) {
    d.Sx.middleRows(k * n, n) = powers[static_cast<size_t>(k + 1)];
    for (int j = 0; j <= k; ++j) d.Su.block(k * n, j * m, n, m) = powers[static_cast<size_t>(k - j)] * sys.B;
  }

  Matrix Qbar = Matrix::Zero(N * n, N * n);
  for (int k = 0; k < N - 1; ++k) Qbar.block(k * n, k * n, n, n) = sys.Q;
  Qbar.block((N - 1) * n, (N - 1) * n, n, n) = Pstar;
  Matrix Rbar = Matrix::Zero(N * m, N * m);
  for (int k = 0; k < N; ++k) Rbar.block(k * m, k * m, m, m) = sys.R;

  d.H = Symmetrized(2.0 * (d.Su.transpose() * Qbar * d.Su + Rbar));
  d.F = 2.0 * d.Sx.transpose() * Qbar * d.Su;
  d.Y = Symmetrized(2.0 * (sys.Q + d.Sx.transpose() * Qbar * d.Sx));

  const Index cu = input_set.num_rows();
  const Index cx = state_set.num_rows();
  const Index c = N * (cu + cx);
  d.G = Matrix::Zero(c, N * m);
  d.w.resize(c);
  d.S = Matrix::Zero(c, n);
  Index row = 0;
  for (int k = 0; k < N; ++k) {
    d.G.block(row, k * m, cu, m) = input_set.H;
    d.w.segment(row, cu) = input_set.h;
    for (Index i = 0; i < cu; ++i) {
      d.row_stage.push_back(k);
      d.row_is_input.push_back(1);
    }
    row += cu;
    d.G.middleRows(row, cx) = state_set.H * d.Su.middleRows(k * n, n);
    d.w.segment(row, cx) = state_set.h;
    d.S.middleRows(row, cx) = -state_set.H * powers[static_cast<size_t>(k + 1)];
    for (Index i = 0; i < cx; ++i) {
      d.row_stage.push_back(k);
      d.row_is_input.push_back(0);
    }
    row += cx;
  }
  return d;
}

MpcSolution SolveMpc(const MpqpData& mpqp, const Vector& x, const MpcSolution* warm, ActiveSetSolver* solver) {
  if (x.size() != mpqp.n) throw ConfigError("MPC: state dimension mismatch");
  ActiveSetSolver local;
  ActiveSetSolver& s = solver ? *solver : local;
  const QpProblem prob = mpqp.QpAt(x);
  QpWarmStart ws;
  if (warm != nullptr && warm->U.size() == mpqp.num_decisions()) {
    ws.x = warm->U;
    ws.active = warm->working_set;
  }
  const std::int64_t before = s.flops();
  const QpResult res = s.Solve(prob, warm ? &ws : nullptr);
  if (res.status == QpStatus::kInfeasible) throw InfeasibleError("MPC problem infeasible at the given state");
  if (!res.optimal()) throw ConvergenceError("MPC QP ended with status " + ToString(res.status));

  MpcSolution sol;
  sol.U = res.x;
  sol.lambda = res.lambda;
  sol.working_set = res.working_set;
  sol.iterations = res.iterations;
  sol.flops = s.flops() - before;
  sol.value = 0.5 * x.dot(mpqp.Y * x) + 0.5 * res.x.dot(mpqp.H * res.x) + x.dot(mpqp.F * res.x);
  const Vector slack = prob.h - prob.G * res.x;
  for (Index i = 0; i < slack.size(); ++i) {
    if (slack[i] > kSlackTol) continue;
    (res.lambda[i] > kMultiplierTol ? sol.active_set : sol.weakly_active).push_back(static_cast<int>(i));
  }
  return sol;
}

MpcSolution ShiftForWarmStart(const MpqpData& mpqp, const MpcSolution& sol) {
  MpcSolution out;
  const Index m = mpqp.m;
  out.U = Vector::Zero(mpqp.num_decisions());
  out.U.head((mpqp.N - 1) * m) = sol.U.tail((mpqp.N - 1) * m);
  const int per_stage = mpqp.N > 0 ? static_cast<int>(mpqp.num_constraints() / mpqp.N) : 0;
  for (int r : sol.working_set) {
    if (mpqp.row_stage[static_cast<size_t>(r)] > 0) out.working_set.push_back(r - per_stage);
  }
  return out;
}

InvariantSetResult LqrInvariantSet(const ProblemInstance& instance, const RiccatiSolution& ric) {
  const LtiSystem& sys = instance.system;
  return MaxPositivelyInvariant(sys.A - sys.B * ric.K, AdmissibleSet(instance.state_set, instance.input_set, ric.K));
}

int ChooseHorizon(const ProblemInstance& instance, const RiccatiSolution& ric, const Polyhedron& olqr,
                  const std::vector<Vector>& test_states, int n_max) {
  for (int N = 1; N <= n_max; ++N) {
    const MpqpData mpqp = Condense(instance.system, instance.state_set, instance.input_set, ric.P, N);
    bool ok = true;
    for (const Vector& x : test_states) {
      try {
        const MpcSolution sol = SolveMpc(mpqp, x);
        if (!Contains(olqr, mpqp.Predict(x, sol.U).back(), 1e-9)) ok = false;
      } catch (const InfeasibleError&) {
        ok = false;
      }
      if (!ok) break;
    }
    if (ok) return N;
  }
  throw ConvergenceError("no horizon up to " + std::to_string(n_max) +
                         " brings every test state into the LQR invariant set; raise the limit or shrink X0");
}

ValueGradient ComputeValueGradient(const MpqpData& mpqp, const MpcSolution& sol, const Vector& x) {
  ValueGradient g;
  g.gradient = mpqp.Y * x + mpqp.F * sol.U;
  if (mpqp.num_constraints() > 0) g.gradient -= mpqp.S.transpose() * sol.lambda;
  g.degenerate = sol.degenerate();
  if (!sol.active_set.empty()) {
    const Matrix GA = Rows(mpqp.G, sol.active_set);
    Eigen::FullPivLU<Matrix> lu(GA);
    lu.setThreshold(1e-10);
    if (lu.rank() < GA.rows()) g.degenerate = true;
  }
  return g;
}

Matrix RegionHessian(const MpqpData& mpqp, const std::vector<int>& active, const Matrix& Pstar) {
  if (active.empty()) return Pstar;
  const Matrix GA = Rows(mpqp.G, active);
  const Matrix SA = Rows(mpqp.S, active);
  Eigen::LLT<Matrix> hllt(mpqp.H);
  const Matrix hinv_gt = hllt.solve(GA.transpose());
  const Matrix gamma = Symmetrized(GA * hinv_gt);
  Eigen::LDLT<Matrix> gldlt(gamma);
  const double scale = std::max(1.0, gamma.cwiseAbs().maxCoeff());
  if (gldlt.info() != Eigen::Success || gldlt.vectorD().minCoeff() <= 1e-12 * scale) {
    throw DegeneracyError("active constraint rows are linearly dependent (Γ singular)");
  }
  const Matrix s_tilde = SA + hinv_gt.transpose() * mpqp.F.transpose();
  return Symmetrized(Pstar + 0.5 * s_tilde.transpose() * gldlt.solve(s_tilde));
}

std::string ActiveSetId(const std::vector<int>& active) {
  if (active.empty()) return "-";
  std::ostringstream os;
  for (size_t i = 0; i < active.size(); ++i) os << (i ? "." : "") << active[i];
  return os.str();
}

bool ReachableIn(const MpqpData& mpqp, const Polyhedron& target, const Vector& x, ActiveSetSolver* solver) {
  const Index nt = target.num_rows();
  const Index c = mpqp.num_constraints();
  const Index tail = (mpqp.N - 1) * mpqp.n;
  Matrix G(c + nt, mpqp.num_decisions());
  Vector h(c + nt);
  G.topRows(c) = mpqp.G;
  h.head(c) = mpqp.w + mpqp.S * x;
  G.bottomRows(nt) = target.H * mpqp.Su.bottomRows(mpqp.n);
  h.tail(nt) = target.h - target.H * (mpqp.Sx.middleRows(tail, mpqp.n) * x);
  const QpResult r = SolveLp(Vector::Zero(mpqp.num_decisions()), G, h, solver);
  return r.status == QpStatus::kOptimal;
}

// Relative inward scaling of the polygon. Scaling a controllable set of a system with
// origin-centred constraints keeps it control invariant, and vertices solved to LP accuracy
// become strictly feasible.
constexpr double kReachMargin = 1e-6;

Polyhedron ControllableSet2d(const MpqpData& mpqp, const Polyhedron& target, const Polyhedron& X0, int directions) {
  if (mpqp.n != 2) throw ConfigError("controllable-set polygon needs a 2-D state");
  // Joint variables z = (x, U): max cᵀx over the lifted polytope returns its vertices.
  const Index n = mpqp.n;
  const Index d = mpqp.num_decisions();
  const Index c = mpqp.num_constraints();
  const Index nt = target.num_rows();
  const Index n0 = X0.num_rows();
  const Index tail = (mpqp.N - 1) * n;
  Matrix G = Matrix::Zero(c + nt + n0, n + d);
  Vector h(c + nt + n0);
  G.block(0, 0, c, n) = -mpqp.S;
  G.block(0, n, c, d) = mpqp.G;
  h.head(c) = mpqp.w;
  G.block(c, 0, nt, n) = target.H * mpqp.Sx.middleRows(tail, n);
  G.block(c, n, nt, d) = target.H * mpqp.Su.bottomRows(n);
  h.segment(c, nt) = target.h;
  G.block(c + nt, 0, n0, n) = X0.H;
  h.tail(n0) = X0.h;
  ActiveSetSolver solver;
  std::vector<Vector> points;
  for (int k = 0; k < directions; ++k) {
    const double t = 2.0 * M_PI * k / directions;
    Vector q = Vector::Zero(n + d);
    q[0] = -std::cos(t);
    q[1] = -std::sin(t);
    const QpResult r = SolveLp(q, G, h, &solver);
    if (r.status == QpStatus::kInfeasible) throw InfeasibleError("no state reaches the target set");
    if (r.status == QpStatus::kUnbounded) throw ConfigError("X0 must be bounded");
    if (!r.optimal()) throw ConvergenceError("controllable-set LP ended with status " + ToString(r.status));
    points.push_back(r.x.head(n));
  }
  Polyhedron hull = PolygonToPolyhedron(ConvexHull2d(points));
  hull.h *= 1.0 - kReachMargin;
  return hull;
}

}  // namespace clqr
