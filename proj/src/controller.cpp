#include "clqr/controller.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace clqr {

namespace {

constexpr double kFeasibilityTol = 1e-9;

struct Workspace {
  ActiveSetSolver local;
  ActiveSetSolver& solver;
  std::int64_t start_flops;

  explicit Workspace(ActiveSetSolver* s) : solver(s ? *s : local), start_flops(solver.flops()) {}
  std::int64_t used() const { return solver.flops() - start_flops; }
};

ActivationPattern PatternAt(const OneStepProblem& prob, const Vector& u) {
  return Pattern(prob.net, prob.system.A * prob.x + prob.system.B * u);
}

QpResult SolvePattern(const QhatCoefficients& c, const Matrix& G, const Vector& h, ActiveSetSolver& solver,
                      const QpWarmStart* warm, int& solves) {
  ++solves;
  return solver.Solve({2.0 * c.P, c.q, G, h}, warm);
}

// Region of a pattern as linear inequalities in u.
void RegionRows(const OneStepProblem& prob, const ActivationPattern& pattern, Matrix& G, Vector& h) {
  const PwqNetwork& net = prob.net;
  const Matrix WB = net.W * prob.system.B;
  const Vector offset = net.W * (prob.system.A * prob.x) + net.b;
  G = WB;
  h = -offset;
  for (int i : pattern) {
    G.row(i) = -WB.row(i);
    h[i] = offset[i];
  }
}

ActivationPattern PatternFromMask(std::uint64_t mask, Index M) {
  ActivationPattern p;
  for (Index i = 0; i < M; ++i) {
    if (mask & (std::uint64_t{1} << i)) p.push_back(static_cast<int>(i));
  }
  return p;
}

bool Feasible(const QpProblem& feas, const Vector& u) {
  return feas.num_constraints() == 0 || (feas.G * u - feas.h).maxCoeff() <= kFeasibilityTol;
}

}  // namespace

QpProblem OneStepProblem::FeasibleSet() const {
  const Index m = system.m();
  const Index cu = input_set.num_rows();
  const Index cc = successor_set ? successor_set->num_rows() : 0;
  QpProblem p{Matrix::Zero(m, m), Vector::Zero(m), Matrix(cu + cc, m), Vector(cu + cc)};
  p.G.topRows(cu) = input_set.H;
  p.h.head(cu) = input_set.h;
  if (cc > 0) {
    p.G.bottomRows(cc) = successor_set->H * system.B;
    p.h.tail(cc) = successor_set->h - successor_set->H * (system.A * x);
  }
  return p;
}

double OneStepProblem::Qhat(const Vector& u) const {
  return x.dot(system.Q * x) + u.dot(system.R * u) + Evaluate(net, system.A * x + system.B * u);
}

QhatCoefficients ComputeQhatCoefficients(const PwqNetwork& net, const LtiSystem& system, const Vector& x,
                                         const ActivationPattern& pattern) {
  const RegionQuadratic rq = RegionCoefficients(net, pattern);
  const Vector ax = system.A * x;
  QhatCoefficients c;
  c.P = Symmetrized(system.R + system.B.transpose() * rq.P * system.B);
  c.q = 2.0 * system.B.transpose() * (rq.P * ax) + system.B.transpose() * rq.q;
  c.v = x.dot(system.Q * x) + rq(ax);
  return c;
}

std::string ToString(Algorithm a) { return a == Algorithm::kPcp ? "pcp" : "decomp"; }

Algorithm AlgorithmFromString(const std::string& s) {
  if (s == "pcp") return Algorithm::kPcp;
  if (s == "decomp" || s == "decomposition") return Algorithm::kDecomposition;
  throw ConfigError("unknown algorithm '" + s + "' (expected pcp or decomp)");
}

std::int64_t ActivationFlops(Index M, Index n, Index m) {
  return M * (2 * n * n + n + m * m + 5 * m + 2 * m * n + 2) + 2 * m * n + m * (m + 3) / 2;
}

StepResult SolveDecomposition(const OneStepProblem& prob, const Vector& warm, const SolverOptions& options,
                              ActiveSetSolver* solver) {
  Workspace ws(solver);
  const QpProblem feas = prob.FeasibleSet();
  const Index M = prob.net.width();
  const std::int64_t per_iter = ActivationFlops(M, prob.system.n(), prob.system.m()) + M;
  StepResult res;
  res.algorithm = Algorithm::kDecomposition;

  std::set<ActivationPattern> seen;
  std::optional<ActivationPattern> used;  // pattern that produced u
  Vector u = warm;
  Vector u_prev = warm;
  QpWarmStart qp_warm;
  const long long cap = 10LL << std::min<Index>(M, 20);
  for (long long s = 1; s <= cap; ++s) {
    ActivationPattern pat = PatternAt(prob, u);
    ++res.iterations;
    if (used && pat == *used) {
      res.u = u;
      res.qp_flops = ws.used();
      res.flops = res.iterations * per_iter + res.qp_flops;
      return res;
    }
    if (seen.count(pat)) {
      ++res.cycles;
      if (options.switch_to_pcp_on_cycle) {
        StepResult pcp = SolvePcp(prob, u, options, &ws.solver);
        pcp.iterations += res.iterations;
        pcp.cycles = res.cycles;
        pcp.qp_solves += res.qp_solves;
        pcp.qp_flops = ws.used();
        pcp.flops = pcp.iterations * per_iter + pcp.qp_flops;
        pcp.switched_to_pcp = true;
        return pcp;
      }
      pat = PatternAt(prob, 0.5 * (u + u_prev));
      if (seen.count(pat)) {
        if (M >= 63) throw InternalError("pattern space too large for the binary-order reset");
        bool found = false;
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << M); ++mask) {
          pat = PatternFromMask(mask, M);
          if (!seen.count(pat)) {
            found = true;
            break;
          }
        }
        if (!found) throw InternalError("decomposition exhausted every activation pattern");
      }
    }
    seen.insert(pat);
    const QhatCoefficients c = ComputeQhatCoefficients(prob.net, prob.system, prob.x, pat);
    const QpResult qp = SolvePattern(c, feas.G, feas.h, ws.solver, used ? &qp_warm : nullptr, res.qp_solves);
    if (qp.status == QpStatus::kInfeasible) throw InfeasibleError("one-step problem infeasible at this state");
    if (!qp.optimal()) throw InternalError("pattern QP ended with status " + ToString(qp.status));
    qp_warm.x = qp.x;
    qp_warm.active = qp.working_set;
    u_prev = u;
    u = qp.x;
    used = pat;
  }
  throw InternalError("decomposition iteration cap reached");
}

StepResult SolvePcp(const OneStepProblem& prob, const Vector& warm, const SolverOptions& options,
                    ActiveSetSolver* solver) {
  if (!(options.pcp_epsilon > 0.0)) throw ConfigError("PCP tolerance must be positive");
  Workspace ws(solver);
  const QpProblem feas = prob.FeasibleSet();
  const Index M = prob.net.width();
  const Index m = prob.system.m();
  const std::int64_t per_iter = ActivationFlops(M, prob.system.n(), m) + M;
  StepResult res;
  res.algorithm = Algorithm::kPcp;

  Vector u = warm;
  if (!Feasible(feas, u)) {
    const QpResult proj = ws.solver.Solve({2.0 * Matrix::Identity(m, m), -2.0 * warm, feas.G, feas.h});
    ++res.qp_solves;
    if (proj.status == QpStatus::kInfeasible) throw InfeasibleError("one-step problem infeasible at this state");
    u = proj.x;
  }
  Matrix cutG = feas.G;
  Vector cuth = feas.h;
  const long long cap = 10LL << std::min<Index>(M, 20);
  for (long long s = 1; s <= cap; ++s) {
    const ActivationPattern pat = PatternAt(prob, u);
    ++res.iterations;
    const QhatCoefficients c = ComputeQhatCoefficients(prob.net, prob.system, prob.x, pat);
    const QpResult relaxed = SolvePattern(c, cutG, cuth, ws.solver, nullptr, res.qp_solves);
    if (relaxed.status == QpStatus::kInfeasible) throw InfeasibleError("one-step problem infeasible at this state");
    if (!relaxed.optimal()) throw InternalError("PCP relaxed QP ended with status " + ToString(relaxed.status));
    Matrix RG;
    Vector Rh;
    RegionRows(prob, pat, RG, Rh);
    Matrix G(feas.G.rows() + RG.rows(), m);
    Vector h(G.rows());
    G << feas.G, RG;
    h << feas.h, Rh;
    const QpResult region = SolvePattern(c, G, h, ws.solver, nullptr, res.qp_solves);
    if (!region.optimal()) throw InternalError("PCP region QP ended with status " + ToString(region.status));
    const Vector& d = region.x;
    if ((d - relaxed.x).norm() <= options.pcp_epsilon) {
      res.u = d;
      res.qp_flops = ws.used();
      res.flops = res.iterations * per_iter + res.qp_flops;
      return res;
    }
    const Vector g = 2.0 * c.P * d + c.q;
    cutG.conservativeResize(cutG.rows() + 1, Eigen::NoChange);
    cuth.conservativeResize(cuth.size() + 1);
    cutG.row(cutG.rows() - 1) = g.transpose();
    cuth[cuth.size() - 1] = g.dot(d);
    u = relaxed.x;
  }
  throw InternalError("PCP iteration cap reached");
}

Controller::Controller(const PwqNetwork& net, const LtiSystem& system, const Polyhedron& input_set,
                       std::optional<Polyhedron> successor_set, Algorithm algorithm, SolverOptions options)
    : net_(net),
      system_(system),
      input_set_(input_set),
      successor_set_(std::move(successor_set)),
      algorithm_(algorithm),
      options_(options),
      last_u_(Vector::Zero(system.m())) {}

StepResult Controller::Step(const Vector& x) {
  const OneStepProblem prob{net_, system_, input_set_, successor_set_ ? &*successor_set_ : nullptr, x};
  StepResult res = algorithm_ == Algorithm::kPcp ? SolvePcp(prob, last_u_, options_, &solver_)
                                                 : SolveDecomposition(prob, last_u_, options_, &solver_);
  last_u_ = res.u;
  total_flops_ += res.flops;
  return res;
}

void Controller::Reset() {
  last_u_ = Vector::Zero(system_.m());
  total_flops_ = 0;
}

}  // namespace clqr
