#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "clqr/pwq_net.hpp"
#include "clqr/qp.hpp"

namespace clqr {

/// min_u xᵀQx + uᵀRu + Ĵ(Ax + Bu)  s.t.  u ∈ U,  Ax + Bu ∈ C  (C omitted when absent).
/// Holds references; the network and system must outlive it.
struct OneStepProblem {
  const PwqNetwork& net;
  const LtiSystem& system;
  const Polyhedron& input_set;
  const Polyhedron* successor_set;  // nullptr means C = ℝⁿ
  Vector x;

  /// The constraints as G u ≤ h.
  QpProblem FeasibleSet() const;
  /// Q̂(x, u) evaluated through the network.
  double Qhat(const Vector& u) const;
};

/// Q̂ on one activation pattern: uᵀP̄u + q̄ᵀu + v̄ (no ½ factor).
struct QhatCoefficients {
  Matrix P;
  Vector q;
  double v = 0.0;

  double operator()(const Vector& u) const { return u.dot(P * u) + q.dot(u) + v; }
};

QhatCoefficients ComputeQhatCoefficients(const PwqNetwork& net, const LtiSystem& system, const Vector& x,
                                         const ActivationPattern& pattern);

enum class Algorithm { kPcp, kDecomposition };
std::string ToString(Algorithm a);
Algorithm AlgorithmFromString(const std::string& s);

struct StepResult {
  Vector u;
  int iterations = 0;  // pattern evaluations
  int cycles = 0;
  int qp_solves = 0;
  std::int64_t qp_flops = 0;
  std::int64_t flops = 0;  // iterations·(f_act + M) + qp_flops
  Algorithm algorithm = Algorithm::kDecomposition;
  bool switched_to_pcp = false;
};

struct SolverOptions {
  double pcp_epsilon = 1e-9;
  bool switch_to_pcp_on_cycle = false;
};

/// Per-iteration activation/coefficient cost f_act of the flop model.
std::int64_t ActivationFlops(Index M, Index n, Index m);

/// Fixed-pattern QP iteration: evaluate the pattern at the current input, stop when it equals
/// the pattern the input was computed with, otherwise minimize that pattern's quadratic over the
/// feasible set. A pattern seen before (other than the last) is a cycle; the next pattern is
/// the one at the midpoint of the last two inputs if unseen, else the first unseen pattern in
/// binary order. Throws InfeasibleError when the feasible set is empty.
StepResult SolveDecomposition(const OneStepProblem& prob, const Vector& warm, const SolverOptions& options = {},
                              ActiveSetSolver* solver = nullptr);

/// Piecewise convex programming: alternates the pattern quadratic over the cut-down set U_s and
/// over the pattern's region, returns the region minimizer once the two agree within epsilon.
/// An infeasible warm input is first projected onto the feasible set.
StepResult SolvePcp(const OneStepProblem& prob, const Vector& warm, const SolverOptions& options = {},
                    ActiveSetSolver* solver = nullptr);

/// Warm-started receding-horizon controller (one per simulated system).
class Controller {
 public:
  Controller(const PwqNetwork& net, const LtiSystem& system, const Polyhedron& input_set,
             std::optional<Polyhedron> successor_set, Algorithm algorithm, SolverOptions options = {});

  /// u_t for state x; the previous input (zero at t = 0) seeds the iteration.
  StepResult Step(const Vector& x);
  void Reset();

  Algorithm algorithm() const { return algorithm_; }
  std::int64_t total_flops() const { return total_flops_; }
  const Vector& last_input() const { return last_u_; }

 private:
  const PwqNetwork& net_;
  const LtiSystem& system_;
  const Polyhedron& input_set_;
  std::optional<Polyhedron> successor_set_;
  Algorithm algorithm_;
  SolverOptions options_;
  ActiveSetSolver solver_;
  Vector last_u_;
  std::int64_t total_flops_ = 0;
};

}  // namespace clqr
