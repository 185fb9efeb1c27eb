#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clqr/model.hpp"
#include "clqr/polytope.hpp"
#include "clqr/qp.hpp"
#include "clqr/riccati.hpp"

namespace clqr {

/// Condensed finite-horizon problem
///   J(x, U) = ½xᵀYx + ½UᵀHU + xᵀFU,   GU ≤ w + Sx,
/// with U = (u₀, …, u_{N−1}). Rows are ordered by stage: for k = 0..N−1 the input rows of u_k
/// followed by the state rows of x_{k+1}.
struct MpqpData {
  Matrix H;  // Nm×Nm
  Matrix F;  // n×Nm
  Matrix Y;  // n×n
  Matrix G;  // c×Nm
  Vector w;
  Matrix S;  // c×n
  int N = 0;
  Index n = 0;
  Index m = 0;
  Matrix terminal_weight;  // P*
  Matrix Sx;  // (N·n)×n, rows of stage k hold A^{k+1}
  Matrix Su;  // (N·n)×(N·m)
  std::vector<int> row_stage;     // stage of each constraint row
  std::vector<char> row_is_input; // 1 for input rows, 0 for state rows

  Index num_constraints() const { return G.rows(); }
  Index num_decisions() const { return H.rows(); }

  /// The QP at parameter x:  P = H, q = Fᵀx, h = w + Sx.
  QpProblem QpAt(const Vector& x) const;
  /// Predicted states x₀, …, x_N.
  std::vector<Vector> Predict(const Vector& x, const Vector& U) const;
};

struct MpcSolution {
  Vector U;
  Vector lambda;
  double value = 0.0;
  std::vector<int> active_set;     // strongly active: slack ≤ 1e-7 and λ > 1e-8
  std::vector<int> weakly_active;  // slack ≤ 1e-7 and λ ≤ 1e-8
  std::vector<int> working_set;    // solver working set, reused for warm starts
  int iterations = 0;
  std::int64_t flops = 0;

  bool degenerate() const { return !weakly_active.empty(); }
  Vector FirstInput(Index m) const { return U.head(m); }
};

MpqpData Condense(const LtiSystem& sys, const Polyhedron& state_set, const Polyhedron& input_set,
                  const Matrix& Pstar, int N);

/// Solves the condensed QP at x. `warm` may be a solution at a nearby state, typically the
/// shifted previous solution. Throws InfeasibleError when x admits no feasible input sequence.
MpcSolution SolveMpc(const MpqpData& mpqp, const Vector& x, const MpcSolution* warm = nullptr,
                     ActiveSetSolver* solver = nullptr);

/// Receding-horizon warm start: U shifted by one stage with a zero tail, working set shifted
/// accordingly.
MpcSolution ShiftForWarmStart(const MpqpData& mpqp, const MpcSolution& sol);

/// O_∞^LQR: maximal positively invariant subset of {x ∈ X : −K*x ∈ U} under A − BK*.
InvariantSetResult LqrInvariantSet(const ProblemInstance& instance, const RiccatiSolution& ric);

/// Smallest N ≤ n_max for which the MPC terminal state of every test state lies in `olqr`.
/// Test states that are infeasible at some N only count as satisfied once they become feasible.
/// Throws ConvergenceError if n_max is exceeded.
int ChooseHorizon(const ProblemInstance& instance, const RiccatiSolution& ric, const Polyhedron& olqr,
                  const std::vector<Vector>& test_states, int n_max);

struct ValueGradient {
  Vector gradient;
  bool degenerate = false;  // weakly active rows or dependent active rows
};

/// ∇J*(x) = Yx + FU* − Sᵀλ*.
ValueGradient ComputeValueGradient(const MpqpData& mpqp, const MpcSolution& sol, const Vector& x);

/// Hessian-half of J* on the critical region of `active`:
///   P_i = P* + ½ S̃ᵀΓ⁻¹S̃,  Γ = G_A H⁻¹ G_Aᵀ,  S̃ = S_A + G_A H⁻¹ Fᵀ.
/// Throws DegeneracyError when Γ is singular.
Matrix RegionHessian(const MpqpData& mpqp, const std::vector<int>& active, const Matrix& Pstar);

/// Whether some admissible N-step input sequence from x ends in `target`.
bool ReachableIn(const MpqpData& mpqp, const Polyhedron& target, const Vector& x, ActiveSetSolver* solver = nullptr);

/// N-step controllable set to `target` within X₀ (n = 2 only), as the hull of the maximizers
/// of cᵀx over `directions` equally spaced c, scaled by 1 − 1e-6 toward the origin.
Polyhedron ControllableSet2d(const MpqpData& mpqp, const Polyhedron& target, const Polyhedron& X0, int directions = 720);

/// Stable textual id of an active set ("-" when empty).
std::string ActiveSetId(const std::vector<int>& active);

}  // namespace clqr
