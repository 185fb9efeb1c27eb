#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clqr/common.hpp"

namespace clqr {

/// Dense convex QP:  min ½xᵀPx + qᵀx  s.t.  Gx ≤ h.
struct QpProblem {
  Matrix P;
  Vector q;
  Matrix G;
  Vector h;

  Index num_variables() const { return q.size(); }
  Index num_constraints() const { return h.size(); }

  /// Throws ConfigError on inconsistent dimensions or asymmetric P.
  void Check() const;
};

enum class QpStatus { kOptimal, kInfeasible, kMaxIter, kUnbounded };

std::string ToString(QpStatus status);

struct QpResult {
  Vector x;
  Vector lambda;  // one multiplier per inequality row, ≥ 0 at optimality
  QpStatus status = QpStatus::kMaxIter;
  double kkt_residual = 0.0;
  int iterations = 0;
  std::vector<int> working_set;  // rows held as equalities at termination, sorted

  bool optimal() const { return status == QpStatus::kOptimal; }
};

/// Optional initial point and working-set guess.
struct QpWarmStart {
  std::optional<Vector> x;
  std::vector<int> active;
};

struct KktReport {
  double stationarity = 0.0;      // ‖Px + q + Gᵀλ‖∞
  double primal_violation = 0.0;  // max(0, max(Gx − h))
  double dual_violation = 0.0;    // max(0, max(−λ))
  double complementarity = 0.0;   // max |λᵢ (hᵢ − Gᵢx)|

  /// The acceptance bounds used across the library for an "optimal" result.
  bool WithinBounds(double q_inf_norm) const {
    return stationarity <= 1e-8 * (1.0 + q_inf_norm) && primal_violation <= 1e-8 &&
           dual_violation <= 1e-12 && complementarity <= 1e-7;
  }
};

KktReport CheckKkt(const QpProblem& prob, const Vector& x, const Vector& lambda);

/// Primal active-set method with a slack-minimizing phase 1 run on the same kernel.
///
/// The equality-constrained subproblem of every iteration is solved in the null space of the
/// working-set rows (Householder QR of G_Wᵀ, Cholesky of the reduced Hessian), so P only needs
/// to be positive definite on that null space. Ties in the ratio test and in the choice of the
/// dropped constraint go to the lowest row index.
///
/// Instances keep a running flop counter and are not thread-safe; use one per thread.
class ActiveSetSolver {
 public:
  struct Options {
    double feasibility_tol = 1e-9;
    double phase1_regularization = 1e-9;
    int max_iterations = -1;  // < 0 selects 10·(d + c) + 100
    double unbounded_norm = 1e12;
  };

  ActiveSetSolver() = default;
  explicit ActiveSetSolver(Options options) : options_(options) {}

  QpResult Solve(const QpProblem& prob, const QpWarmStart* warm = nullptr);

  /// Floating-point operations charged by all solves since construction or the last reset.
  std::int64_t flops() const { return flops_; }
  void ResetFlops() { flops_ = 0; }
  void AddFlops(std::int64_t f) { flops_ += f; }

  const Options& options() const { return options_; }

 private:
  struct Phase2Outcome {
    QpStatus status;
    int iterations;
  };

  Phase2Outcome RunPhase2(const QpProblem& prob, Vector& x, std::vector<int>& working,
                          Vector& lambda, int max_iterations, double unbounded_norm);
  bool FindFeasiblePoint(const QpProblem& prob, const Vector& start, Vector& x,
                         std::vector<int>& working, int& iterations);
  std::optional<Vector> SolveOnWorkingSet(const QpProblem& prob, std::vector<int>& working);
  std::vector<int> IndependentSubset(const Matrix& G, const std::vector<int>& rows);

  Options options_;
  std::int64_t flops_ = 0;
};

/// One-shot convenience wrapper around ActiveSetSolver.
QpResult SolveQp(const QpProblem& prob, const QpWarmStart* warm = nullptr);

/// Regularized LP:  min qᵀx + (ε/2)‖x‖²  s.t.  Gx ≤ h,  ε = 1e-9.
/// Reports kUnbounded when the minimizer escapes to ‖x‖∞ > 1e-3/ε, the scale at which the
/// regularizer rather than a constraint stops the descent.
QpResult SolveLp(const Vector& q, const Matrix& G, const Vector& h, ActiveSetSolver* solver = nullptr);

inline constexpr double kLpRegularization = 1e-9;

}  // namespace clqr
