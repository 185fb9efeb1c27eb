#include "clqr/riccati.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace clqr {

namespace {

Matrix RiccatiMap(const Matrix& P, const LtiSystem& sys) {
  const Matrix pa = P * sys.A;
  const Matrix bpa = sys.B.transpose() * pa;
  const Matrix gram = sys.R + sys.B.transpose() * P * sys.B;
  Eigen::LLT<Matrix> llt(Symmetrized(gram));
  if (llt.info() != Eigen::Success) throw ValidationError("R + BᵀPB is not positive definite");
  return Symmetrized(sys.A.transpose() * pa - bpa.transpose() * llt.solve(bpa) + sys.Q);
}

}  // namespace

Matrix LqrGain(const Matrix& P, const LtiSystem& sys) {
  const Matrix gram = sys.R + sys.B.transpose() * P * sys.B;
  Eigen::LLT<Matrix> llt(Symmetrized(gram));
  if (llt.info() != Eigen::Success) throw ValidationError("R + BᵀPB is not positive definite");
  return llt.solve(sys.B.transpose() * P * sys.A);
}

double DareResidual(const Matrix& P, const LtiSystem& sys) {
  return (RiccatiMap(P, sys) - P).norm();
}

RiccatiSolution SolveDare(const LtiSystem& sys, double tol, int max_iter) {
  sys.CheckDimensions();
  Matrix P = sys.Q;
  double step = 0.0;
  for (int k = 1; k <= max_iter; ++k) {
    Matrix next = RiccatiMap(P, sys);
    step = (next - P).norm();
    P = std::move(next);
    if (!std::isfinite(step)) break;
    if (step <= tol) {
      RiccatiSolution sol;
      sol.P = P;
      sol.K = LqrGain(P, sys);
      sol.residual = DareResidual(P, sys);
      sol.iterations = k;
      return sol;
    }
  }
  throw ConvergenceError("Riccati iteration did not converge (last step " + std::to_string(step) +
                         "); (A, B) may not be stabilizable");
}

double SpectralRadius(const Matrix& M) {
  if (M.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace clqr
