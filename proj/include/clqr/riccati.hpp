#pragma once

#include "clqr/model.hpp"

namespace clqr {

struct RiccatiSolution {
  Matrix P;  // stabilizing solution P* of the DARE
  Matrix K;  // LQR gain, u = −Kx
  double residual = 0.0;
  int iterations = 0;
};

/// Fixed-point iteration P ← AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA + Q from P₀ = Q, stopped when
/// ‖P_{k+1} − P_k‖_F ≤ tol. Throws ConvergenceError (naming the last step size) if `max_iter`
/// is exhausted, which happens when (A, B) is not stabilizable.
RiccatiSolution SolveDare(const LtiSystem& sys, double tol = 1e-12, int max_iter = 100000);

/// ‖AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA + Q − P‖_F. Throws ValidationError if R + BᵀPB is not
/// positive definite.
double DareResidual(const Matrix& P, const LtiSystem& sys);

/// (R + BᵀPB)⁻¹BᵀPA via Cholesky.
Matrix LqrGain(const Matrix& P, const LtiSystem& sys);

/// Largest eigenvalue modulus (real Schur based).
double SpectralRadius(const Matrix& M);

}  // namespace clqr
