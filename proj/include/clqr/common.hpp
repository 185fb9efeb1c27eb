#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace clqr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: wrong dimensions, unparsable files, unknown names.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A problem instance fails a checkable assumption (e.g. Q not positive definite).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// The optimization problem has no feasible point at the requested state.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// An iterative procedure did not reach its tolerance within its budget.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Linearly dependent active constraints where independence is required.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

/// Broken internal consistency check; indicates a bug or numerical breakdown.
class InternalError : public Error {
 public:
  using Error::Error;
};

inline Matrix Symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline double MinEigenvalue(const Matrix& sym) {
  if (sym.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(Symmetrized(sym), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double MaxEigenvalue(const Matrix& sym) {
  if (sym.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(Symmetrized(sym), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

std::vector<std::vector<double>> ToNested(const Matrix& m);
Matrix MatrixFromNested(const std::vector<std::vector<double>>& rows, Index expected_cols = -1);
std::vector<double> ToStdVector(const Vector& v);
Vector VectorFromStd(const std::vector<double>& v);

/// Formats a double with 17 significant digits (round-trips bit-exactly).
std::string FormatDouble(double v);

}  // namespace clqr
