#include "clqr/common.hpp"

#include <cmath>
#include <cstdio>

namespace clqr {

std::vector<std::vector<double>> ToNested(const Matrix& m) {
  std::vector<std::vector<double>> out(static_cast<size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i) {
    out[static_cast<size_t>(i)].resize(static_cast<size_t>(m.cols()));
    for (Index j = 0; j < m.cols(); ++j) out[static_cast<size_t>(i)][static_cast<size_t>(j)] = m(i, j);
  }
  return out;
}

Matrix MatrixFromNested(const std::vector<std::vector<double>>& rows, Index expected_cols) {
  const Index r = static_cast<Index>(rows.size());
  Index c = expected_cols;
  if (r > 0) {
    c = static_cast<Index>(rows.front().size());
    if (expected_cols >= 0 && c != expected_cols) {
      throw ConfigError("matrix has " + std::to_string(c) + " columns, expected " +
                        std::to_string(expected_cols));
    }
  }
  Matrix m(r, c < 0 ? 0 : c);
  for (Index i = 0; i < r; ++i) {
    const auto& row = rows[static_cast<size_t>(i)];
    if (static_cast<Index>(row.size()) != c) throw ConfigError("ragged matrix rows");
    for (Index j = 0; j < c; ++j) m(i, j) = row[static_cast<size_t>(j)];
  }
  return m;
}

std::vector<double> ToStdVector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector VectorFromStd(const std::vector<double>& v) {
  Vector out(static_cast<Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out[static_cast<Index>(i)] = v[i];
  return out;
}

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace clqr
