#include "clqr/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "clqr/qp.hpp"

namespace clqr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRedundancyTol = 1e-9;

double Cross(const Vector& o, const Vector& a, const Vector& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

}  // namespace

Polyhedron AdmissibleSet(const Polyhedron& state_set, const Polyhedron& input_set, const Matrix& K) {
  if (K.rows() != input_set.dim() || K.cols() != state_set.dim()) {
    throw ConfigError("admissible set: K must be m×n");
  }
  return state_set.Intersect(Polyhedron(-input_set.H * K, input_set.h));
}

bool Contains(const Polyhedron& set, const Vector& x, double tol) {
  for (Index i = 0; i < set.num_rows(); ++i) {
    const double scale = std::max(1.0, set.H.row(i).norm());
    if (set.H.row(i).dot(x) - set.h[i] > tol * scale) return false;
  }
  return true;
}

double Support(const Polyhedron& set, const Vector& direction) {
  if (direction.isZero(0.0)) {
    const QpResult feas = SolveLp(Vector::Zero(set.dim()), set.H, set.h);
    return feas.status == QpStatus::kInfeasible ? -kInf : 0.0;
  }
  const QpResult res = SolveLp(-direction, set.H, set.h);
  switch (res.status) {
    case QpStatus::kOptimal: return direction.dot(res.x);
    case QpStatus::kInfeasible: return -kInf;
    case QpStatus::kUnbounded: return kInf;
    case QpStatus::kMaxIter: break;
  }
  throw InternalError("support LP hit its iteration cap");
}

bool IsSubset(const Polyhedron& inner, const Polyhedron& outer, double tol) {
  for (Index i = 0; i < outer.num_rows(); ++i) {
    const double s = Support(inner, outer.H.row(i).transpose());
    if (s > outer.h[i] + tol * std::max(1.0, outer.H.row(i).norm())) return false;
  }
  return true;
}

Polyhedron RemoveRedundant(const Polyhedron& set) {
  const Index d = set.dim();
  std::vector<char> keep(static_cast<size_t>(set.num_rows()), 1);
  for (Index i = 0; i < set.num_rows(); ++i) {
    const Vector row = set.H.row(i).transpose();
    const double norm = row.norm();
    if (norm == 0.0) {
      if (set.h[i] >= 0.0) keep[static_cast<size_t>(i)] = 0;
      continue;
    }
    std::vector<Index> others;
    for (Index j = 0; j < set.num_rows(); ++j) {
      if (j != i && keep[static_cast<size_t>(j)]) others.push_back(j);
    }
    Matrix G(static_cast<Index>(others.size()) + 1, d);
    Vector h(static_cast<Index>(others.size()) + 1);
    for (size_t k = 0; k < others.size(); ++k) {
      G.row(static_cast<Index>(k)) = set.H.row(others[k]);
      h[static_cast<Index>(k)] = set.h[others[k]];
    }
    G.row(G.rows() - 1) = row.transpose();
    h[h.size() - 1] = set.h[i] + norm;
    const QpResult res = SolveLp(-row, G, h);
    if (res.status == QpStatus::kOptimal && row.dot(res.x) <= set.h[i] + kRedundancyTol * norm) {
      keep[static_cast<size_t>(i)] = 0;
    }
  }
  Index kept = 0;
  for (char k : keep) kept += k;
  Polyhedron out{Matrix(kept, d), Vector(kept)};
  Index r = 0;
  for (Index i = 0; i < set.num_rows(); ++i) {
    if (!keep[static_cast<size_t>(i)]) continue;
    out.H.row(r) = set.H.row(i);
    out.h[r] = set.h[i];
    ++r;
  }
  return out;
}

InvariantSetResult MaxPositivelyInvariant(const Matrix& Acl, const Polyhedron& seed, int max_iter) {
  if (Acl.rows() != seed.dim() || Acl.cols() != seed.dim()) throw ConfigError("invariant set: dimension mismatch");
  InvariantSetResult result;
  Polyhedron omega = RemoveRedundant(seed.Normalized());
  for (int k = 1; k <= max_iter; ++k) {
    result.iterations = k;
    const Polyhedron pre{omega.H * Acl, omega.h};
    std::vector<Index> cutting;
    for (Index j = 0; j < pre.num_rows(); ++j) {
      const double norm = pre.H.row(j).norm();
      if (norm == 0.0) continue;
      const double s = Support(omega, pre.H.row(j).transpose());
      if (s > pre.h[j] + kRedundancyTol * norm) cutting.push_back(j);
    }
    if (cutting.empty()) {
      result.set = omega;
      result.converged = true;
      return result;
    }
    Polyhedron added{Matrix(static_cast<Index>(cutting.size()), omega.dim()),
                     Vector(static_cast<Index>(cutting.size()))};
    for (size_t r = 0; r < cutting.size(); ++r) {
      added.H.row(static_cast<Index>(r)) = pre.H.row(cutting[r]);
      added.h[static_cast<Index>(r)] = pre.h[cutting[r]];
    }
    omega = RemoveRedundant(omega.Intersect(added.Normalized()));
  }
  result.set = omega;
  result.converged = false;
  return result;
}

std::vector<Vector> ConvexHull2d(std::vector<Vector> points) {
  std::sort(points.begin(), points.end(), [](const Vector& a, const Vector& b) {
    return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
  });
  points.erase(std::unique(points.begin(), points.end(),
                           [](const Vector& a, const Vector& b) { return a[0] == b[0] && a[1] == b[1]; }),
               points.end());
  if (points.size() < 3) return points;
  std::vector<Vector> hull(2 * points.size());
  size_t k = 0;
  for (const Vector& p : points) {
    while (k >= 2 && Cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (size_t i = points.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && Cross(hull[k - 2], hull[k - 1], points[i]) <= 0.0) --k;
    hull[k++] = points[i];
  }
  hull.resize(k - 1);
  return hull;
}

Polyhedron PolygonToPolyhedron(const std::vector<Vector>& v) {
  const Index count = static_cast<Index>(v.size());
  if (count < 3) throw ConfigError("polygon needs at least three vertices");
  Polyhedron out{Matrix(count, 2), Vector(count)};
  for (Index i = 0; i < count; ++i) {
    const Vector& a = v[static_cast<size_t>(i)];
    const Vector& b = v[static_cast<size_t>((i + 1) % count)];
    Vector normal(2);
    normal << b[1] - a[1], a[0] - b[0];
    normal /= normal.norm();
    out.H.row(i) = normal.transpose();
    out.h[i] = normal.dot(a);
  }
  return out;
}

std::vector<Vector> Vertices2d(const Polyhedron& set) {
  if (set.dim() != 2) throw ConfigError("vertex enumeration is only supported in two dimensions");
  for (int axis = 0; axis < 2; ++axis) {
    for (double sign : {1.0, -1.0}) {
      Vector dir = Vector::Zero(2);
      dir[axis] = sign;
      if (!std::isfinite(Support(set, dir))) throw ConfigError("vertex enumeration needs a bounded, non-empty set");
    }
  }
  const Polyhedron ns = set.Normalized();
  std::vector<Vector> candidates;
  for (Index i = 0; i < ns.num_rows(); ++i) {
    for (Index j = i + 1; j < ns.num_rows(); ++j) {
      Eigen::Matrix2d M;
      M.row(0) = ns.H.row(i);
      M.row(1) = ns.H.row(j);
      if (std::abs(M.determinant()) < 1e-12) continue;
      const Vector p = M.inverse() * Eigen::Vector2d(ns.h[i], ns.h[j]);
      if (!Contains(ns, p, 1e-9)) continue;
      const bool duplicate = std::any_of(candidates.begin(), candidates.end(),
                                         [&](const Vector& q) { return (q - p).norm() <= 1e-9; });
      if (!duplicate) candidates.push_back(p);
    }
  }
  return ConvexHull2d(candidates);
}

double RayExit(const Polyhedron& set, const Vector& direction) {
  double rho = kInf;
  for (Index i = 0; i < set.num_rows(); ++i) {
    const double hd = set.H.row(i).dot(direction);
    if (hd > 0.0) rho = std::min(rho, set.h[i] / hd);
  }
  return rho;
}

BoundingBox ComputeBoundingBox(const Polyhedron& set) {
  const Index d = set.dim();
  BoundingBox box{Vector(d), Vector(d)};
  for (Index i = 0; i < d; ++i) {
    Vector dir = Vector::Zero(d);
    dir[i] = 1.0;
    box.upper[i] = Support(set, dir);
    box.lower[i] = -Support(set, -dir);
    if (!std::isfinite(box.upper[i]) || !std::isfinite(box.lower[i])) {
      throw ConfigError("bounding box requested for an unbounded or empty set");
    }
  }
  return box;
}

std::vector<Vector> SampleUniform(const Polyhedron& set, int count, std::mt19937_64& rng) {
  const BoundingBox box = ComputeBoundingBox(set);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vector> out;
  out.reserve(static_cast<size_t>(std::max(count, 0)));
  const long long max_draws = 1000LL * std::max(count, 1);
  for (long long draw = 0; static_cast<int>(out.size()) < count && draw < max_draws; ++draw) {
    Vector x(set.dim());
    for (Index i = 0; i < set.dim(); ++i) x[i] = box.lower[i] + unit(rng) * (box.upper[i] - box.lower[i]);
    if (Contains(set, x, 0.0)) out.push_back(std::move(x));
  }
  if (static_cast<int>(out.size()) < count) throw InternalError("rejection sampler acceptance too low");
  return out;
}

}  // namespace clqr
