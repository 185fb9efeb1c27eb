#include "clqr/model.hpp"

#include <fstream>
#include <sstream>

#include "clqr/polytope.hpp"
#include "clqr/riccati.hpp"

namespace clqr {

using nlohmann::json;

void LtiSystem::CheckDimensions() const {
  const Index nx = A.rows();
  if (A.cols() != nx) throw ConfigError("A must be square");
  if (B.rows() != nx) throw ConfigError("B must have as many rows as A");
  if (Q.rows() != nx || Q.cols() != nx) throw ConfigError("Q must be n×n");
  if (R.rows() != B.cols() || R.cols() != B.cols()) throw ConfigError("R must be m×m");
  if (nx == 0 || B.cols() == 0) throw ConfigError("empty state or input dimension");
}

Polyhedron Polyhedron::InfinityBall(Index dim, double bound) {
  Matrix H(2 * dim, dim);
  H << Matrix::Identity(dim, dim), -Matrix::Identity(dim, dim);
  return {H, Vector::Constant(2 * dim, bound)};
}

Polyhedron Polyhedron::Box(const Vector& lower, const Vector& upper) {
  const Index dim = lower.size();
  Matrix H(2 * dim, dim);
  H << Matrix::Identity(dim, dim), -Matrix::Identity(dim, dim);
  Vector h(2 * dim);
  h << upper, -lower;
  return {H, h};
}

Polyhedron Polyhedron::Intersect(const Polyhedron& other) const {
  if (other.dim() != dim()) throw ConfigError("intersecting polyhedra of different dimension");
  Matrix H2(num_rows() + other.num_rows(), dim());
  H2 << H, other.H;
  Vector h2(num_rows() + other.num_rows());
  h2 << h, other.h;
  return {H2, h2};
}

Polyhedron Polyhedron::Normalized() const {
  Polyhedron out = *this;
  for (Index i = 0; i < num_rows(); ++i) {
    const double norm = H.row(i).norm();
    if (norm > 0.0) {
      out.H.row(i) /= norm;
      out.h[i] /= norm;
    }
  }
  return out;
}

LtiSystem Symmetrize(const LtiSystem& sys, std::vector<std::string>* warnings) {
  LtiSystem out = sys;
  const auto fix = [&](Matrix& m, const char* name) {
    const double asym = m.size() == 0 ? 0.0 : (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 && warnings != nullptr) {
      warnings->push_back(std::string(name) + " asymmetric by " + std::to_string(asym) + "; symmetrized");
    }
    m = Symmetrized(m);
  };
  fix(out.Q, "Q");
  fix(out.R, "R");
  return out;
}

namespace {

void CheckSet(const Polyhedron& set, const std::string& name, Index dim, ValidationReport& rep) {
  if (set.dim() != dim) throw ConfigError(name + " has dimension " + std::to_string(set.dim()));
  for (Index i = 0; i < set.num_rows(); ++i) {
    const double norm = set.H.row(i).norm();
    if (norm == 0.0) {
      if (set.h[i] < 0.0) rep.Fail("empty " + name + " (row " + std::to_string(i) + " reads 0 ≤ negative)");
      continue;
    }
    if (set.h[i] / norm <= 0.0) {
      rep.Fail(name + " does not contain the origin in its interior (row " + std::to_string(i) + ")");
    }
  }
}

std::string Join(const Vector& v) {
  std::ostringstream os;
  for (Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  return os.str();
}

}  // namespace

ValidationReport Validate(const ProblemInstance& instance) {
  ValidationReport rep;
  const LtiSystem& raw = instance.system;
  raw.CheckDimensions();
  const LtiSystem sys = Symmetrize(raw, &rep.warnings);

  Eigen::SelfAdjointEigenSolver<Matrix> qe(sys.Q, Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Matrix> re(sys.R, Eigen::EigenvaluesOnly);
  rep.q_eigenvalues = qe.eigenvalues();
  rep.r_eigenvalues = re.eigenvalues();
  if (rep.q_eigenvalues.minCoeff() <= 1e-10) rep.Fail("Q not positive definite (eigenvalues " + Join(rep.q_eigenvalues) + ")");
  if (rep.r_eigenvalues.minCoeff() <= 1e-10) rep.Fail("R not positive definite (eigenvalues " + Join(rep.r_eigenvalues) + ")");

  CheckSet(instance.state_set, "state set", sys.n(), rep);
  CheckSet(instance.input_set, "input set", sys.m(), rep);
  CheckSet(instance.region_of_interest, "region of interest", sys.n(), rep);

  if (rep.r_eigenvalues.minCoeff() > 1e-10 && rep.q_eigenvalues.minCoeff() > 1e-10) {
    try {
      const RiccatiSolution ric = SolveDare(sys);
      rep.stabilizable = SpectralRadius(sys.A - sys.B * ric.K) < 1.0 - 1e-8;
      if (!rep.stabilizable) rep.Fail("LQR closed loop is not Schur stable");
    } catch (const ConvergenceError& e) {
      rep.Fail(std::string("not stabilizable: ") + e.what());
    }
  }

  if (rep.valid && !instance.state_set.unconstrained()) {
    if (!IsSubset(instance.region_of_interest, instance.state_set, 1e-9)) {
      rep.Fail("region of interest is not contained in the state set");
    }
  }
  return rep;
}

json ToJson(const Polyhedron& p) {
  return json{{"H", ToNested(p.H)}, {"h", ToStdVector(p.h)}};
}

Polyhedron PolyhedronFromJson(const json& j, Index dim) {
  if (j.is_null()) return Polyhedron::Unconstrained(dim);
  try {
    if (j.contains("inf_norm_bound")) return Polyhedron::InfinityBall(dim, j.at("inf_norm_bound").get<double>());
    Matrix H = MatrixFromNested(j.at("H").get<std::vector<std::vector<double>>>(), dim);
    Vector h = VectorFromStd(j.at("h").get<std::vector<double>>());
    if (H.rows() != h.size()) throw ConfigError("polyhedron: H and h row counts differ");
    if (H.rows() == 0) H.resize(0, dim);
    return {H, h};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("polyhedron: ") + e.what());
  }
}

json ToJson(const LtiSystem& sys) {
  return json{{"A", ToNested(sys.A)}, {"B", ToNested(sys.B)}, {"Q", ToNested(sys.Q)}, {"R", ToNested(sys.R)}};
}

LtiSystem SystemFromJson(const json& j) {
  try {
    LtiSystem sys;
    sys.A = MatrixFromNested(j.at("A").get<std::vector<std::vector<double>>>());
    sys.B = MatrixFromNested(j.at("B").get<std::vector<std::vector<double>>>());
    sys.Q = MatrixFromNested(j.at("Q").get<std::vector<std::vector<double>>>());
    sys.R = MatrixFromNested(j.at("R").get<std::vector<std::vector<double>>>());
    sys.CheckDimensions();
    return Symmetrize(sys);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("system: ") + e.what());
  }
}

json ToJson(const ProblemInstance& inst) {
  json j = ToJson(inst.system);
  j["state_set"] = ToJson(inst.state_set);
  j["input_set"] = ToJson(inst.input_set);
  j["region_of_interest"] = ToJson(inst.region_of_interest);
  return j;
}

ProblemInstance InstanceFromJson(const json& j) {
  ProblemInstance inst;
  inst.system = SystemFromJson(j);
  const Index n = inst.system.n();
  const auto get = [&](const char* key) { return j.contains(key) ? j.at(key) : json(); };
  inst.state_set = PolyhedronFromJson(get("state_set"), n);
  inst.input_set = PolyhedronFromJson(get("input_set"), inst.system.m());
  inst.region_of_interest =
      j.contains("region_of_interest") ? PolyhedronFromJson(j.at("region_of_interest"), n) : inst.state_set;
  return inst;
}

ProblemInstance LoadInstance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return InstanceFromJson(j.contains("instance") ? j.at("instance") : j);
}

void SaveInstance(const ProblemInstance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << ToJson(inst).dump(2) << '\n';
}

}  // namespace clqr
