#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "clqr/common.hpp"

namespace clqr {

/// Discrete-time LTI system x⁺ = Ax + Bu with stage cost xᵀQx + uᵀRu.
struct LtiSystem {
  Matrix A;
  Matrix B;
  Matrix Q;
  Matrix R;

  Index n() const { return A.rows(); }
  Index m() const { return B.cols(); }

  /// Throws ConfigError on inconsistent dimensions.
  void CheckDimensions() const;
};

/// Halfspace-form polyhedron {x : Hx ≤ h}. Zero rows encode ℝᵈ.
struct Polyhedron {
  Matrix H;
  Vector h;

  Polyhedron() = default;
  Polyhedron(Matrix H_, Vector h_) : H(std::move(H_)), h(std::move(h_)) {}

  static Polyhedron Unconstrained(Index dim) { return {Matrix(0, dim), Vector(0)}; }
  /// {x : ‖x‖∞ ≤ bound}
  static Polyhedron InfinityBall(Index dim, double bound);
  /// {x : lower ≤ x ≤ upper}
  static Polyhedron Box(const Vector& lower, const Vector& upper);

  Index dim() const { return H.cols(); }
  Index num_rows() const { return H.rows(); }
  bool unconstrained() const { return H.rows() == 0; }

  /// Rows of both polyhedra stacked.
  Polyhedron Intersect(const Polyhedron& other) const;
  /// Rows scaled to unit Euclidean norm; zero rows are kept as-is.
  Polyhedron Normalized() const;
};

struct ProblemInstance {
  LtiSystem system;
  Polyhedron state_set;           // X
  Polyhedron input_set;           // U
  Polyhedron region_of_interest;  // X₀
};

struct ValidationReport {
  bool valid = true;
  bool stabilizable = false;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  Vector q_eigenvalues;
  Vector r_eigenvalues;

  void Fail(std::string message) {
    valid = false;
    errors.push_back(std::move(message));
  }
};

/// Returns a copy with Q and R replaced by their symmetric parts. Appends a warning to
/// `warnings` (when given) if the asymmetry exceeded 1e-12.
LtiSystem Symmetrize(const LtiSystem& sys, std::vector<std::string>* warnings = nullptr);

/// Checks the verifiable parts of the standing assumptions: dimensions (throws ConfigError),
/// Q ≻ 0 and R ≻ 0 (eigenvalue tolerance 1e-10), non-empty sets with the origin in their
/// interior, stabilizability via Riccati convergence, and X₀ ⊆ X.
ValidationReport Validate(const ProblemInstance& instance);

// JSON schema: matrices as nested arrays, sets as {"H": [[...]], "h": [...]}.
nlohmann::json ToJson(const Polyhedron& p);
Polyhedron PolyhedronFromJson(const nlohmann::json& j, Index dim);
nlohmann::json ToJson(const LtiSystem& sys);
LtiSystem SystemFromJson(const nlohmann::json& j);
nlohmann::json ToJson(const ProblemInstance& inst);
ProblemInstance InstanceFromJson(const nlohmann::json& j);

ProblemInstance LoadInstance(const std::string& path);
void SaveInstance(const ProblemInstance& inst, const std::string& path);

}  // namespace clqr
