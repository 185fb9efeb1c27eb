#pragma once

#include <random>
#include <vector>

#include "clqr/model.hpp"

namespace clqr {

struct InvariantSetResult {
  Polyhedron set;
  int iterations = 0;
  bool converged = false;
};

/// {x : x ∈ X, −Kx ∈ U}: the state rows followed by the input rows mapped through −K.
Polyhedron AdmissibleSet(const Polyhedron& state_set, const Polyhedron& input_set, const Matrix& K);

/// Ω₀ = seed, Ω_{k+1} = Ω_k ∩ {x : Acl·x ∈ Ω_k} with LP-based pruning of redundant rows, until
/// no row of the preimage cuts Ω_k. `converged` is false if `max_iter` ran out, in which case the
/// returned set is an outer approximation and must not be called maximal.
InvariantSetResult MaxPositivelyInvariant(const Matrix& Acl, const Polyhedron& seed, int max_iter = 200);

/// Membership with per-row tolerance tol·max(1, ‖Hᵢ‖).
bool Contains(const Polyhedron& set, const Vector& x, double tol = 1e-9);

/// Drops rows implied by the others. A row is tested by maximizing Hᵢx over the remaining rows
/// plus the relaxed row Hᵢx ≤ hᵢ + 1, so every LP stays bounded.
Polyhedron RemoveRedundant(const Polyhedron& set);

/// sup {dᵀx : x ∈ set}; +∞ when unbounded, −∞ when the set is empty.
double Support(const Polyhedron& set, const Vector& direction);

/// Both polyhedra compared via support functions of the outer rows.
bool IsSubset(const Polyhedron& inner, const Polyhedron& outer, double tol = 1e-9);

/// Vertices of a bounded 2-D polyhedron in counterclockwise order. Throws ConfigError for
/// dim ≠ 2 or unbounded input.
std::vector<Vector> Vertices2d(const Polyhedron& set);

/// Counterclockwise convex hull (Andrew's monotone chain), collinear points dropped.
std::vector<Vector> ConvexHull2d(std::vector<Vector> points);

/// Halfspace form of a counterclockwise convex polygon.
Polyhedron PolygonToPolyhedron(const std::vector<Vector>& ccw_vertices);

/// Largest ρ ≥ 0 with ρ·direction ∈ set, for a set containing the origin (+∞ if unbounded).
double RayExit(const Polyhedron& set, const Vector& direction);

struct BoundingBox {
  Vector lower;
  Vector upper;
};

/// Axis-aligned bounding box via 2d LPs. Throws ConfigError for unbounded sets.
BoundingBox ComputeBoundingBox(const Polyhedron& set);

/// Rejection sampling from the bounding box; deterministic for a given engine state.
std::vector<Vector> SampleUniform(const Polyhedron& set, int count, std::mt19937_64& rng);

}  // namespace clqr
