#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clqr/mpc.hpp"

namespace clqr {

enum class SampleSource { kInitial, kTrajectory, kGrid, kTesting };

std::string ToString(SampleSource s);
SampleSource SampleSourceFromString(const std::string& s);

/// State/value pairs for J*_∞ with optional gradients. Parallel arrays, one entry per sample.
struct TrainingSet {
  Index n = 0;
  std::vector<Vector> states;
  std::vector<double> values;
  std::vector<std::optional<Vector>> gradients;
  std::vector<SampleSource> sources;
  std::vector<int> trajectory;          // index of the generating initial state, −1 for grid points
  std::vector<double> stage_costs;      // x_kᵀQx_k + u_kᵀRu_k of the applied input (trajectories only)
  std::vector<std::string> active_sets; // ActiveSetId of the MPC solution when known, else ""

  size_t size() const { return states.size(); }
  bool empty() const { return states.empty(); }
  void Add(Vector x, double value, std::optional<Vector> gradient, SampleSource source, int traj = -1,
           double stage_cost = 0.0, std::string active = "");
  void Append(const TrainingSet& other);
  size_t num_gradients() const;
};

/// CSV with header x0..x{n-1}, value, g0..g{n-1} (nan when absent), source, trajectory,
/// stage_cost, active_set. Floats use 17 significant digits.
void SaveTrainingSet(const TrainingSet& data, const std::string& path);
TrainingSet LoadTrainingSet(const std::string& path);

/// Uniform directions shot to the boundary of X0 and pulled in by 0.99. When `mpqp` is given,
/// MPC-infeasible states are discarded. Throws ConvergenceError if fewer than `count` states
/// survive 100·count draws.
std::vector<Vector> SampleBoundaryStates(const Polyhedron& X0, int count, std::uint64_t seed,
                                         const MpqpData* mpqp = nullptr);

/// Uniform samples from X0 that are MPC-feasible (rejection sampling, same failure rule).
std::vector<Vector> SampleFeasibleStates(const Polyhedron& X0, int count, std::uint64_t seed, const MpqpData& mpqp);

struct GenerationOptions {
  bool gradients = false;       // re-solve at every visited state to record ∇J*
  double audit_fraction = 0.05; // share of trajectory states re-solved for the value audit
  std::uint64_t seed = 0;       // selects the audited states
};

struct GenerationReport {
  int skipped = 0;                      // infeasible initial states
  int audited = 0;
  double max_audit_error = 0.0;         // relative |value − J*_N(x)|
  double max_telescoping_residual = 0.0;
  int degenerate_gradients = 0;
  std::vector<std::string> warnings;
};

/// One MPC solve per initial state; the closed loop under the open-loop optimal sequence
/// gives N pairs with values J*_N(x) minus the accumulated stage costs.
TrainingSet GenerateFromTrajectories(const MpqpData& mpqp, const LtiSystem& sys,
                                     const std::vector<Vector>& initial_states, const GenerationOptions& options,
                                     GenerationReport* report = nullptr);

struct GridOptions {
  double spacing = 0.05;
  std::optional<Polyhedron> clip;               // keep only points inside
  std::optional<Polyhedron> terminal_set;       // keep only points whose MPC terminal state lies here
  bool gradients = false;
};

/// Axis-aligned grid over the bounding box of X0, one MPC solve per kept point.
/// Throws ConfigError for dimension > 3 or more than 10⁶ candidates.
TrainingSet GenerateGrid(const MpqpData& mpqp, const Polyhedron& X0, const GridOptions& options,
                         GenerationReport* report = nullptr);

/// Grid coordinates along one axis: lower, lower + spacing, … ≤ upper (at least one point).
std::vector<double> GridAxis(double lower, double upper, double spacing);

}  // namespace clqr
