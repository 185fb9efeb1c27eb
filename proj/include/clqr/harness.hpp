#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "clqr/certifier.hpp"
#include "clqr/controller.hpp"
#include "clqr/datagen.hpp"
#include "clqr/mpc.hpp"
#include "clqr/pwq_net.hpp"
#include "clqr/riccati.hpp"

namespace clqr {

enum class DataPlan { kBoundaryTrajectories, kFeasibleTrajectories, kGrid };
std::string ToString(DataPlan p);
DataPlan DataPlanFromString(const std::string& s);

/// Everything needed to rerun one experiment end to end.
struct PipelineConfig {
  std::string preset;          // example1 | example2 | example3 | custom
  ProblemInstance instance;
  double sample_time = 0.0;    // example2: ZOH period used to build the instance
  int horizon = 10;
  DataPlan plan = DataPlan::kBoundaryTrajectories;
  int initial_states = 200;
  double grid_spacing = 0.05;
  int region_horizon = 0;      // > 0: X₀ becomes the polygon of states steerable into O∞ in this many steps
  bool successor_constraint = false;  // C = X₀ in the one-step problem (else ℝⁿ)
  bool gradients = true;
  TrainConfig train;
  CertifyMode certify_mode = CertifyMode::kCorollary10;
  double probe_spacing = 0.0;  // 0: random probes
  int probe_count = 2000;
  double max_beta_d = 0.1;
  Vector x0;
  int steps = 100;
  int eval_states = 20;
  std::uint64_t seed = 1;
};

/// Throws ConfigError for unknown names.
PipelineConfig Preset(const std::string& name);
std::vector<std::string> PresetList();

nlohmann::json ToJson(const PipelineConfig& config);
/// Missing fields take the preset's values ("preset" selects it, default custom requires an
/// instance). A preset config without "instance" is rebuilt from its fields (sample_time).
PipelineConfig ConfigFromJson(const nlohmann::json& j);
PipelineConfig LoadConfig(const std::string& path);
void SaveConfig(const PipelineConfig& config, const std::string& path);

/// Derived problem data shared by every stage.
struct Setup {
  ProblemInstance instance;  // X₀ replaced when region_horizon > 0
  RiccatiSolution ric;
  Polyhedron olqr;
  MpqpData mpqp;
  std::optional<Polyhedron> successor_set;
};

Setup Prepare(const PipelineConfig& config);
TrainingSet GenerateData(const PipelineConfig& config, const Setup& setup, GenerationReport* report = nullptr);
PwqNetwork TrainNetwork(const PipelineConfig& config, const Setup& setup, const TrainingSet& data,
                        TrainingLog* log = nullptr);
CertificationReport CertifyNetwork(const PipelineConfig& config, const Setup& setup, const PwqNetwork& net,
                                   const TrainingSet& data);

/// `eval_states` feasible states drawn with seed + 1, disjoint from the training draw.
std::vector<Vector> EvaluationStates(const PipelineConfig& config, const Setup& setup);

enum class ControllerKind { kPcp, kDecomposition, kMpc };
std::string ToString(ControllerKind k);
ControllerKind ControllerKindFromString(const std::string& s);

struct SimulationTrace {
  std::string controller;
  std::vector<Vector> states;   // T+1 unless stopped early
  std::vector<Vector> inputs;
  std::vector<double> stage_costs;
  std::vector<int> iterations;
  std::vector<std::int64_t> flops;
  double total_cost = 0.0;
  bool converged = false;       // stopped at ‖x‖ ≤ 1e-9
  std::string error;            // set when the controller failed and the trace was truncated
  double wall_seconds = 0.0;    // informational

  size_t steps() const { return inputs.size(); }
};

constexpr double kConvergedNorm = 1e-9;

SimulationTrace Simulate(const ProblemInstance& instance, Controller& controller, const Vector& x0, int steps);
SimulationTrace SimulateMpc(const ProblemInstance& instance, const MpqpData& mpqp, const Vector& x0, int steps);
/// Dispatches on `kind`; `net` is required for the ADP controllers.
SimulationTrace RunController(ControllerKind kind, const Setup& setup, const PwqNetwork* net, const Vector& x0, int steps,
                    const SolverOptions& options = {});

/// Columns t, x0..x{n−1}, u0..u{m−1}, stageCost, iters, flops; 17 significant digits. The final
/// state gets a row with empty input cells.
void WriteTraceCsv(const SimulationTrace& trace, std::ostream& out);
void WriteTraceCsv(const SimulationTrace& trace, const std::string& path);

struct ComparisonRow {
  std::string controller;
  std::vector<double> costs;  // per initial state, NaN on failure
  double mean_cost = 0.0;     // over successful runs
  double mean_iterations = 0.0;
  double mean_flops = 0.0;    // per step
  int failures = 0;
  double wall_seconds = 0.0;
};

std::vector<ComparisonRow> Compare(const Setup& setup, const PwqNetwork* net, const std::vector<ControllerKind>& kinds,
                                   const std::vector<Vector>& initial_states, int steps);
void WriteComparisonCsv(const std::vector<ComparisonRow>& rows, const std::string& path);
nlohmann::json ComparisonSummary(const std::vector<ComparisonRow>& rows);

/// s_m·(f_act + f_QP + M) with f_QP the QP flops per iteration.
std::int64_t FlopsAlgo2(Index M, Index n, Index m, std::int64_t qp_flops_per_iteration, int iterations);

}  // namespace clqr
