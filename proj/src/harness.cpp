#include "clqr/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "clqr/polytope.hpp"
#include "clqr/presets.hpp"

namespace clqr {

using nlohmann::json;

std::string ToString(DataPlan p) {
  switch (p) {
    case DataPlan::kBoundaryTrajectories: return "boundary_trajectories";
    case DataPlan::kFeasibleTrajectories: return "feasible_trajectories";
    case DataPlan::kGrid: return "grid";
  }
  return "unknown";
}

DataPlan DataPlanFromString(const std::string& s) {
  if (s == "boundary_trajectories") return DataPlan::kBoundaryTrajectories;
  if (s == "feasible_trajectories") return DataPlan::kFeasibleTrajectories;
  if (s == "grid") return DataPlan::kGrid;
  throw ConfigError("unknown data plan '" + s + "'");
}

std::vector<std::string> PresetList() { return PresetNames(); }

PipelineConfig Preset(const std::string& name) {
  PipelineConfig c;
  c.preset = name;
  c.train.learning_rate = 0.01;
  c.train.log_every = 100;
  if (name == "example1") {
    c.instance = Example1Instance();
    c.horizon = 10;
    c.plan = DataPlan::kBoundaryTrajectories;
    c.initial_states = 200;
    c.certify_mode = CertifyMode::kCorollary10;
    c.probe_spacing = 0.05;
    c.x0 = (Vector(2) << 0.0, 2.0).finished();
  } else if (name == "example2") {
    c.sample_time = 0.5;
    c.instance = Example2Instance(c.sample_time);
    c.horizon = 20;
    c.plan = DataPlan::kFeasibleTrajectories;
    c.initial_states = 100;
    c.train.width = 50;
    c.certify_mode = CertifyMode::kCorollary10;
    c.probe_count = 2000;
    c.x0 = Vector::Constant(8, 1.0);
  } else if (name == "example3") {
    c.instance = Example3Instance();
    c.horizon = 6;
    c.plan = DataPlan::kGrid;
    c.grid_spacing = 0.05;
    c.region_horizon = 20;
    c.successor_constraint = true;
    c.certify_mode = CertifyMode::kTheorem9;
    c.probe_spacing = 0.0125;
    c.x0 = (Vector(2) << 2.0, -2.0).finished();
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected example1, example2 or example3)");
  }
  return c;
}

json ToJson(const PipelineConfig& c) {
  json j;
  j["preset"] = c.preset;
  j["instance"] = ToJson(c.instance);
  j["sample_time"] = c.sample_time;
  j["horizon"] = c.horizon;
  j["data_plan"] = ToString(c.plan);
  j["initial_states"] = c.initial_states;
  j["grid_spacing"] = c.grid_spacing;
  j["region_horizon"] = c.region_horizon;
  j["successor_constraint"] = c.successor_constraint;
  j["gradients"] = c.gradients;
  j["train"] = {{"width", c.train.width},
                {"learning_rate", c.train.learning_rate},
                {"epochs", c.train.epochs},
                {"starts", c.train.starts},
                {"warmup_fraction", c.train.warmup_fraction},
                {"optimizer", ToString(c.train.optimizer)},
                {"quadratic_term", c.train.quadratic_term},
                {"target_mse", c.train.target_mse}};
  j["certify"] = {{"mode", ToString(c.certify_mode)},
                  {"probe_spacing", c.probe_spacing},
                  {"probe_count", c.probe_count},
                  {"max_beta_d", c.max_beta_d}};
  j["x0"] = ToStdVector(c.x0);
  j["steps"] = c.steps;
  j["eval_states"] = c.eval_states;
  j["seed"] = c.seed;
  return j;
}

PipelineConfig ConfigFromJson(const json& j) {
  try {
    const std::string name = j.value("preset", std::string("custom"));
    PipelineConfig c;
    if (name == "custom") {
      if (!j.contains("instance")) throw ConfigError("a custom config needs an instance");
      c.preset = name;
      c.train.learning_rate = 0.01;
    } else {
      c = Preset(name);
    }
    c.sample_time = j.value("sample_time", c.sample_time);
    if (j.contains("instance")) {
      c.instance = InstanceFromJson(j.at("instance"));
    } else if (name == "example2") {
      c.instance = Example2Instance(c.sample_time);
    }
    c.horizon = j.value("horizon", c.horizon);
    if (j.contains("data_plan")) c.plan = DataPlanFromString(j.at("data_plan").get<std::string>());
    c.initial_states = j.value("initial_states", c.initial_states);
    c.grid_spacing = j.value("grid_spacing", c.grid_spacing);
    c.region_horizon = j.value("region_horizon", c.region_horizon);
    c.successor_constraint = j.value("successor_constraint", c.successor_constraint);
    c.gradients = j.value("gradients", c.gradients);
    if (j.contains("train")) {
      const json& t = j.at("train");
      c.train.width = t.value("width", c.train.width);
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.starts = t.value("starts", c.train.starts);
      c.train.warmup_fraction = t.value("warmup_fraction", c.train.warmup_fraction);
      if (t.contains("optimizer")) c.train.optimizer = OptimizerFromString(t.at("optimizer").get<std::string>());
      c.train.quadratic_term = t.value("quadratic_term", c.train.quadratic_term);
      c.train.target_mse = t.value("target_mse", c.train.target_mse);
    }
    if (j.contains("certify")) {
      const json& t = j.at("certify");
      if (t.contains("mode")) c.certify_mode = CertifyModeFromString(t.at("mode").get<std::string>());
      c.probe_spacing = t.value("probe_spacing", c.probe_spacing);
      c.probe_count = t.value("probe_count", c.probe_count);
      c.max_beta_d = t.value("max_beta_d", c.max_beta_d);
    }
    if (j.contains("x0")) c.x0 = VectorFromStd(j.at("x0").get<std::vector<double>>());
    c.steps = j.value("steps", c.steps);
    c.eval_states = j.value("eval_states", c.eval_states);
    c.seed = j.value("seed", c.seed);
    c.train.seed = c.seed;
    c.instance.system.CheckDimensions();
    if (c.x0.size() != 0 && c.x0.size() != c.instance.system.n()) throw ConfigError("x0 has the wrong dimension");
    if (c.horizon < 1) throw ConfigError("horizon must be at least 1");
    if (c.steps < 0) throw ConfigError("steps must be non-negative");
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

PipelineConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return ConfigFromJson(j);
}

void SaveConfig(const PipelineConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << ToJson(config).dump(2) << "\n";
}

Setup Prepare(const PipelineConfig& config) {
  Setup s;
  s.instance = config.instance;
  s.ric = SolveDare(s.instance.system);
  s.olqr = LqrInvariantSet(s.instance, s.ric).set;
  if (config.region_horizon > 0) {
    const MpqpData reach = Condense(s.instance.system, s.instance.state_set, s.instance.input_set, s.ric.P,
                                    config.region_horizon);
    s.instance.region_of_interest = ControllableSet2d(reach, s.olqr, s.instance.region_of_interest, 360);
  }
  s.mpqp = Condense(s.instance.system, s.instance.state_set, s.instance.input_set, s.ric.P, config.horizon);
  if (config.successor_constraint) s.successor_set = s.instance.region_of_interest;
  return s;
}

TrainingSet GenerateData(const PipelineConfig& config, const Setup& setup, GenerationReport* report) {
  const Polyhedron& X0 = setup.instance.region_of_interest;
  if (config.plan == DataPlan::kGrid) {
    GridOptions g;
    g.spacing = config.grid_spacing;
    g.terminal_set = setup.olqr;
    g.gradients = config.gradients;
    return GenerateGrid(setup.mpqp, X0, g, report);
  }
  const std::vector<Vector> init =
      config.plan == DataPlan::kBoundaryTrajectories
          ? SampleBoundaryStates(X0, config.initial_states, config.seed, &setup.mpqp)
          : SampleFeasibleStates(X0, config.initial_states, config.seed, setup.mpqp);
  GenerationOptions opt;
  opt.gradients = config.gradients;
  opt.seed = config.seed;
  return GenerateFromTrajectories(setup.mpqp, setup.instance.system, init, opt, report);
}

PwqNetwork TrainNetwork(const PipelineConfig& config, const Setup& setup, const TrainingSet& data, TrainingLog* log) {
  TrainConfig t = config.train;
  t.seed = config.seed;
  PwqNetwork net = Train(data, setup.ric.P, t, log);
  net.metadata = {{"preset", config.preset}, {"horizon", config.horizon}, {"seed", config.seed}};
  return net;
}

CertificationReport CertifyNetwork(const PipelineConfig& config, const Setup& setup, const PwqNetwork& net,
                                   const TrainingSet& data) {
  CertifyOptions opt;
  opt.mode = config.certify_mode;
  opt.probes.spacing = config.probe_spacing;
  opt.probes.count = config.probe_count;
  opt.probes.seed = config.seed;
  opt.probes.terminal_set = setup.olqr;
  opt.probes.max_beta_d = config.max_beta_d;
  opt.rhs.seed = config.seed;
  return Certify(net, data, setup.instance, setup.mpqp, opt);
}

std::vector<Vector> EvaluationStates(const PipelineConfig& config, const Setup& setup) {
  return SampleFeasibleStates(setup.instance.region_of_interest, config.eval_states, config.seed + 1, setup.mpqp);
}

std::string ToString(ControllerKind k) {
  switch (k) {
    case ControllerKind::kPcp: return "pcp";
    case ControllerKind::kDecomposition: return "decomp";
    case ControllerKind::kMpc: return "mpc";
  }
  return "unknown";
}

ControllerKind ControllerKindFromString(const std::string& s) {
  if (s == "pcp") return ControllerKind::kPcp;
  if (s == "decomp") return ControllerKind::kDecomposition;
  if (s == "mpc") return ControllerKind::kMpc;
  throw ConfigError("unknown algorithm '" + s + "' (expected pcp, decomp or mpc)");
}

namespace {

template <typename StepFn>
SimulationTrace Rollout(const LtiSystem& sys, const Vector& x0, int steps, StepFn step) {
  SimulationTrace trace;
  const auto start = std::chrono::steady_clock::now();
  Vector x = x0;
  trace.states.push_back(x);
  for (int t = 0; t < steps; ++t) {
    if (x.norm() <= kConvergedNorm) break;
    Vector u;
    int iters = 0;
    std::int64_t flops = 0;
    try {
      step(x, u, iters, flops);
    } catch (const Error& e) {
      trace.error = e.what();
      break;
    }
    const double stage = x.dot(sys.Q * x) + u.dot(sys.R * u);
    x = sys.A * x + sys.B * u;
    trace.inputs.push_back(u);
    trace.stage_costs.push_back(stage);
    trace.iterations.push_back(iters);
    trace.flops.push_back(flops);
    trace.states.push_back(x);
    trace.total_cost += stage;
  }
  trace.converged = trace.error.empty() && x.norm() <= kConvergedNorm;
  trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

}  // namespace

SimulationTrace Simulate(const ProblemInstance& instance, Controller& controller, const Vector& x0, int steps) {
  controller.Reset();
  SimulationTrace trace =
      Rollout(instance.system, x0, steps, [&](const Vector& x, Vector& u, int& iters, std::int64_t& flops) {
        const StepResult r = controller.Step(x);
        u = r.u;
        iters = r.iterations;
        flops = r.flops;
      });
  trace.controller = ToString(controller.algorithm());
  return trace;
}

SimulationTrace SimulateMpc(const ProblemInstance& instance, const MpqpData& mpqp, const Vector& x0, int steps) {
  ActiveSetSolver solver;
  std::optional<MpcSolution> prev;
  SimulationTrace trace =
      Rollout(instance.system, x0, steps, [&](const Vector& x, Vector& u, int& iters, std::int64_t& flops) {
        std::optional<MpcSolution> warm;
        if (prev) warm = ShiftForWarmStart(mpqp, *prev);
        const std::int64_t before = solver.flops();
        prev = SolveMpc(mpqp, x, warm ? &*warm : nullptr, &solver);
        u = prev->FirstInput(mpqp.m);
        iters = prev->iterations;
        flops = solver.flops() - before;
      });
  trace.controller = "mpc";
  return trace;
}

SimulationTrace RunController(ControllerKind kind, const Setup& setup, const PwqNetwork* net, const Vector& x0, int steps,
                    const SolverOptions& options) {
  if (kind == ControllerKind::kMpc) return SimulateMpc(setup.instance, setup.mpqp, x0, steps);
  if (!net) throw ConfigError("the ADP controllers need a trained network");
  Controller ctrl(*net, setup.instance.system, setup.instance.input_set, setup.successor_set,
                  kind == ControllerKind::kPcp ? Algorithm::kPcp : Algorithm::kDecomposition, options);
  return Simulate(setup.instance, ctrl, x0, steps);
}

void WriteTraceCsv(const SimulationTrace& trace, std::ostream& out) {
  const Index n = trace.states.front().size();
  const Index m = trace.inputs.empty() ? 0 : trace.inputs.front().size();
  out << "t";
  for (Index i = 0; i < n; ++i) out << ",x" << i;
  for (Index i = 0; i < m; ++i) out << ",u" << i;
  out << ",stageCost,iters,flops\n";
  for (size_t t = 0; t < trace.states.size(); ++t) {
    out << t;
    for (Index i = 0; i < n; ++i) out << "," << FormatDouble(trace.states[t][i]);
    if (t < trace.inputs.size()) {
      for (Index i = 0; i < m; ++i) out << "," << FormatDouble(trace.inputs[t][i]);
      out << "," << FormatDouble(trace.stage_costs[t]) << "," << trace.iterations[t] << "," << trace.flops[t];
    } else {
      for (Index i = 0; i < m + 3; ++i) out << ",";
    }
    out << "\n";
  }
}

void WriteTraceCsv(const SimulationTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  WriteTraceCsv(trace, out);
}

std::vector<ComparisonRow> Compare(const Setup& setup, const PwqNetwork* net, const std::vector<ControllerKind>& kinds,
                                   const std::vector<Vector>& initial_states, int steps) {
  std::vector<ComparisonRow> rows;
  for (ControllerKind kind : kinds) {
    ComparisonRow row;
    row.controller = ToString(kind);
    double cost_sum = 0.0;
    long long step_count = 0;
    double iter_sum = 0.0;
    double flop_sum = 0.0;
    for (const Vector& x0 : initial_states) {
      SimulationTrace tr;
      try {
        tr = RunController(kind, setup, net, x0, steps);
      } catch (const Error& e) {
        tr.error = e.what();
      }
      row.wall_seconds += tr.wall_seconds;
      if (!tr.error.empty()) {
        ++row.failures;
        row.costs.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      row.costs.push_back(tr.total_cost);
      cost_sum += tr.total_cost;
      for (size_t t = 0; t < tr.steps(); ++t) {
        iter_sum += tr.iterations[t];
        flop_sum += static_cast<double>(tr.flops[t]);
      }
      step_count += static_cast<long long>(tr.steps());
    }
    const int ok = static_cast<int>(initial_states.size()) - row.failures;
    row.mean_cost = ok > 0 ? cost_sum / ok : std::numeric_limits<double>::quiet_NaN();
    row.mean_iterations = step_count > 0 ? iter_sum / step_count : 0.0;
    row.mean_flops = step_count > 0 ? flop_sum / step_count : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

void WriteComparisonCsv(const std::vector<ComparisonRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "controller,meanTotalCost,meanIterations,meanFlopsPerStep,failures\n";
  for (const ComparisonRow& r : rows) {
    out << r.controller << "," << FormatDouble(r.mean_cost) << "," << FormatDouble(r.mean_iterations) << ","
        << FormatDouble(r.mean_flops) << "," << r.failures << "\n";
  }
}

json ComparisonSummary(const std::vector<ComparisonRow>& rows) {
  json j = json::array();
  for (const ComparisonRow& r : rows) {
    json costs = json::array();
    for (double c : r.costs) costs.push_back(std::isnan(c) ? json(nullptr) : json(c));
    j.push_back({{"controller", r.controller},
                 {"mean_total_cost", r.mean_cost},
                 {"mean_iterations", r.mean_iterations},
                 {"mean_flops_per_step", r.mean_flops},
                 {"failures", r.failures},
                 {"total_costs", costs},
                 {"wall_seconds_informational", r.wall_seconds}});
  }
  return j;
}

std::int64_t FlopsAlgo2(Index M, Index n, Index m, std::int64_t qp_flops_per_iteration, int iterations) {
  return iterations * (ActivationFlops(M, n, m) + qp_flops_per_iteration + M);
}

}  // namespace clqr
