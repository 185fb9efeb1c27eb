// Command-line front end: generate, train, certify, simulate, compare, preset.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "clqr/harness.hpp"

namespace {

namespace fs = std::filesystem;
using namespace clqr;

constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitCertificationFailed = 3;
constexpr int kExitConfig = 4;

struct Flags {
  std::string config;
  std::string preset = "example1";
  std::optional<std::uint64_t> seed;
  std::string algorithm = "decomp";
  std::optional<int> steps;
  std::string out = "out";
  std::string x0;
};

PipelineConfig ResolveConfig(const Flags& f) {
  PipelineConfig c = f.config.empty() ? Preset(f.preset) : LoadConfig(f.config);
  if (f.seed) {
    c.seed = *f.seed;
    c.train.seed = *f.seed;
  }
  if (f.steps) {
    if (*f.steps < 0) throw ConfigError("--steps must be non-negative");
    c.steps = *f.steps;
  }
  if (!f.x0.empty()) {
    std::vector<double> v;
    std::stringstream in(f.x0);
    for (std::string cell; std::getline(in, cell, ',');) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("--x0 expects comma-separated numbers");
      }
    }
    if (static_cast<Index>(v.size()) != c.instance.system.n()) throw ConfigError("--x0 has the wrong dimension");
    c.x0 = Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
  }
  return c;
}

fs::path OutDir(const Flags& f) {
  fs::path dir(f.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

TrainingSet LoadOrGenerate(const PipelineConfig& c, const Setup& s, const fs::path& dir) {
  const fs::path path = dir / "data.csv";
  if (fs::exists(path)) {
    std::cerr << "using " << path.string() << "\n";
    return LoadTrainingSet(path.string());
  }
  TrainingSet data = GenerateData(c, s);
  SaveTrainingSet(data, path.string());
  return data;
}

PwqNetwork LoadNet(const fs::path& dir) {
  const fs::path path = dir / "network.json";
  if (!fs::exists(path)) throw ConfigError(path.string() + " not found; run `train` first");
  return LoadNetwork(path.string());
}

int CmdPreset(const std::string& name, const Flags& f, bool to_file) {
  Flags g = f;
  if (!name.empty()) g.preset = name;
  const PipelineConfig c = ResolveConfig(g);
  if (to_file) {
    const fs::path path = OutDir(f) / "config.json";
    SaveConfig(c, path.string());
    std::cerr << "wrote " << path.string() << "\n";
  } else {
    std::cout << ToJson(c).dump(2) << "\n";
  }
  return 0;
}

int CmdGenerate(const Flags& f) {
  const PipelineConfig c = ResolveConfig(f);
  const Setup s = Prepare(c);
  GenerationReport rep;
  const TrainingSet data = GenerateData(c, s, &rep);
  const fs::path dir = OutDir(f);
  SaveTrainingSet(data, (dir / "data.csv").string());
  SaveConfig(c, (dir / "config.json").string());
  std::cerr << "samples " << data.size() << " (" << data.num_gradients() << " with gradients), skipped "
            << rep.skipped << ", audited " << rep.audited << ", max audit error " << rep.max_audit_error
            << ", max telescoping residual " << rep.max_telescoping_residual << "\n";
  return 0;
}

int CmdTrain(const Flags& f) {
  const PipelineConfig c = ResolveConfig(f);
  const Setup s = Prepare(c);
  const fs::path dir = OutDir(f);
  const TrainingSet data = LoadOrGenerate(c, s, dir);
  TrainingLog log;
  const PwqNetwork net = TrainNetwork(c, s, data, &log);
  SaveNetwork(net, (dir / "network.json").string());
  std::ofstream loss(dir / "loss.csv");
  loss << "epoch,mse\n";
  for (size_t i = 0; i < log.loss.size(); ++i) loss << i * c.train.log_every << "," << log.loss[i] << "\n";
  std::cerr << "final mse " << log.final_mse << " after " << log.epochs_run << " epochs (start "
            << log.best_start << ")\n";
  return 0;
}

int CmdCertify(const Flags& f) {
  const PipelineConfig c = ResolveConfig(f);
  const Setup s = Prepare(c);
  const fs::path dir = OutDir(f);
  const PwqNetwork net = LoadNet(dir);
  const TrainingSet data = LoadOrGenerate(c, s, dir);
  const CertificationReport rep = CertifyNetwork(c, s, net, data);
  std::ofstream(dir / "certificate.json") << ToJson(rep).dump(2) << "\n";
  std::cout << ToText(rep);
  return rep.pass ? 0 : kExitCertificationFailed;
}

int CmdSimulate(const Flags& f) {
  const PipelineConfig c = ResolveConfig(f);
  if (c.x0.size() == 0) throw ConfigError("no initial state: set x0 in the config or pass --x0");
  const Setup s = Prepare(c);
  const fs::path dir = OutDir(f);
  const ControllerKind kind = ControllerKindFromString(f.algorithm);
  std::optional<PwqNetwork> net;
  if (kind != ControllerKind::kMpc) net = LoadNet(dir);
  const SimulationTrace tr = RunController(kind, s, net ? &*net : nullptr, c.x0, c.steps);
  const fs::path path = dir / ("trace_" + f.algorithm + ".csv");
  WriteTraceCsv(tr, path.string());
  std::cout << "controller " << tr.controller << "  steps " << tr.steps() << "  total cost " << tr.total_cost
            << "  final |x| " << tr.states.back().norm() << "\n";
  if (!tr.error.empty()) {
    std::cerr << "stopped early: " << tr.error << "\n";
    return kExitInfeasible;
  }
  return 0;
}

int CmdCompare(const Flags& f) {
  const PipelineConfig c = ResolveConfig(f);
  const Setup s = Prepare(c);
  const fs::path dir = OutDir(f);
  const PwqNetwork net = LoadNet(dir);
  const std::vector<Vector> states = EvaluationStates(c, s);
  const std::vector<ComparisonRow> rows =
      Compare(s, &net, {ControllerKind::kPcp, ControllerKind::kDecomposition, ControllerKind::kMpc}, states, c.steps);
  WriteComparisonCsv(rows, (dir / "comparison.csv").string());
  std::ofstream(dir / "comparison.json") << ComparisonSummary(rows).dump(2) << "\n";
  for (const ComparisonRow& r : rows) {
    std::cout << r.controller << "  mean cost " << r.mean_cost << "  iterations/step " << r.mean_iterations
              << "  flops/step " << r.mean_flops << "  failures " << r.failures << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained LQR via approximate dynamic programming"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "Pipeline config JSON (overrides --preset)");
  app.add_option("--preset", f.preset, "example1, example2 or example3")->capture_default_str();
  app.add_option("--seed", f.seed, "Seed for sampling and training");
  app.add_option("--steps", f.steps, "Closed-loop simulation length");
  app.add_option("--out", f.out, "Output directory")->capture_default_str();
  app.add_option("--algorithm", f.algorithm, "Controller for simulate")
      ->check(CLI::IsMember({"pcp", "decomp", "mpc"}))
      ->capture_default_str();
  app.add_option("--x0", f.x0, "Initial state for simulate, comma separated");

  std::string preset_name;
  bool preset_to_file = false;
  CLI::App* preset = app.add_subcommand("preset", "Print a preset's full config");
  preset->add_option("name", preset_name, "Preset name");
  preset->add_flag("--write", preset_to_file, "Write <out>/config.json instead of printing");
  CLI::App* generate = app.add_subcommand("generate", "Sample J* from MPC into <out>/data.csv");
  CLI::App* train = app.add_subcommand("train", "Fit the network to <out>/data.csv");
  CLI::App* certify = app.add_subcommand("certify", "Check the stability condition for <out>/network.json");
  CLI::App* simulate = app.add_subcommand("simulate", "Closed-loop rollout into <out>/trace_<algorithm>.csv");
  CLI::App* compare = app.add_subcommand("compare", "PCP, decomposition and MPC on sampled states");
  for (CLI::App* sub : {preset, generate, train, certify, simulate, compare}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*preset) return CmdPreset(preset_name, f, preset_to_file);
    if (*generate) return CmdGenerate(f);
    if (*train) return CmdTrain(f);
    if (*certify) return CmdCertify(f);
    if (*simulate) return CmdSimulate(f);
    if (*compare) return CmdCompare(f);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
