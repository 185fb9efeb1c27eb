#include "clqr/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "clqr/polytope.hpp"

namespace clqr {

namespace {

constexpr double kBoundaryPull = 0.99;

bool MpcFeasible(const MpqpData& mpqp, const Vector& x) {
  try {
    SolveMpc(mpqp, x);
    return true;
  } catch (const InfeasibleError&) {
    return false;
  }
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double ParseDouble(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw ConfigError("bad number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError("bad number '" + s + "'");
  }
}

}  // namespace

std::string ToString(SampleSource s) {
  switch (s) {
    case SampleSource::kInitial: return "initial";
    case SampleSource::kTrajectory: return "trajectory";
    case SampleSource::kGrid: return "grid";
    case SampleSource::kTesting: return "testing";
  }
  return "unknown";
}

SampleSource SampleSourceFromString(const std::string& s) {
  if (s == "initial") return SampleSource::kInitial;
  if (s == "trajectory") return SampleSource::kTrajectory;
  if (s == "grid") return SampleSource::kGrid;
  if (s == "testing") return SampleSource::kTesting;
  throw ConfigError("unknown sample source '" + s + "'");
}

void TrainingSet::Add(Vector x, double value, std::optional<Vector> gradient, SampleSource source, int traj,
                      double stage_cost, std::string active) {
  if (n == 0) n = x.size();
  if (x.size() != n) throw ConfigError("training set: state dimension mismatch");
  states.push_back(std::move(x));
  values.push_back(value);
  gradients.push_back(std::move(gradient));
  sources.push_back(source);
  trajectory.push_back(traj);
  stage_costs.push_back(stage_cost);
  active_sets.push_back(std::move(active));
}

void TrainingSet::Append(const TrainingSet& other) {
  int offset = 0;
  for (int t : trajectory) offset = std::max(offset, t + 1);
  for (size_t i = 0; i < other.size(); ++i) {
    const int traj = other.trajectory[i] < 0 ? -1 : other.trajectory[i] + offset;
    Add(other.states[i], other.values[i], other.gradients[i], other.sources[i], traj, other.stage_costs[i],
        other.active_sets[i]);
  }
}

size_t TrainingSet::num_gradients() const {
  return static_cast<size_t>(std::count_if(gradients.begin(), gradients.end(), [](const auto& g) { return g.has_value(); }));
}

void SaveTrainingSet(const TrainingSet& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  for (Index i = 0; i < data.n; ++i) out << "x" << i << ",";
  out << "value,";
  for (Index i = 0; i < data.n; ++i) out << "g" << i << ",";
  out << "source,trajectory,stage_cost,active_set\n";
  for (size_t s = 0; s < data.size(); ++s) {
    for (Index i = 0; i < data.n; ++i) out << FormatDouble(data.states[s][i]) << ",";
    out << FormatDouble(data.values[s]) << ",";
    for (Index i = 0; i < data.n; ++i) {
      out << (data.gradients[s] ? FormatDouble((*data.gradients[s])[i]) : std::string("nan")) << ",";
    }
    out << ToString(data.sources[s]) << "," << data.trajectory[s] << "," << FormatDouble(data.stage_costs[s]) << ","
        << data.active_sets[s] << "\n";
  }
}

TrainingSet LoadTrainingSet(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  const auto header = SplitCsv(line);
  const Index n = static_cast<Index>(std::count_if(header.begin(), header.end(),
                                                   [](const std::string& h) { return !h.empty() && h[0] == 'x'; }));
  if (static_cast<Index>(header.size()) != 2 * n + 5) throw ConfigError(path + ": unexpected header");
  TrainingSet data;
  data.n = n;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = SplitCsv(line);
    if (cells.size() != header.size()) throw ConfigError(path + ":" + std::to_string(lineno) + ": wrong column count");
    Vector x(n), g(n);
    for (Index i = 0; i < n; ++i) x[i] = ParseDouble(cells[static_cast<size_t>(i)]);
    const double value = ParseDouble(cells[static_cast<size_t>(n)]);
    for (Index i = 0; i < n; ++i) g[i] = ParseDouble(cells[static_cast<size_t>(n + 1 + i)]);
    std::optional<Vector> grad;
    if (n > 0 && !std::isnan(g[0])) grad = g;
    const size_t base = static_cast<size_t>(2 * n + 1);
    data.Add(x, value, grad, SampleSourceFromString(cells[base]), std::stoi(cells[base + 1]),
             ParseDouble(cells[base + 2]), cells[base + 3]);
  }
  return data;
}

std::vector<Vector> SampleBoundaryStates(const Polyhedron& X0, int count, std::uint64_t seed, const MpqpData* mpqp) {
  std::vector<Vector> out;
  if (count <= 0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  const long long max_draws = 100LL * count;
  long long draws = 0;
  while (static_cast<int>(out.size()) < count && draws < max_draws) {
    ++draws;
    Vector d(X0.dim());
    for (Index i = 0; i < d.size(); ++i) d[i] = gauss(rng);
    if (d.norm() == 0.0) continue;
    d.normalize();
    const double rho = RayExit(X0, d);
    if (!std::isfinite(rho)) throw ConfigError("boundary sampling needs a bounded region of interest");
    Vector x = kBoundaryPull * rho * d;
    if (mpqp != nullptr && !MpcFeasible(*mpqp, x)) continue;
    out.push_back(std::move(x));
  }
  if (static_cast<int>(out.size()) < count) {
    throw ConvergenceError("only " + std::to_string(out.size()) + " of " + std::to_string(draws) +
                           " boundary draws were MPC-feasible (needed " + std::to_string(count) + ")");
  }
  return out;
}

std::vector<Vector> SampleFeasibleStates(const Polyhedron& X0, int count, std::uint64_t seed, const MpqpData& mpqp) {
  std::vector<Vector> out;
  if (count <= 0) return out;
  std::mt19937_64 rng(seed);
  const BoundingBox box = ComputeBoundingBox(X0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const long long max_draws = 100LL * count;
  long long draws = 0;
  while (static_cast<int>(out.size()) < count && draws < max_draws) {
    ++draws;
    Vector x(X0.dim());
    for (Index i = 0; i < x.size(); ++i) x[i] = box.lower[i] + unit(rng) * (box.upper[i] - box.lower[i]);
    if (!Contains(X0, x, 0.0) || !MpcFeasible(mpqp, x)) continue;
    out.push_back(std::move(x));
  }
  if (static_cast<int>(out.size()) < count) {
    throw ConvergenceError("only " + std::to_string(out.size()) + " of " + std::to_string(draws) +
                           " uniform draws were MPC-feasible (needed " + std::to_string(count) + ")");
  }
  return out;
}

TrainingSet GenerateFromTrajectories(const MpqpData& mpqp, const LtiSystem& sys,
                                     const std::vector<Vector>& initial_states, const GenerationOptions& options,
                                     GenerationReport* report) {
  GenerationReport local;
  GenerationReport& rep = report ? *report : local;
  TrainingSet data;
  data.n = mpqp.n;
  std::mt19937_64 rng(options.seed);
  ActiveSetSolver solver;
  for (size_t i = 0; i < initial_states.size(); ++i) {
    const Vector& x0 = initial_states[i];
    const int traj = static_cast<int>(i);
    MpcSolution sol;
    try {
      sol = SolveMpc(mpqp, x0, nullptr, &solver);
    } catch (const InfeasibleError&) {
      ++rep.skipped;
      rep.warnings.push_back("initial state " + std::to_string(i) + " is MPC-infeasible; skipped");
      continue;
    }
    if (x0.isZero(0.0)) {
      data.Add(x0, 0.0, options.gradients ? std::optional<Vector>(Vector::Zero(mpqp.n)) : std::nullopt,
               SampleSource::kInitial, traj, 0.0, ActiveSetId(sol.active_set));
      continue;
    }
    const std::vector<Vector> xs = mpqp.Predict(x0, sol.U);
    // Values are accumulated from the tail, which is the telescoping sum read backwards and
    // keeps full relative accuracy near the origin.
    std::vector<double> stages(static_cast<size_t>(mpqp.N));
    std::vector<double> tail(static_cast<size_t>(mpqp.N) + 1);
    const Matrix& Pstar = mpqp.terminal_weight;
    tail.back() = xs.back().dot(Pstar * xs.back());
    for (int k = mpqp.N - 1; k >= 0; --k) {
      const Vector& x = xs[static_cast<size_t>(k)];
      const Vector u = sol.U.segment(k * mpqp.m, mpqp.m);
      stages[static_cast<size_t>(k)] = x.dot(sys.Q * x) + u.dot(sys.R * u);
      tail[static_cast<size_t>(k)] = stages[static_cast<size_t>(k)] + tail[static_cast<size_t>(k) + 1];
    }
    if (std::abs(tail[0] - sol.value) > 1e-8 * std::max(1.0, sol.value)) {
      throw InternalError("stage-wise cost disagrees with the condensed MPC value");
    }
    for (int k = 0; k < mpqp.N; ++k) {
      const Vector& x = xs[static_cast<size_t>(k)];
      const double value = tail[static_cast<size_t>(k)];
      const double stage = stages[static_cast<size_t>(k)];
      std::optional<Vector> grad;
      std::string active;
      if (k == 0 || options.gradients) {
        const MpcSolution& here = k == 0 ? sol : SolveMpc(mpqp, x, nullptr, &solver);
        active = ActiveSetId(here.active_set);
        if (options.gradients) {
          const ValueGradient g = ComputeValueGradient(mpqp, here, x);
          if (g.degenerate) {
            ++rep.degenerate_gradients;
          } else {
            grad = g.gradient;
          }
        }
      }
      data.Add(x, value, grad, k == 0 ? SampleSource::kInitial : SampleSource::kTrajectory, traj, stage, active);
    }
  }
  // Value audit: independent re-solves at a random share of the trajectory states.
  std::vector<size_t> along;
  for (size_t s = 0; s < data.size(); ++s) {
    if (data.sources[s] == SampleSource::kTrajectory) along.push_back(s);
  }
  std::shuffle(along.begin(), along.end(), rng);
  along.resize(std::min(along.size(), static_cast<size_t>(std::ceil(options.audit_fraction * along.size()))));
  for (size_t s : along) {
    const double fresh = SolveMpc(mpqp, data.states[s], nullptr, &solver).value;
    ++rep.audited;
    rep.max_audit_error = std::max(rep.max_audit_error, std::abs(fresh - data.values[s]) / std::max(fresh, 1e-12));
  }
  // Telescoping audit over what was stored.
  for (size_t s = 0; s + 1 < data.size(); ++s) {
    if (data.trajectory[s] != data.trajectory[s + 1]) continue;
    const double r = std::abs(data.values[s] - data.values[s + 1] - data.stage_costs[s]);
    rep.max_telescoping_residual = std::max(rep.max_telescoping_residual, r);
  }
  return data;
}

std::vector<double> GridAxis(double lower, double upper, double spacing) {
  if (!(spacing > 0.0)) throw ConfigError("grid spacing must be positive");
  const long long count = static_cast<long long>(std::floor((upper - lower) / spacing + 1e-9)) + 1;
  std::vector<double> axis;
  for (long long i = 0; i < std::max(count, 1LL); ++i) axis.push_back(lower + static_cast<double>(i) * spacing);
  return axis;
}

TrainingSet GenerateGrid(const MpqpData& mpqp, const Polyhedron& X0, const GridOptions& options,
                         GenerationReport* report) {
  const Index n = X0.dim();
  if (n > 3) throw ConfigError("grid generation supports at most three dimensions");
  const BoundingBox box = ComputeBoundingBox(X0);
  std::vector<std::vector<double>> axes;
  double total = 1.0;
  for (Index i = 0; i < n; ++i) {
    axes.push_back(GridAxis(box.lower[i], box.upper[i], options.spacing));
    total *= static_cast<double>(axes.back().size());
  }
  if (total > 1e6) throw ConfigError("grid would have more than 10^6 points");
  TrainingSet data;
  data.n = n;
  ActiveSetSolver solver;
  std::vector<size_t> idx(static_cast<size_t>(n), 0);
  for (long long point = 0; point < static_cast<long long>(total); ++point) {
    Vector x(n);
    for (Index i = 0; i < n; ++i) x[i] = axes[static_cast<size_t>(i)][idx[static_cast<size_t>(i)]];
    for (Index i = n - 1; i >= 0; --i) {  // last axis fastest
      if (++idx[static_cast<size_t>(i)] < axes[static_cast<size_t>(i)].size()) break;
      idx[static_cast<size_t>(i)] = 0;
    }
    if (!Contains(X0, x) || (options.clip && !Contains(*options.clip, x))) continue;
    MpcSolution sol;
    try {
      sol = SolveMpc(mpqp, x, nullptr, &solver);
    } catch (const InfeasibleError&) {
      continue;
    }
    if (options.terminal_set && !Contains(*options.terminal_set, mpqp.Predict(x, sol.U).back())) continue;
    std::optional<Vector> grad;
    if (options.gradients) {
      const ValueGradient g = ComputeValueGradient(mpqp, sol, x);
      if (!g.degenerate) {
        grad = g.gradient;
      } else if (report) {
        ++report->degenerate_gradients;
      }
    }
    data.Add(x, sol.value, grad, SampleSource::kGrid, -1, 0.0, ActiveSetId(sol.active_set));
  }
  return data;
}

}  // namespace clqr
