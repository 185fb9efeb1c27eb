#include "clqr/certifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "clqr/polytope.hpp"

namespace clqr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<int> ParseActiveSet(const std::string& id) {
  std::vector<int> out;
  if (id == "-") return out;
  std::stringstream ss(id);
  std::string tok;
  while (std::getline(ss, tok, '.')) out.push_back(std::stoi(tok));
  return out;
}

double Ratio(const PwqNetwork& net, const Matrix& Q, const Vector& x) { return 2.0 * Evaluate(net, x) / x.dot(Q * x); }

Vector RatioGradient(const PwqNetwork& net, const Matrix& Q, const Vector& x) {
  const double j = Evaluate(net, x);
  const double q = x.dot(Q * x);
  return 2.0 * (GradientX(net, x) * q - j * 2.0 * (Q * x)) / (q * q);
}

Vector ProjectOnto(const Matrix& G, const Vector& h, const Vector& y) {
  if (G.rows() == 0 || (G * y - h).maxCoeff() <= 0.0) return y;
  const Index n = y.size();
  const QpResult r = SolveQp({2.0 * Matrix::Identity(n, n), -2.0 * y, G, h});
  if (!r.optimal()) throw InternalError("projection QP ended with status " + ToString(r.status));
  return r.x;
}

// Scales x along its ray so that lo ≤ Ĵ ≤ hi (Ĵ is increasing along rays from the origin).
Vector ScaleIntoBand(const PwqNetwork& net, const Vector& x, double lo, double hi) {
  const double j = Evaluate(net, x);
  if (j >= lo && j <= hi) return x;
  const double target = j > hi ? hi : lo;
  double a = 0.0, b = 1.0;
  if (j < lo) {
    while (Evaluate(net, b * x) < target) b *= 2.0;
  }
  for (int k = 0; k < 100; ++k) {
    const double mid = 0.5 * (a + b);
    (Evaluate(net, mid * x) > target ? b : a) = mid;
  }
  return (j > hi ? a : b) * x;
}

std::vector<Vector> Directions(Index n, int count, std::uint64_t seed) {
  std::vector<Vector> dirs;
  if (n == 2) {
    for (int k = 0; k < count; ++k) {
      const double t = 2.0 * M_PI * k / count;
      dirs.push_back((Vector(2) << std::cos(t), std::sin(t)).finished());
    }
    return dirs;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  for (int k = 0; k < count; ++k) {
    Vector d = Vector::NullaryExpr(n, [&] { return gauss(rng); });
    dirs.push_back(d.normalized());
  }
  return dirs;
}

}  // namespace

std::string RegionId(const PwqNetwork& net, const std::string& active_set, const Vector& x) {
  return active_set + "|" + PatternId(Pattern(net, x));
}

ErrorStats EmpiricalErrors(const PwqNetwork& net, const TrainingSet& data) {
  if (data.n != net.n()) throw ConfigError("data dimension does not match the network");
  ErrorStats stats;
  stats.per_sample.reserve(data.size());
  bool any = false;
  for (size_t i = 0; i < data.size(); ++i) {
    const Vector& x = data.states[i];
    SampleError s{0.0, kNaN, kNaN, data.values[i], {}};
    if (data.active_sets[i].empty()) throw ConfigError("sample " + std::to_string(i) + " has no active set");
    s.region = RegionId(net, data.active_sets[i], x);
    if (data.values[i] <= kNearOriginValue) {
      ++stats.excluded;
      stats.per_sample.push_back(s);
      continue;
    }
    any = true;
    s.abs_error = std::abs(Evaluate(net, x) / data.values[i] - 1.0);
    stats.e_bar = std::max(stats.e_bar, s.abs_error);
    if (data.gradients[i]) {
      s.grad_error = (GradientX(net, x) - *data.gradients[i]).norm() / data.values[i];
      s.beta = data.gradients[i]->norm() / data.values[i];
      stats.e_grad_bar = std::max(stats.e_grad_bar, s.grad_error);
    } else {
      ++stats.missing_gradients;
    }
    stats.per_sample.push_back(s);
  }
  if (!any) throw ValidationError("every sample lies at the origin (J* <= 1e-10); cannot certify");
  return stats;
}

void CompleteSamples(TrainingSet& data, const MpqpData& mpqp) {
  ActiveSetSolver solver;
  for (size_t i = 0; i < data.size(); ++i) {
    if (data.gradients[i] && !data.active_sets[i].empty()) continue;
    const MpcSolution sol = SolveMpc(mpqp, data.states[i], nullptr, &solver);
    if (data.active_sets[i].empty()) data.active_sets[i] = ActiveSetId(sol.active_set);
    if (!data.gradients[i]) {
      const ValueGradient g = ComputeValueGradient(mpqp, sol, data.states[i]);
      if (!g.degenerate) data.gradients[i] = g.gradient;
    }
  }
}

namespace {

TrainingSet MakeProbes(const MpqpData& mpqp, const Polyhedron& domain, const ProbeOptions& opt) {
  if (opt.spacing > 0.0) {
    if (mpqp.n > 3) throw ConfigError("probe grids are limited to n <= 3; use a probe count");
    GridOptions g;
    g.spacing = opt.spacing;
    g.clip = opt.clip;
    g.terminal_set = opt.terminal_set;
    g.gradients = true;
    return GenerateGrid(mpqp, domain, g);
  }
  TrainingSet probes;
  probes.n = mpqp.n;
  std::mt19937_64 rng(opt.seed);
  const BoundingBox box = ComputeBoundingBox(domain);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ActiveSetSolver solver;
  for (long long draws = 0; static_cast<int>(probes.size()) < opt.count && draws < 100LL * opt.count; ++draws) {
    Vector x(mpqp.n);
    for (Index i = 0; i < x.size(); ++i) x[i] = box.lower[i] + unit(rng) * (box.upper[i] - box.lower[i]);
    if (!Contains(domain, x, 0.0) || (opt.clip && !Contains(*opt.clip, x))) continue;
    MpcSolution sol;
    try {
      sol = SolveMpc(mpqp, x, nullptr, &solver);
    } catch (const InfeasibleError&) {
      continue;
    }
    if (opt.terminal_set && !Contains(*opt.terminal_set, mpqp.Predict(x, sol.U).back())) continue;
    const ValueGradient g = ComputeValueGradient(mpqp, sol, x);
    probes.Add(x, sol.value, g.degenerate ? std::nullopt : std::optional<Vector>(g.gradient), SampleSource::kTesting,
               -1, 0.0, ActiveSetId(sol.active_set));
  }
  return probes;
}

}  // namespace

ZetaResult ZetaBound(const PwqNetwork& net, const TrainingSet& data_in, const MpqpData& mpqp,
                     const Polyhedron& domain, const ProbeOptions& popt) {
  TrainingSet data = data_in;
  CompleteSamples(data, mpqp);
  const TrainingSet probes = MakeProbes(mpqp, domain, popt);
  ZetaResult res;
  res.probes = static_cast<int>(probes.size());
  const double cover = popt.spacing > 0.0 ? 0.5 * popt.spacing * std::sqrt(static_cast<double>(mpqp.n)) : 0.0;

  auto beta_of = [&](size_t i) {
    if (!data.gradients[i] || data.values[i] <= kNearOriginValue) return kNaN;
    return data.gradients[i]->norm() / data.values[i];
  };

  struct Work {
    std::vector<size_t> samples;
    std::vector<size_t> probes;
    std::vector<double> nearest;  // per probe, squared
    double beta = 0.0;            // largest β among samples with a gradient
    bool usable = false;          // holds a sample with a gradient
  };
  std::map<std::string, Work> work;
  auto add_sample = [&](Work& w, size_t i) {
    w.samples.push_back(i);
    const double b = beta_of(i);
    if (!std::isnan(b)) {
      w.usable = true;
      w.beta = std::max(w.beta, b);
    }
    for (size_t k = 0; k < w.probes.size(); ++k) {
      w.nearest[k] = std::min(w.nearest[k], (data.states[i] - probes.states[w.probes[k]]).squaredNorm());
    }
  };
  auto radius = [&](const Work& w) {
    double d = 0.0;
    for (double v : w.nearest) d = std::max(d, v);
    return std::sqrt(d) + (w.probes.empty() ? 0.0 : cover);
  };
  auto augment = [&](Work& w, size_t k) {
    const size_t p = w.probes[k];
    data.Add(probes.states[p], probes.values[p], probes.gradients[p], SampleSource::kTesting, -1, 0.0,
             probes.active_sets[p]);
    ++res.augmented;
    add_sample(w, data.size() - 1);
  };

  for (size_t p = 0; p < probes.size(); ++p) {
    Work& w = work[RegionId(net, probes.active_sets[p], probes.states[p])];
    w.probes.push_back(p);
    w.nearest.push_back(std::numeric_limits<double>::infinity());
  }
  for (size_t i = 0; i < data.size(); ++i) add_sample(work[RegionId(net, data.active_sets[i], data.states[i])], i);

  auto is_exact = [](const std::string& id) { return id == "-|-"; };
  for (auto& [id, w] : work) {
    if (is_exact(id) || w.usable || w.probes.empty() || !popt.augment) continue;
    for (size_t k = 0; k < w.probes.size() && !w.usable; ++k) {
      if (probes.gradients[w.probes[k]] && probes.values[w.probes[k]] > kNearOriginValue) augment(w, k);
    }
  }
  if (popt.augment) {
    for (auto& [id, w] : work) {
      if (is_exact(id) || !w.usable) continue;
      while (w.beta * radius(w) > popt.max_beta_d && res.augmented < popt.max_augmented) {
        const size_t k = static_cast<size_t>(std::max_element(w.nearest.begin(), w.nearest.end()) - w.nearest.begin());
        if (w.nearest[k] == 0.0) break;
        augment(w, k);
      }
    }
  }
  res.errors = EmpiricalErrors(net, data);

  double L_fallback = 0.0;
  std::vector<RegionInfo*> degenerate;
  std::map<std::string, RegionInfo> regions;
  for (auto& [id, w] : work) {
    RegionInfo& r = regions[id];
    r.id = id;
    r.samples = static_cast<int>(w.samples.size());
    r.probes = static_cast<int>(w.probes.size());
    r.exact = is_exact(id);
    r.augmented = std::any_of(w.samples.begin(), w.samples.end(), [&](size_t i) { return i >= data_in.size(); });
    r.d = w.samples.empty() ? std::numeric_limits<double>::infinity() : radius(w);
    if (w.samples.empty() || !w.usable) {
      if (!r.exact) {
        ++res.uncovered;
        res.warnings.push_back("region " + id + " has no sample with a gradient");
      }
      continue;
    }
    const size_t bar = id.find('|');
    try {
      r.L = 2.0 * MaxEigenvalue(RegionHessian(mpqp, ParseActiveSet(id.substr(0, bar)), net.Pstar));
      L_fallback = std::max(L_fallback, r.L);
    } catch (const DegeneracyError&) {
      degenerate.push_back(&r);
    }
    r.L_hat = 2.0 * MaxEigenvalue(RegionCoefficients(net, Pattern(net, data.states[w.samples.front()])).P);
  }
  for (RegionInfo* r : degenerate) {
    r->L = L_fallback;
    res.warnings.push_back("region " + r->id + " has dependent active constraints; L set to the largest regular value");
  }

  const double e_bar = res.errors.e_bar;
  const double eg_bar = res.errors.e_grad_bar;
  std::string worst_sparse;
  double worst_bd = 0.0;
  int skipped = 0;
  for (const auto& [id, w] : work) {
    RegionInfo& r = regions[id];
    if (r.exact || !w.usable) continue;
    for (size_t i : w.samples) {
      const double beta = beta_of(i);
      if (std::isnan(beta)) {
        if (data.values[i] > kNearOriginValue) ++skipped;
        continue;
      }
      const double bd = beta * r.d;
      if (bd >= 1.0) {
        if (bd > worst_bd) worst_bd = bd, worst_sparse = id;
        continue;
      }
      const double z = (e_bar + eg_bar * r.d + (r.L_hat + r.L) * r.d * r.d / (2.0 * data.values[i])) / (1.0 - bd);
      r.zeta = std::max(r.zeta, z);
      res.zeta = std::max(res.zeta, z);
    }
  }
  if (skipped > 0) res.warnings.push_back(std::to_string(skipped) + " samples without a gradient left out of zeta");
  if (!worst_sparse.empty()) {
    std::ostringstream os;
    os << "samples too sparse: beta*d = " << worst_bd << " >= 1 in region " << worst_sparse;
    throw ValidationError(os.str());
  }
  res.zeta = std::max(res.zeta, e_bar);
  for (auto& [id, r] : regions) res.regions.push_back(r);
  return res;
}

double ConditionRhs(const PwqNetwork& net, const Matrix& Q, const Polyhedron& X0, std::optional<double> chi,
                    const RhsOptions& opt) {
  const Index n = net.n();
  const BoundingBox box = ComputeBoundingBox(X0);
  const double size = (box.upper - box.lower).norm();
  const double eps_x = opt.min_radius * size;
  const double eps_j = chi ? opt.min_radius * opt.min_radius * *chi : 0.0;

  auto project = [&](const Vector& y) -> Vector {
    if (chi) return ScaleIntoBand(net, y, eps_j, *chi);
    Vector z = ProjectOnto(X0.H, X0.h, y);
    if (z.norm() < eps_x) z = (z.norm() > 0.0 ? z.normalized() : Vector::Unit(n, 0)) * eps_x;
    return z;
  };

  std::vector<std::pair<double, Vector>> starts;
  for (const Vector& d : Directions(n, opt.directions, opt.seed)) {
    double reach = RayExit(X0, d);
    if (!std::isfinite(reach)) throw ConfigError("condition domain must be bounded");
    for (int k = 1; k <= opt.radii; ++k) {
      const Vector x = project(reach * static_cast<double>(k) / opt.radii * d);
      starts.emplace_back(Ratio(net, Q, x), x);
    }
  }
  std::stable_sort(starts.begin(), starts.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  double best = starts.empty() ? 0.0 : starts.front().first;
  const int polish = std::min<int>(opt.polished, static_cast<int>(starts.size()));
  for (int s = 0; s < polish; ++s) {
    Vector x = starts[static_cast<size_t>(s)].second;
    double f = starts[static_cast<size_t>(s)].first;
    double step = 0.1 * size;
    for (int it = 0; it < opt.ascent_steps && step > 1e-12 * size; ++it) {
      const Vector g = RatioGradient(net, Q, x);
      if (g.norm() == 0.0) break;
      const Vector y = project(x + step * g.normalized());
      const double fy = Ratio(net, Q, y);
      if (fy > f) {
        x = y, f = fy;
        step *= 1.5;
      } else {
        step *= 0.5;
      }
    }
    best = std::max(best, f);
  }
  return best;
}

double SublevelThreshold(const PwqNetwork& net, const Polyhedron& X0_in, int samples_per_facet, std::uint64_t seed) {
  const Polyhedron X0 = RemoveRedundant(X0_in);
  const Index n = X0.dim();
  std::mt19937_64 rng(seed);
  const std::vector<Vector> interior = SampleUniform(X0, samples_per_facet, rng);
  double best = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < X0.num_rows(); ++k) {
    const Vector a = X0.H.row(k).transpose();
    const double an = a.squaredNorm();
    if (an == 0.0) continue;
    Vector best_x;
    double best_k = std::numeric_limits<double>::infinity();
    for (const Vector& x : interior) {
      const Vector z = x + (X0.h[k] - a.dot(x)) / an * a;
      if (!Contains(X0, z, 1e-9)) continue;
      const double j = Evaluate(net, z);
      if (j < best_k) best_k = j, best_x = z;
    }
    if (best_x.size() == 0) continue;
    // Projected gradient descent on the facet.
    Matrix G(X0.num_rows() + 1, n);
    Vector h(X0.num_rows() + 1);
    G << X0.H, -a.transpose();
    h << X0.h, -X0.h[k];
    Vector x = best_x;
    double f = best_k;
    double step = 0.1 * std::sqrt(X0.h.cwiseAbs().maxCoeff());
    for (int it = 0; it < 500 && step > 1e-14; ++it) {
      const Vector g = GradientX(net, x);
      const Vector gt = g - a.dot(g) / an * a;
      if (gt.norm() == 0.0) break;
      const Vector y = ProjectOnto(G, h, x - step * gt.normalized());
      const double fy = Evaluate(net, y);
      if (fy < f) {
        x = y, f = fy;
        step *= 1.5;
      } else {
        step *= 0.5;
      }
    }
    best = std::min(best, f);
  }
  if (!std::isfinite(best)) throw ConfigError("X0 has no boundary facets");
  return best;
}

int AuditSublevelSet(const PwqNetwork& net, const Polyhedron& X0, double chi, int count, std::uint64_t seed) {
  const BoundingBox box = ComputeBoundingBox(X0);
  const Vector mid = 0.5 * (box.lower + box.upper);
  const Vector half = box.upper - box.lower;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  int bad = 0;
  for (int k = 0; k < count; ++k) {
    const Vector x = mid + half.cwiseProduct(Vector::NullaryExpr(mid.size(), [&] { return unit(rng); }));
    if (Evaluate(net, x) < chi && !Contains(X0, x, 1e-9)) ++bad;
  }
  return bad;
}

std::string ToString(CertifyMode m) { return m == CertifyMode::kTheorem9 ? "theorem9" : "corollary10"; }

CertifyMode CertifyModeFromString(const std::string& s) {
  if (s == "theorem9") return CertifyMode::kTheorem9;
  if (s == "corollary10") return CertifyMode::kCorollary10;
  throw ConfigError("unknown certification mode '" + s + "' (expected theorem9 or corollary10)");
}

CertificationReport Certify(const PwqNetwork& net, TrainingSet data, const ProblemInstance& instance,
                            const MpqpData& mpqp, const CertifyOptions& options) {
  CertificationReport rep;
  rep.mode = options.mode;
  const ZetaResult z = ZetaBound(net, data, mpqp, instance.region_of_interest, options.probes);
  rep.e_bar = z.errors.e_bar;
  rep.e_grad_bar = z.errors.e_grad_bar;
  rep.zeta = z.zeta;
  rep.regions = z.regions;
  rep.augmented = z.augmented;
  rep.probes = z.probes;
  rep.coverage_clean = z.uncovered == 0;
  rep.warnings = z.warnings;
  rep.condition_lhs = rep.zeta > 0.0 ? (1.0 - rep.zeta * rep.zeta) / rep.zeta : std::numeric_limits<double>::infinity();
  if (options.mode == CertifyMode::kCorollary10) {
    rep.chi = SublevelThreshold(net, instance.region_of_interest, options.boundary_samples, options.rhs.seed);
    rep.omega_violations = AuditSublevelSet(net, instance.region_of_interest, *rep.chi, 10000, options.rhs.seed);
  }
  rep.condition_rhs = ConditionRhs(net, instance.system.Q, instance.region_of_interest, rep.chi, options.rhs);
  rep.pass = rep.condition_lhs > rep.condition_rhs;
  rep.notes.push_back("empirically verified, not formally proven: sup of 2J^/(x'Qx) is a sampled lower bound");
  rep.notes.push_back("d per region is the covering radius of same-region samples over the probe set (estimate)");
  if (z.augmented > 0) {
    rep.notes.push_back(std::to_string(z.augmented) + " probes added as testing points in regions without samples");
  }
  if (z.errors.missing_gradients > 0) {
    rep.notes.push_back(std::to_string(z.errors.missing_gradients) + " samples without a gradient (degenerate)");
  }
  return rep;
}

nlohmann::json ToJson(const CertificationReport& r) {
  nlohmann::json j;
  j["mode"] = ToString(r.mode);
  j["e_bar"] = r.e_bar;
  j["e_grad_bar"] = r.e_grad_bar;
  j["zeta"] = r.zeta;
  j["condition_lhs"] = std::isfinite(r.condition_lhs) ? nlohmann::json(r.condition_lhs) : nlohmann::json("inf");
  j["condition_rhs"] = r.condition_rhs;
  j["pass"] = r.pass;
  j["coverage_clean"] = r.coverage_clean;
  j["chi"] = r.chi ? nlohmann::json(*r.chi) : nlohmann::json(nullptr);
  j["omega_violations"] = r.omega_violations;
  j["augmented"] = r.augmented;
  j["probes"] = r.probes;
  nlohmann::json regions = nlohmann::json::array();
  for (const RegionInfo& g : r.regions) {
    regions.push_back({{"id", g.id}, {"samples", g.samples}, {"probes", g.probes}, {"d", g.d}, {"L", g.L},
                       {"L_hat", g.L_hat}, {"zeta", g.zeta}, {"augmented", g.augmented}, {"exact", g.exact}});
  }
  j["regions"] = regions;
  j["notes"] = r.notes;
  j["warnings"] = r.warnings;
  return j;
}

std::string ToText(const CertificationReport& r) {
  std::ostringstream os;
  os.precision(6);
  os << "mode            " << ToString(r.mode) << "\n"
     << "e_bar           " << r.e_bar << "\n"
     << "e_grad_bar      " << r.e_grad_bar << "\n"
     << "zeta            " << r.zeta << "\n"
     << "condition lhs   " << r.condition_lhs << "   (1 - zeta^2)/zeta\n"
     << "condition rhs   " << r.condition_rhs << "   2 sup J^/(x'Qx)\n";
  if (r.chi) os << "chi             " << *r.chi << "   (Omega violations: " << r.omega_violations << ")\n";
  os << "probes          " << r.probes << " (" << r.augmented << " added as testing points)\n"
     << "coverage        " << (r.coverage_clean ? "clean" : "regions without samples") << "\n"
     << "verdict         " << (r.pass ? "PASS" : "FAIL") << "\n\n"
     << "region                                   samples  probes  d          L          L_hat      zeta\n";
  for (const RegionInfo& g : r.regions) {
    os << g.id.substr(0, 40) << std::string(41 - std::min<size_t>(40, g.id.size()), ' ') << g.samples << "\t "
       << g.probes << "\t " << g.d << "\t" << g.L << "\t" << g.L_hat << "\t" << g.zeta << (g.exact ? "  exact" : "")
       << "\n";
  }
  for (const std::string& n : r.notes) os << "note: " << n << "\n";
  for (const std::string& w : r.warnings) os << "warning: " << w << "\n";
  return os.str();
}

}  // namespace clqr
