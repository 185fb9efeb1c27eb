#include "clqr/pwq_net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace clqr {

using nlohmann::json;

namespace {

constexpr double kPatternTol = 1e-12;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

// Parameters in scaled coordinates x̃ = x/sx, J̃ = J/sJ, with r = rbar².
struct Params {
  Matrix W;
  Vector b;
  Vector rbar;
};

struct Moments {
  Params m;
  Params v;
  int t = 0;
};

struct Batch {
  Matrix X;       // S×n, scaled states
  Vector target;  // scaled values
  Vector base;    // x̃ᵀP̃x̃ per sample
};

double Loss(const Params& p, const Batch& data, Params* grad) {
  const Index S = data.X.rows();
  Matrix Z = data.X * p.W.transpose();
  Z.rowwise() += p.b.transpose();
  const Matrix A = Z.cwiseMax(0.0);
  const Vector r = p.rbar.cwiseProduct(p.rbar);
  const Vector res = data.base + A.cwiseProduct(A) * r - data.target;
  const double loss = res.squaredNorm() / static_cast<double>(S);
  if (grad != nullptr) {
    const Vector g = (2.0 / static_cast<double>(S)) * res;
    const Vector dr = A.cwiseProduct(A).transpose() * g;
    grad->rbar = 2.0 * p.rbar.cwiseProduct(dr);
    const Matrix dZ = 2.0 * A.cwiseProduct(g * r.transpose());
    grad->W = dZ.transpose() * data.X;
    grad->b = dZ.colwise().sum().transpose();
  }
  return loss;
}

void Project(Params& p) { p.b = p.b.cwiseMin(-kBiasBound); }

void Step(Params& p, const Params& g, const TrainConfig& cfg, Moments& mom) {
  const double a = cfg.learning_rate;
  if (cfg.optimizer == Optimizer::kGradientDescent) {
    p.W -= a * g.W;
    p.b -= a * g.b;
    p.rbar -= a * g.rbar;
  } else {
    ++mom.t;
    const double c1 = 1.0 - std::pow(kAdamBeta1, mom.t);
    const double c2 = 1.0 - std::pow(kAdamBeta2, mom.t);
    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
      m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
      v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * grad.cwiseProduct(grad);
      param.array() -= a * (m.array() / c1) / ((v.array() / c2).sqrt() + kAdamEps);
    };
    update(p.W, g.W, mom.m.W, mom.v.W);
    update(p.b, g.b, mom.m.b, mom.v.b);
    update(p.rbar, g.rbar, mom.m.rbar, mom.v.rbar);
  }
  Project(p);
}

Moments ZeroMoments(const Params& p) {
  Moments mom;
  mom.m = {Matrix::Zero(p.W.rows(), p.W.cols()), Vector::Zero(p.b.size()), Vector::Zero(p.rbar.size())};
  mom.v = mom.m;
  return mom;
}

// Rows uniform on the sphere of radius 1/√n; each bias uniform in [−reach, −kBiasBound], where
// reach is the largest pre-activation the row attains on the data, so every unit starts active
// somewhere. A row that is nowhere positive on the data is flipped first.
Params Initialize(Index M, const Matrix& X, std::mt19937_64& rng) {
  const Index n = X.cols();
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Params p{Matrix(M, n), Vector(M), Vector(M)};
  for (Index i = 0; i < M; ++i) {
    Vector w(n);
    for (Index j = 0; j < n; ++j) w[j] = gauss(rng);
    w = w.normalized() / std::sqrt(static_cast<double>(n));
    const Vector proj = X * w;
    double reach = proj.maxCoeff();
    if (reach <= 0.0) {
      w = -w;
      reach = -proj.minCoeff();
    }
    p.W.row(i) = w.transpose();
    p.b[i] = -kBiasBound - unit(rng) * std::max(reach - kBiasBound, 0.0);
    p.rbar[i] = 0.1 * unit(rng);
  }
  return p;
}

void Diverged(int epoch, double loss, const TrainConfig& cfg) {
  std::ostringstream os;
  os << "training loss became " << loss << " at epoch " << epoch << " (learning rate " << cfg.learning_rate
     << ", optimizer " << ToString(cfg.optimizer) << "); lower the learning rate";
  throw ConvergenceError(os.str());
}

}  // namespace

void PwqNetwork::Check() const {
  const Index M = W.rows();
  if (Pstar.rows() != Pstar.cols()) throw ConfigError("network: P* must be square");
  if (W.cols() != Pstar.rows() && M > 0) throw ConfigError("network: W must have n columns");
  if (b.size() != M || r.size() != M) throw ConfigError("network: b and r must have M entries");
  for (Index i = 0; i < M; ++i) {
    if (!(r[i] >= 0.0)) throw ValidationError("network: r[" + std::to_string(i) + "] is negative");
    if (!(b[i] <= -kBiasBound)) throw ValidationError("network: b[" + std::to_string(i) + "] exceeds -1e-6");
  }
}

double Evaluate(const PwqNetwork& net, const Vector& x) {
  double v = net.quadratic_term ? x.dot(net.Pstar * x) : 0.0;
  for (Index i = 0; i < net.width(); ++i) {
    const double z = net.W.row(i).dot(x) + net.b[i];
    if (z > 0.0) v += net.r[i] * z * z;
  }
  return v;
}

Vector GradientX(const PwqNetwork& net, const Vector& x) {
  Vector g = net.quadratic_term ? Vector(2.0 * net.Pstar * x) : Vector::Zero(x.size());
  for (Index i = 0; i < net.width(); ++i) {
    const double z = net.W.row(i).dot(x) + net.b[i];
    if (z > 0.0) g += 2.0 * net.r[i] * z * net.W.row(i).transpose();
  }
  return g;
}

ActivationPattern Pattern(const PwqNetwork& net, const Vector& z) {
  ActivationPattern p;
  for (Index i = 0; i < net.width(); ++i) {
    if (net.W.row(i).dot(z) + net.b[i] > kPatternTol) p.push_back(static_cast<int>(i));
  }
  return p;
}

RegionQuadratic RegionCoefficients(const PwqNetwork& net, const ActivationPattern& pattern) {
  RegionQuadratic rq{net.Base(), Vector::Zero(net.n()), 0.0};
  for (int i : pattern) {
    const Vector w = net.W.row(i).transpose();
    rq.P += net.r[i] * w * w.transpose();
    rq.q += 2.0 * net.r[i] * net.b[i] * w;
    rq.v += net.r[i] * net.b[i] * net.b[i];
  }
  return rq;
}

std::string PatternId(const ActivationPattern& pattern) {
  if (pattern.empty()) return "-";
  std::ostringstream os;
  for (size_t i = 0; i < pattern.size(); ++i) os << (i ? "." : "") << pattern[i];
  return os.str();
}

double InactiveRadius(const PwqNetwork& net) {
  double rho = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < net.width(); ++i) {
    const double norm = net.W.row(i).norm();
    if (norm > 0.0) rho = std::min(rho, -net.b[i] / norm);
  }
  return rho;
}

std::string ToString(Optimizer o) { return o == Optimizer::kAdam ? "adam" : "gd"; }

Optimizer OptimizerFromString(const std::string& s) {
  if (s == "adam") return Optimizer::kAdam;
  if (s == "gd") return Optimizer::kGradientDescent;
  throw ConfigError("unknown optimizer '" + s + "' (expected adam or gd)");
}

double MeanSquaredError(const PwqNetwork& net, const TrainingSet& data) {
  if (data.empty()) return 0.0;
  double sum = 0.0;
  for (size_t s = 0; s < data.size(); ++s) {
    const double e = Evaluate(net, data.states[s]) - data.values[s];
    sum += e * e;
  }
  return sum / static_cast<double>(data.size());
}

PwqNetwork Train(const TrainingSet& data, const Matrix& Pstar, const TrainConfig& config, TrainingLog* log) {
  if (data.empty()) throw ConfigError("training set is empty");
  if (config.width < 0 || config.epochs < 0 || config.starts < 1) throw ConfigError("invalid training config");
  const Index n = data.n;
  const Index S = static_cast<Index>(data.size());
  const Index M = config.width;

  double sx = 0.0, sJ = 0.0;
  for (size_t s = 0; s < data.size(); ++s) {
    sx = std::max(sx, data.states[s].cwiseAbs().maxCoeff());
    sJ = std::max(sJ, std::abs(data.values[s]));
  }
  if (sx == 0.0) sx = 1.0;
  if (sJ == 0.0) sJ = 1.0;

  const Matrix Pt = config.quadratic_term ? Matrix(Pstar * (sx * sx / sJ)) : Matrix::Zero(n, n);
  Batch batch{Matrix(S, n), Vector(S), Vector(S)};
  for (Index s = 0; s < S; ++s) {
    const Vector x = data.states[static_cast<size_t>(s)] / sx;
    batch.X.row(s) = x.transpose();
    batch.target[s] = data.values[static_cast<size_t>(s)] / sJ;
    batch.base[s] = x.dot(Pt * x);
  }

  TrainingLog local;
  TrainingLog& lg = log ? *log : local;
  lg = TrainingLog{};
  const double to_original = sJ * sJ;
  const int warmup = std::min(config.epochs, static_cast<int>(std::ceil(config.warmup_fraction * config.epochs)));
  const int every = std::max(1, config.log_every);

  const double target = config.target_mse / to_original;
  std::mt19937_64 rng(config.seed);
  Params best;
  Moments best_mom;
  std::vector<double> best_log;
  double best_loss = std::numeric_limits<double>::infinity();
  int epoch = 0;
  // Runs epochs [from, to) on p; returns true when the target was reached.
  auto run = [&](Params& p, Moments& mom, std::vector<double>& trace, int from, int to) {
    Params grad;
    for (epoch = from; epoch < to; ++epoch) {
      const double loss = Loss(p, batch, &grad);
      if (!std::isfinite(loss)) Diverged(epoch, loss, config);
      if (epoch % every == 0) trace.push_back(loss * to_original);
      if (loss <= target) return true;
      Step(p, grad, config, mom);
    }
    return false;
  };
  for (int start = 0; start < config.starts && !lg.reached_target; ++start) {
    Params p = Initialize(M, batch.X, rng);
    Moments mom = ZeroMoments(p);
    std::vector<double> trace;
    const bool hit = run(p, mom, trace, 0, warmup);
    const double loss = Loss(p, batch, nullptr);
    if (!std::isfinite(loss)) Diverged(epoch, loss, config);
    lg.start_losses.push_back(loss * to_original);
    if (loss < best_loss || hit) {
      best_loss = loss;
      best = p;
      best_mom = mom;
      best_log = std::move(trace);
      lg.best_start = start;
      lg.epochs_run = epoch;
      lg.reached_target = hit;
    }
  }
  if (!lg.reached_target) {
    lg.reached_target = run(best, best_mom, best_log, warmup, config.epochs);
    lg.epochs_run = epoch;
  }
  lg.loss = std::move(best_log);

  PwqNetwork net;
  net.W = best.W / sx;
  net.b = best.b;
  net.r = sJ * best.rbar.cwiseProduct(best.rbar);
  net.Pstar = Pstar;
  net.quadratic_term = config.quadratic_term;
  net.Check();
  lg.final_mse = MeanSquaredError(net, data);
  net.metadata = {{"epochs", config.epochs},
                  {"learning_rate", config.learning_rate},
                  {"optimizer", ToString(config.optimizer)},
                  {"starts", config.starts},
                  {"seed", config.seed},
                  {"samples", S},
                  {"epochs_run", lg.epochs_run},
                  {"final_mse", lg.final_mse}};
  return net;
}

ConvexityReport CheckConvexity(const PwqNetwork& net, int trials, std::uint64_t seed, double radius) {
  ConvexityReport rep;
  for (Index i = 0; i < net.width(); ++i) {
    if (!(net.r[i] >= 0.0) || !(net.b[i] <= -kBiasBound)) {
      rep.structural = false;
      rep.pass = false;
      rep.message = "unit " + std::to_string(i) + " violates r ≥ 0 or b ≤ -1e-6";
      break;
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-radius, radius);
  const Index n = net.n();
  for (int t = 0; t < trials; ++t) {
    Vector x1(n), x2(n);
    for (Index i = 0; i < n; ++i) x1[i] = unit(rng);
    for (Index i = 0; i < n; ++i) x2[i] = unit(rng);
    const double slack = Evaluate(net, x2) - Evaluate(net, x1) - GradientX(net, x1).dot(x2 - x1);
    if (slack < rep.worst_slack) {
      rep.worst_slack = slack;
      if (slack < -1e-9) {
        rep.pass = false;
        rep.witness_x1 = x1;
        rep.witness_x2 = x2;
        std::ostringstream os;
        os << "first-order condition fails by " << -slack << " between (" << x1.transpose() << ") and ("
           << x2.transpose() << ")";
        rep.message = os.str();
      }
    }
  }
  return rep;
}

json ToJson(const PwqNetwork& net) {
  return {{"width", net.width()},
          {"W", ToNested(net.W)},
          {"b", ToStdVector(net.b)},
          {"r", ToStdVector(net.r)},
          {"Pstar", ToNested(net.Pstar)},
          {"quadratic_term", net.quadratic_term},
          {"metadata", net.metadata}};
}

PwqNetwork NetworkFromJson(const json& j) {
  try {
    PwqNetwork net;
    net.Pstar = MatrixFromNested(j.at("Pstar").get<std::vector<std::vector<double>>>());
    net.W = MatrixFromNested(j.at("W").get<std::vector<std::vector<double>>>(), net.Pstar.rows());
    if (j.at("W").empty()) net.W.resize(0, net.Pstar.rows());
    net.b = VectorFromStd(j.at("b").get<std::vector<double>>());
    net.r = VectorFromStd(j.at("r").get<std::vector<double>>());
    net.quadratic_term = j.value("quadratic_term", true);
    if (j.contains("metadata")) net.metadata = j.at("metadata");
    if (j.contains("width") && j.at("width").get<Index>() != net.W.rows()) throw ConfigError("network: width field disagrees with W");
    net.Check();
    return net;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("network JSON: ") + e.what());
  }
}

void SaveNetwork(const PwqNetwork& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << ToJson(net).dump(2) << "\n";
}

PwqNetwork LoadNetwork(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  try {
    return NetworkFromJson(json::parse(in));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace clqr
