#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "clqr/datagen.hpp"

namespace clqr {

inline constexpr double kBiasBound = 1e-6;

/// Ĵ(x) = xᵀP*x + Σᵢ rᵢ·max(0, Wᵢx + bᵢ)², one hidden layer of M units.
struct PwqNetwork {
  Matrix W;  // M×n
  Vector b;  // M
  Vector r;  // M
  Matrix Pstar;
  bool quadratic_term = true;  // false drops xᵀP*x (baseline architecture; no exactness near 0)
  nlohmann::json metadata = nlohmann::json::object();

  Index width() const { return W.rows(); }
  Index n() const { return Pstar.rows(); }
  /// P* if the quadratic term is enabled, else zero.
  Matrix Base() const { return quadratic_term ? Pstar : Matrix::Zero(n(), n()); }
  /// Throws ValidationError if r < 0 or b > −kBiasBound anywhere, ConfigError on dimensions.
  void Check() const;
};

/// Sorted indices of the active units.
using ActivationPattern = std::vector<int>;

/// Ĵ restricted to one activation pattern: xᵀPx + qᵀx + v.
struct RegionQuadratic {
  Matrix P;
  Vector q;
  double v = 0.0;

  double operator()(const Vector& x) const { return x.dot(P * x) + q.dot(x) + v; }
  Vector Gradient(const Vector& x) const { return 2.0 * P * x + q; }
};

double Evaluate(const PwqNetwork& net, const Vector& x);
Vector GradientX(const PwqNetwork& net, const Vector& x);
/// {i : Wᵢz + bᵢ > 1e-12}.
ActivationPattern Pattern(const PwqNetwork& net, const Vector& z);
RegionQuadratic RegionCoefficients(const PwqNetwork& net, const ActivationPattern& pattern);
std::string PatternId(const ActivationPattern& pattern);

/// Radius of the ball around the origin on which no unit is active: minᵢ −bᵢ/‖Wᵢ‖.
double InactiveRadius(const PwqNetwork& net);

enum class Optimizer { kGradientDescent, kAdam };
std::string ToString(Optimizer o);
Optimizer OptimizerFromString(const std::string& s);

struct TrainConfig {
  int width = 15;
  double learning_rate = 0.1;
  int epochs = 15000;
  int starts = 8;
  double warmup_fraction = 0.1;
  std::uint64_t seed = 1;
  Optimizer optimizer = Optimizer::kAdam;
  bool quadratic_term = true;
  int log_every = 1;       // loss is recorded every `log_every` epochs
  double target_mse = 0.0; // > 0 stops as soon as the mean squared error reaches it
};

struct TrainingLog {
  std::vector<double> loss;         // mean squared error in the original units
  std::vector<double> start_losses; // after warm-up, one per start
  int best_start = 0;
  int epochs_run = 0;       // epochs of the returned start
  bool reached_target = false;
  double final_mse = 0.0;
};

/// Full-batch training of the mean squared error on (state, value) pairs. Data are rescaled
/// to unit range internally; r = r̄² and b is clipped to ≤ −kBiasBound after every step.
/// Multi-start: every start runs the warm-up epochs and the best one continues.
/// Throws ConvergenceError on a non-finite loss.
PwqNetwork Train(const TrainingSet& data, const Matrix& Pstar, const TrainConfig& config, TrainingLog* log = nullptr);

double MeanSquaredError(const PwqNetwork& net, const TrainingSet& data);

struct ConvexityReport {
  bool pass = true;
  bool structural = true;  // r ≥ 0 and b ≤ −kBiasBound
  double worst_slack = 0.0;
  Vector witness_x1;
  Vector witness_x2;
  std::string message;
};

/// First-order condition Ĵ(x₂) − Ĵ(x₁) − ∇Ĵ(x₁)ᵀ(x₂ − x₁) ≥ −1e-9 on `trials` random pairs
/// drawn uniformly from the box ‖x‖∞ ≤ radius.
ConvexityReport CheckConvexity(const PwqNetwork& net, int trials, std::uint64_t seed, double radius);

nlohmann::json ToJson(const PwqNetwork& net);
PwqNetwork NetworkFromJson(const nlohmann::json& j);
void SaveNetwork(const PwqNetwork& net, const std::string& path);
PwqNetwork LoadNetwork(const std::string& path);

}  // namespace clqr
