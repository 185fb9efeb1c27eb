#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "clqr/datagen.hpp"
#include "clqr/mpc.hpp"
#include "clqr/pwq_net.hpp"

namespace clqr {

/// Values at or below this are excluded from relative errors.
constexpr double kNearOriginValue = 1e-10;

struct SampleError {
  double abs_error = 0.0;  // |Ĵ/J* − 1|
  double grad_error;       // ‖∇Ĵ − ∇J*‖₂ / J*, NaN without a gradient
  double beta;             // ‖∇J*‖₂ / J*, NaN without a gradient
  double value = 0.0;      // J*
  std::string region;      // "<active set>|<pattern>"
};

struct ErrorStats {
  double e_bar = 0.0;
  double e_grad_bar = 0.0;
  int excluded = 0;             // J* ≤ kNearOriginValue
  int missing_gradients = 0;
  std::vector<SampleError> per_sample;  // aligned with the data
};

/// Throws ValidationError when every sample is near the origin, ConfigError on dimension
/// mismatch or missing active sets.
ErrorStats EmpiricalErrors(const PwqNetwork& net, const TrainingSet& data);

/// "<MPC active set id>|<network pattern id>"
std::string RegionId(const PwqNetwork& net, const std::string& active_set, const Vector& x);

/// Solves the MPC problem at samples lacking a gradient or active set and fills them in.
/// Samples whose gradient is degenerate keep none.
void CompleteSamples(TrainingSet& data, const MpqpData& mpqp);

struct ProbeOptions {
  double spacing = 0.0;  // > 0: probe grid over the domain's bounding box (n ≤ 3)
  int count = 2000;      // used when spacing is 0: uniform feasible probes
  std::uint64_t seed = 1;
  std::optional<Polyhedron> clip;
  std::optional<Polyhedron> terminal_set;
  bool augment = true;   // add probes as testing points (see ZetaBound)
  double max_beta_d = 0.5;
  int max_augmented = 1000000;
};

struct RegionInfo {
  std::string id;
  int samples = 0;
  int probes = 0;
  double d = 0.0;         // covering radius estimate
  double L = 0.0;         // 2·λ_max of the MPC region Hessian
  double L_hat = 0.0;     // 2·λ_max of the network region quadratic
  double zeta = 0.0;      // worst per-sample bound in this region
  bool augmented = false;
  bool exact = false;     // unconstrained-LQR region with all units inactive: Ĵ ≡ J*
};

struct ZetaResult {
  double zeta = 0.0;
  ErrorStats errors;      // including augmentation points
  std::vector<RegionInfo> regions;
  int augmented = 0;
  int uncovered = 0;      // regions met by probes without any sample (augment = false)
  int probes = 0;
  std::vector<std::string> warnings;
};

/// Eq.-24 style bound. Regions are (active set, pattern) pairs met by samples or probes; d of a
/// region is the largest distance from its probes to the nearest same-region sample plus the
/// probe covering radius (grid probes only). With `augment`, a probe becomes a testing point in
/// every region without a usable sample, and the farthest probe of a region is added while
/// β·d exceeds `max_beta_d`. Throws ValidationError("samples too sparse ...") when β·d ≥ 1
/// remains anywhere, naming the region.
ZetaResult ZetaBound(const PwqNetwork& net, const TrainingSet& data, const MpqpData& mpqp,
                     const Polyhedron& domain, const ProbeOptions& probes);

struct RhsOptions {
  int directions = 720;
  int radii = 10;
  int polished = 20;       // best starts refined by projected gradient ascent
  int ascent_steps = 200;
  double min_radius = 1e-6;  // excluded ball around the origin, relative to the domain size
  std::uint64_t seed = 1;
};

/// Empirical sup of 2Ĵ(x)/(xᵀQx) over the domain minus a small ball; a lower bound on the
/// true sup. With `chi` the domain is Ω = {Ĵ ≤ χ} instead of X₀.
double ConditionRhs(const PwqNetwork& net, const Matrix& Q, const Polyhedron& X0, std::optional<double> chi,
                    const RhsOptions& options = {});

/// χ = min of Ĵ over the boundary of X₀ (facet samples plus projected-gradient polish).
double SublevelThreshold(const PwqNetwork& net, const Polyhedron& X0, int samples_per_facet, std::uint64_t seed = 1);

/// Points with Ĵ < χ found outside X₀ among `count` samples of twice its bounding box.
int AuditSublevelSet(const PwqNetwork& net, const Polyhedron& X0, double chi, int count, std::uint64_t seed);

enum class CertifyMode { kTheorem9, kCorollary10 };
std::string ToString(CertifyMode m);
CertifyMode CertifyModeFromString(const std::string& s);

struct CertifyOptions {
  CertifyMode mode = CertifyMode::kTheorem9;
  ProbeOptions probes;
  RhsOptions rhs;
  int boundary_samples = 2000;
};

struct CertificationReport {
  CertifyMode mode = CertifyMode::kTheorem9;
  double e_bar = 0.0;
  double e_grad_bar = 0.0;
  double zeta = 0.0;
  double condition_lhs = 0.0;  // (1 − ζ²)/ζ
  double condition_rhs = 0.0;  // 2·sup Ĵ/(xᵀQx)
  bool pass = false;           // condition_lhs > condition_rhs
  bool coverage_clean = true;  // every probed region holds a sample
  std::optional<double> chi;
  int omega_violations = 0;
  int augmented = 0;
  int probes = 0;
  std::vector<RegionInfo> regions;
  std::vector<std::string> notes;
  std::vector<std::string> warnings;
};

CertificationReport Certify(const PwqNetwork& net, TrainingSet data, const ProblemInstance& instance,
                            const MpqpData& mpqp, const CertifyOptions& options = {});

nlohmann::json ToJson(const CertificationReport& report);
std::string ToText(const CertificationReport& report);

}  // namespace clqr
