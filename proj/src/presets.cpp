#include "clqr/presets.hpp"

#include <unsupported/Eigen/MatrixFunctions>

namespace clqr {

LtiSystem OscillatingMasses(double sample_time) {
  if (!(sample_time > 0.0)) throw ConfigError("sample time must be positive");
  constexpr Index kMasses = 4;
  constexpr Index n = 2 * kMasses;
  constexpr Index m = 2;
  Matrix stiffness = Matrix::Zero(kMasses, kMasses);
  for (Index i = 0; i < kMasses; ++i) {
    stiffness(i, i) = -2.0;
    if (i > 0) stiffness(i, i - 1) = 1.0;
    if (i + 1 < kMasses) stiffness(i, i + 1) = 1.0;
  }
  Matrix aug = Matrix::Zero(n + m, n + m);
  aug.block(0, kMasses, kMasses, kMasses) = Matrix::Identity(kMasses, kMasses);
  aug.block(kMasses, 0, kMasses, kMasses) = stiffness;
  aug(kMasses + 0, n + 0) = 1.0;
  aug(kMasses + 2, n + 1) = 1.0;
  const Matrix e = (aug * sample_time).exp();
  LtiSystem sys;
  sys.A = e.topLeftCorner(n, n);
  sys.B = e.topRightCorner(n, m);
  sys.Q = Matrix::Identity(n, n);
  sys.R = Matrix::Identity(m, m);
  return sys;
}

ProblemInstance Example1Instance() {
  ProblemInstance inst;
  inst.system.A.resize(2, 2);
  inst.system.A << 1.0, 0.1, -0.1, 1.0;
  inst.system.B.resize(2, 2);
  inst.system.B << 1.0, 0.05, 0.5, 1.0;
  inst.system.Q = Matrix::Identity(2, 2);
  inst.system.R = 0.1 * Matrix::Identity(2, 2);
  inst.state_set = Polyhedron::Unconstrained(2);
  inst.input_set = Polyhedron::InfinityBall(2, 0.5);
  inst.region_of_interest = Polyhedron::InfinityBall(2, 3.0);
  return inst;
}

ProblemInstance Example2Instance(double sample_time) {
  ProblemInstance inst;
  inst.system = OscillatingMasses(sample_time);
  inst.state_set = Polyhedron::InfinityBall(8, 10.0);
  inst.input_set = Polyhedron::InfinityBall(2, 5.0);
  inst.region_of_interest = inst.state_set;
  return inst;
}

ProblemInstance Example3Instance() {
  ProblemInstance inst;
  inst.system.A.resize(2, 2);
  inst.system.A << 1.0, 1.0, 0.0, 1.0;
  inst.system.B.resize(2, 1);
  inst.system.B << 0.4, 0.6;
  inst.system.Q = Matrix::Identity(2, 2);
  inst.system.R = 0.1 * Matrix::Identity(1, 1);
  inst.state_set = Polyhedron::InfinityBall(2, 3.0);
  inst.input_set = Polyhedron::InfinityBall(1, 2.0);
  inst.region_of_interest = inst.state_set;
  return inst;
}

std::vector<std::string> PresetNames() { return {"example1", "example2", "example3"}; }

}  // namespace clqr
