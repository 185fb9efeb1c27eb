#pragma once

#include <string>
#include <vector>

#include "clqr/model.hpp"

namespace clqr {

/// Chain of four unit masses between two walls, unit springs, forces on masses 1 and 3.
/// State (p₁…p₄, v₁…v₄), exact zero-order hold with period `sample_time`.
LtiSystem OscillatingMasses(double sample_time);

ProblemInstance Example1Instance();
ProblemInstance Example2Instance(double sample_time = 0.5);
ProblemInstance Example3Instance();

std::vector<std::string> PresetNames();

}  // namespace clqr
