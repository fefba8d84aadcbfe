#pragma once

#include <cstdint>
#include <vector>

#include "rbsmc/model.hpp"

namespace rbsmc {

struct SimulatedPath {
  std::vector<int> regimes;
  std::vector<Vec> states;
  std::vector<Vec> observations;
};

// Draws a_{1:n} from (π, Q), then states and observations from the model.
SimulatedPath simulate(const RegimeModel& model, int n, std::uint64_t seed);

// The scalar two-regime model of the simulated-data study: π = (½, ½),
// d = (0.5, 0), c = (0.1, 0), Q = [[.99, .01], [.03, .97]], T = 1, H̄ = 0.1,
// B = 1, Ḡ = (0.3, 0.1), with Z₁ ~ N(0, 1).
RegimeModel benchmark_model();

}  // namespace rbsmc
