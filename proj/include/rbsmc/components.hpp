#pragma once

#include <span>
#include <vector>

#include "rbsmc/forward_filter.hpp"

namespace rbsmc {

// A weighted regime-conditional Gaussian N(mu, Gamma Gamma') over z_i.
struct FilteredComponent {
  int regime = 0;
  double log_w = 0.0;
  Vec mu;
  Mat P;
  Mat Gamma;
};

// The particles of a cloud as components (weights ω_i^k, filtered moments).
std::vector<FilteredComponent> cloud_components(const ParticleCloud& cloud);

// All-regime approximation of p(a_i, z_i | y_{1:i}): at i = 0 the exact
// π_j p(y₁ | j) terms, otherwise every offspring of clouds[i−1] extended with
// y_i. Weights are normalized; zero-weight entries are dropped.
std::vector<FilteredComponent> rejuvenation_components(const RegimeModel& model,
                                                       std::span<const ParticleCloud> clouds,
                                                       std::span<const Vec> ys, int i);

}  // namespace rbsmc
