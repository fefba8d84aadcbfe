#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rbsmc/components.hpp"
#include "rbsmc/smoothing.hpp"

namespace rbsmc {

// A backward-simulated regime path with the statistics met along the way
// (stats[i] describes y_{i:n} given the sampled suffix).
struct BackwardTrajectory {
  std::vector<int> regimes;
  std::vector<FfbsBackwardStat> stats;
};

// Backward simulation restricted to the forward support: at each i an
// ancestor k of clouds[i] is drawn with probability
// ∝ ω_i^k Q(a_i^k, ã_{i+1}) |Λ_i^k|^{−1/2} exp(−η_i^k/2).
std::vector<BackwardTrajectory> ffbs_sample_plain(const RegimeModel& model, std::span<const ParticleCloud> clouds,
                                                  std::span<const Vec> ys, int n_tilde, std::uint64_t seed);

// Backward simulation over every regime: the forward ancestor at i−1 is
// integrated out, so ã_i ranges over all of {1..J}.
std::vector<BackwardTrajectory> ffbs_sample_rejuvenated(const RegimeModel& model,
                                                        std::span<const ParticleCloud> clouds,
                                                        std::span<const Vec> ys, int n_tilde, std::uint64_t seed);

// Regime probabilities P(ã_i = j) of the rejuvenated sampler at time i given
// a sampled suffix statistic; exposed for tests.
std::vector<double> rejuvenated_step_distribution(const RegimeModel& model,
                                                  std::span<const FilteredComponent> components,
                                                  const FfbsBackwardStat* propagated, int next_regime);

// Regime frequencies; with model/ys, also the state moments averaged over
// the regime-conditional smoothers of the distinct trajectories.
SmoothingMarginals marginal_estimate(std::span<const BackwardTrajectory> trajectories, int J);
SmoothingMarginals marginal_estimate(std::span<const BackwardTrajectory> trajectories, const RegimeModel& model,
                                     std::span<const Vec> ys);

}  // namespace rbsmc
