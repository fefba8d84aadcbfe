#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rbsmc/components.hpp"
#include "rbsmc/quadform.hpp"
#include "rbsmc/smoothing.hpp"

namespace rbsmc {

// One component of p^N(a_i, z_i | y_{1:i−1}): weight ω_{i−1}^k Q(a_{i−1}^k, a_i)
// and Gaussian N(d + Tμ_{i−1}^k, TP_{i−1}^kT' + H̄) for regime a_i.
struct PredictiveComponent {
  int ancestor = -1;
  int regime = 0;
  double log_w = 0.0;
  Vec mean;
  Mat cov;
  Mat root;  // lower Cholesky factor of cov

  // exp(log_w)·N(z; mean, cov) as a quadratic form.
  GaussianQuadForm quadform() const { return GaussianQuadForm::from_gaussian(mean, cov, log_w); }
};

struct ForwardPredictiveMixture {
  std::vector<PredictiveComponent> components;

  // log p^N(a, z | y_{1:i−1}).
  double log_density(int regime, const Vec& z) const;
};

// Mixture at time i built from clouds[i−1].
ForwardPredictiveMixture forward_predictive_mixture(const RegimeModel& model, const ParticleCloud& cloud_prev);

// The exact prior π_j N(μ₁, Σ₁) in the same representation (time 0).
ForwardPredictiveMixture prior_mixture(const RegimeModel& model);

// γ_i(a, z): per time, per regime, a list of weighted Gaussians.
struct ArtificialDensitySchedule {
  std::vector<std::vector<std::vector<PredictiveComponent>>> gamma;  // [i][j][component]
};

// γ_i = p^N(a_i, z_i | y_{1:i−1}) and γ_1 = π N(μ₁, Σ₁). By default every
// regime is compressed to one moment-matched Gaussian.
ArtificialDensitySchedule default_gamma_schedule(const RegimeModel& model, std::span<const ParticleCloud> clouds,
                                                 bool full_mixture = false);

// One moment-matched Gaussian carrying the total weight of the inputs.
PredictiveComponent moment_match(std::span<const PredictiveComponent> components);

struct BackwardParticle {
  int regime = 0;
  int parent = -1;  // index into the cloud at i+1; −1 at the last time
  double log_w = 0.0;
  BackwardInfoStat stat;      // p(y_{i:n} | ã_{i:n}, z_i)
  double log_integral = 0.0;  // log ∫ γ_i(ã_i, z) p(y_{i:n} | ã_{i:n}, z) dz
};

struct BackwardParticleCloud {
  int time = 0;
  std::vector<BackwardParticle> particles;
};

// log ∫ γ_i(j, z) exp{stat(z)} dz, summed over the components of regime j.
double gamma_backward_integral(const ArtificialDensitySchedule& schedule, int i, int regime,
                               const BackwardInfoStat& stat);

// Backward information particle filter targeting
// p̃_i(a_{i:n}) ∝ ∫ γ_i(a_i, z) p(y_{i:n}, a_{i+1:n} | a_i, z) dz.
// At each step the cloud is resampled systematically and extended with
// q̃(a_i) ∝ Q(a_i, ã_{i+1}) ∫γ_i p; the importance weight carried forward is
// Σ_j Q(j, ã_{i+1}) ∫γ_i(j)p / ∫γ_{i+1}p.
std::vector<BackwardParticleCloud> backward_filter_pass(const RegimeModel& model, std::span<const Vec> ys,
                                                        const ArtificialDensitySchedule& schedule, int N,
                                                        std::uint64_t seed);

// Distinct backward particles (same parent and regime) merged, weights summed.
std::vector<BackwardParticle> distinct_particles(const BackwardParticleCloud& cloud);

// Regime marginals at time i from the forward predictive mixture and the
// backward particles sharing each regime.
SmoothingMarginals merge_plain(const RegimeModel& model, const ForwardPredictiveMixture& fwd,
                               const BackwardParticleCloud& bwd, bool state_moments = false);

// t_i^N(a_i, z) = Σ_ℓ exp(log_w_ℓ) Q(a_i, next_regime_ℓ) exp{form_ℓ(z)}.
struct RejuvenationComponent {
  int next_regime = 0;
  double log_w = 0.0;     // log ω̃^ℓ_{i+1} − log ∫γ_{i+1}p
  BackwardInfoStat form;  // z_i ↦ ∫ m(ã^ℓ_{i+1}, z_i; z) p(y_{i+1:n} | ã^ℓ, z) dz
};

struct RejuvenationMixture {
  std::vector<RejuvenationComponent> components;

  double log_eval(const RegimeModel& model, int regime, const Vec& z) const;
};

RejuvenationMixture rejuvenation_mixture(const RegimeModel& model, const BackwardParticleCloud& bwd_next);

// Regime marginals at i from p^N(a_i, z | y_{1:i}) (the all-regime component
// list, which already carries g(a_i, z; y_i)) times t_i^N. A null mixture
// means i = n (no backward factor).
SmoothingMarginals merge_rejuvenated(const RegimeModel& model, std::span<const FilteredComponent> filtered,
                                     const RejuvenationMixture* rej, bool state_moments = false);

struct TwoFilterOptions {
  bool rejuvenate = true;
  bool full_gamma_mixture = false;
  bool state_moments = false;
};

// Complete smoother over all times. `N` is the backward particle count.
SmoothingMarginals two_filter_smooth(const RegimeModel& model, std::span<const Vec> ys,
                                     std::span<const ParticleCloud> clouds, int N, std::uint64_t seed,
                                     const TwoFilterOptions& options);

}  // namespace rbsmc
