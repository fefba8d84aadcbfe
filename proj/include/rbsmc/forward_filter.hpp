#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rbsmc/kalman.hpp"
#include "rbsmc/model.hpp"
#include "rbsmc/rng.hpp"

namespace rbsmc {

// One weighted regime trajectory. The trajectory is stored as a parent
// pointer into the previous cloud plus the regime at the current time.
struct Particle {
  int regime = 0;
  int parent = -1;  // index into the cloud at i−1; −1 at the first time
  double log_w = 0.0;
  KalmanStat stat;
};

struct ParticleCloud {
  int time = 0;  // 0-based time index
  std::vector<Particle> particles;
  double log_evidence = 0.0;  // running estimate of log p(y_{1:i})

  int size() const { return static_cast<int>(particles.size()); }
};

// Every (ancestor k, regime j) offspring of a cloud. Entry index = k·J + j.
struct OffspringEntry {
  int ancestor = 0;
  int regime = 0;
  double log_gamma = 0.0;  // log Q(a_{i−1}^k, j) + log predictive of y_i
  double log_w = 0.0;      // normalized over the table
  KalmanStat stat;         // filtered moments after y_i
};

struct OffspringTable {
  int time = 0;
  std::vector<OffspringEntry> entries;
  double log_increment = 0.0;  // log Σ ω_{i−1}^k γ^{j,k}
};

enum class SelectionScheme { kKLOS, kCSOS, kMultinomial };

SelectionScheme parse_selection_scheme(const std::string& name);
std::string to_string(SelectionScheme scheme);

// Samples a₁ ∝ π_j p(y₁ | a₁ = j) independently N times; uniform weights.
ParticleCloud init_cloud(const RegimeModel& model, const Vec& y1, int N, Rng& rng);

// log π_j + log p(y₁ | j) and the time-1 filtered moments for each regime.
std::vector<KalmanStep> initial_regime_terms(const RegimeModel& model, const Vec& y1);

OffspringTable extend_all_offspring(const RegimeModel& model, const ParticleCloud& cloud, const Vec& y);

// Outcome of an unbiased selection step over normalized weights.
struct Selection {
  std::vector<int> index;      // kept table entries, increasing
  std::vector<double> weight;  // unnormalized new weight Ω̃ of each kept entry
  double lambda = 0.0;         // threshold; 0 when everything was kept
  int certain = 0;             // entries kept with probability one
};

// KL-OS threshold: Σ min(w/λ, 1) = N. Returns 0 if at most N weights are positive.
double klos_threshold(std::span<const double> weights, int N);
// CS-OS threshold: Σ min(√(w/λ), 1) = N.
double csos_threshold(std::span<const double> weights, int N);

// Selection on linear-domain normalized weights. E[Ω̃_e] = w_e for every entry.
Selection select_offspring(std::span<const double> weights, int N, SelectionScheme scheme, Rng& rng);

ParticleCloud select_klos(const OffspringTable& table, int N, Rng& rng);
ParticleCloud select_csos(const OffspringTable& table, int N, Rng& rng);

// One filter step with any scheme (multinomial is the ancestor-then-regime
// variant: k ∝ ω, then j ∝ γ^{j,k}, new weight ∝ Σ_j γ^{j,k}).
ParticleCloud filter_step(const RegimeModel& model, const ParticleCloud& cloud, const Vec& y, int N,
                          SelectionScheme scheme, Rng& rng);

std::vector<ParticleCloud> forward_pass(const RegimeModel& model, std::span<const Vec> ys, int N,
                                        SelectionScheme scheme, std::uint64_t seed);

// Systematic resampling: N indices drawn ∝ exp(log_weights) with one uniform.
std::vector<int> systematic_resample(std::span<const double> log_weights, int N, Rng& rng);

// Regime trajectory a_{1:i} of particle k of clouds[i].
std::vector<int> trajectory(std::span<const ParticleCloud> clouds, int i, int k);

// Filtering marginals P(a_i = j | y_{1:i}) from the clouds.
std::vector<std::vector<double>> filtering_marginals(std::span<const ParticleCloud> clouds, int J);

}  // namespace rbsmc
