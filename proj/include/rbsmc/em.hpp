#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rbsmc/cmaes.hpp"
#include "rbsmc/commodity.hpp"
#include "rbsmc/forward_filter.hpp"
#include "rbsmc/model.hpp"

namespace rbsmc {

// log π(a₁) + log φ(z₁) + Σ log Q(a_{i−1}, a_i) + Σ log m + Σ log g.
double complete_data_loglik(const RegimeModel& model, std::span<const int> regimes, std::span<const Vec> zs,
                            std::span<const Vec> ys);

// Smoothed statistics of one E-step, summed over time. Weighted second
// moments are raw (E[w zz'], not centred), so Q^N(θ, θ_p) is a closed-form
// function of them for any θ.
struct SmoothedSufficientStats {
  int J = 0;
  int m = 0;
  int p = 0;
  int n = 0;

  // Per-time regime marginals and pairwise marginals (pair[i][k][j] is
  // P(a_{i−1} = k, a_i = j | y), i ≥ 1; pair[0] is empty).
  std::vector<std::vector<double>> prob;
  std::vector<std::vector<std::vector<double>>> pair;

  // z₁ moments under the smoother (for the initial-state term).
  Vec z1_mean;
  Mat z1_second;

  // Transition counts Σ_i P(a_{i−1}=k, a_i=j | y).
  Eigen::MatrixXd transitions;

  // Dynamics, per current regime j, summed over i ≥ 1: weight and the moments
  // of (z_i, z_{i−1}) with the regime indicator folded in.
  struct Dynamics {
    double w = 0.0;
    Vec s_cur, s_prev;
    Mat s_cur_cur, s_prev_prev, s_cur_prev;  // E[z_i z_i'], E[z_{i−1}z_{i−1}'], E[z_i z_{i−1}']
  };
  std::vector<Dynamics> dynamics;

  // Observations, per regime, summed over all i.
  struct Observation {
    double w = 0.0;
    Vec sz;     // Σ w E[z]
    Mat szz;    // Σ w E[zz']
    Vec sy;     // Σ w y
    Mat syy;    // Σ w yy'
    Mat syz;    // Σ y E[w z]'
  };
  std::vector<Observation> observation;

  static SmoothedSufficientStats zeros(int J, int m, int p, int n);
};

// Q^N(θ, θ_p) split into its terms.
struct ExpectedLoglik {
  double initial_regime = 0.0;
  double initial_state = 0.0;
  double transitions = 0.0;
  double dynamics = 0.0;
  double observations = 0.0;

  double total() const { return initial_regime + initial_state + transitions + dynamics + observations; }
};

// Evaluates the intermediate quantity at `model` (θ). Regime j's dynamics
// need H̄_j invertible.
ExpectedLoglik expected_loglik(const SmoothedSufficientStats& stats, const RegimeModel& model);

struct EStepSettings {
  int particles = 100;
  int backward_particles = 0;  // 0: same as particles
  SelectionScheme scheme = SelectionScheme::kKLOS;
};

// Forward pass plus rejuvenated two-filter smoothing at θ_p; pairwise
// statistics use the all-offspring table at i (ancestor k at i−1, regime j
// at i) times the backward rejuvenation factor at i.
SmoothedSufficientStats e_step(const RegimeModel& model, std::span<const Vec> ys, const EStepSettings& settings,
                               std::uint64_t seed);

// Cross-check route: Ñ rejuvenated-FFBS regime paths, each with its RTS
// moments, averaged with equal weights.
SmoothedSufficientStats e_step_ffbs(const RegimeModel& model, std::span<const Vec> ys, const EStepSettings& settings,
                                    std::uint64_t seed);

// Statistics of a single regime path (exact given the path).
SmoothedSufficientStats path_stats(const RegimeModel& model, std::span<const int> regimes, std::span<const Vec> ys);

// Accumulates `other` scaled by `weight` (per-time tables included).
void add_scaled(SmoothedSufficientStats& into, const SmoothedSufficientStats& other, double weight);

// Free parameters of the commodity model searched by the M-step, in the
// order κ, α_j, σ_j, η_j, ρ_j, g_ℓ, Q(j, j). Off-diagonal transition mass is
// spread evenly over the other regimes; π has a closed-form update; μ₁ and
// Σ₁ stay fixed.
Eigen::VectorXd pack_params(const TwoFactorParams& params);
TwoFactorParams unpack_params(const Eigen::VectorXd& x, const TwoFactorParams& base);

struct ParamBounds {
  double min_kappa = 1e-3;
  double min_scale = 1e-4;  // σ, η, g
  double max_abs_rho = 0.999;
  double min_stay = 1e-4;   // Q(j, j) ∈ [min_stay, 1 − min_stay]
  bool alpha_order = true;  // α₁ ≥ α₂ ≥ … enforced
};

// Euclidean projection onto the box constraints and, when requested, onto
// α₁ ≥ α₂ ≥ … (pool-adjacent-violators).
void project_params(Eigen::VectorXd& x, int J, int num_contracts, const ParamBounds& bounds);

struct MStepResult {
  TwoFactorParams params;
  double value = 0.0;  // Q^N at the returned point
  int evaluations = 0;
  bool budget_exhausted = false;
};

// CMA-ES maximization of θ ↦ Q^N(θ, θ_p); infeasible candidates are
// projected and candidates that fail to build score −∞.
MStepResult m_step(const SmoothedSufficientStats& stats, const TwoFactorParams& current,
                   const std::vector<int>& maturities, const CmaesSettings& optimizer, const ParamBounds& bounds,
                   std::uint64_t seed);

struct EmConfig {
  TwoFactorParams initial = calibration_start_params();
  std::vector<int> maturities = default_maturities();
  int iterations = 20;
  EStepSettings estep;
  CmaesSettings optimizer{0.005, 100, 20, 5000, 1e-12};
  ParamBounds bounds;
  bool common_random_numbers = false;
  std::string e_step_method = "two-filter-rejuv";  // or "ffbs-rejuv"
  std::uint64_t seed = 1;
};

EmConfig em_config_from_json(const nlohmann::json& j);

struct EmIteration {
  int iteration = 0;
  TwoFactorParams params;  // θ_{p+1}
  double q_current = 0.0;  // Q^N(θ_p, θ_p)
  double q_next = 0.0;     // Q^N(θ_{p+1}, θ_p)
  int evaluations = 0;
  bool budget_exhausted = false;

  double ascent() const { return q_next - q_current; }
};

struct EmResult {
  TwoFactorParams initial;
  std::vector<EmIteration> trace;
  TwoFactorParams final_params;
  std::vector<std::vector<double>> posterior;  // P̂(a_i = j | Y) at the final θ
};

EmResult em_run(const EmConfig& config, const FuturesPanel& panel);

// One row per iteration: iteration, κ, σ_j, η_j, ρ_j, α_j, g_ℓ, Q(j, j),
// then Q^N(θ_p, θ_p), Q^N(θ_{p+1}, θ_p) and their difference.
void write_trace_csv(const std::string& path, const EmResult& result);
void write_posterior_csv(const std::string& path, const std::vector<std::string>& dates,
                         const std::vector<std::vector<double>>& posterior);

}  // namespace rbsmc
