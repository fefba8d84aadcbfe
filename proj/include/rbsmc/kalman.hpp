#pragma once

#include <span>
#include <vector>

#include "rbsmc/linalg.hpp"
#include "rbsmc/model.hpp"
#include "rbsmc/quadform.hpp"

namespace rbsmc {

// Conditional Gaussian N(mu, P) of the linear state given a regime path.
struct KalmanStat {
  Vec mu;
  Mat P;
};

// A filtered statistic with log p(y_i | y_{1:i-1}, a_{1:i}).
struct KalmanStep {
  KalmanStat stat;
  double loglik = 0.0;
};

// Time-1 update of N(μ₁, Σ₁) with y₁ under regime a1.
KalmanStep kalman_init(const RegimeModel& model, int a1, const Vec& y1);

// Predicted moments d + Tμ, TPT' + H̄.
KalmanStat kalman_predict(const RegimeModel& model, const KalmanStat& stat, int regime);

// Measurement update of predicted moments; loglik is the log density of y
// under N(c + Bμ, BPB' + Ḡ).
KalmanStep kalman_update(const RegimeModel& model, const KalmanStat& predicted, int regime,
                         const Vec& y);

KalmanStep kalman_predict_update(const RegimeModel& model, const KalmanStat& stat, int regime,
                                 const Vec& y);

// z ↦ exp{−½c̃ − ½z'P̃⁻¹z + z'ν̃}, the likelihood p(y_{i:n} | a_{i:n}, z_i).
struct BackwardInfoStat {
  double c_tilde = 0.0;
  Mat P_inv;
  Vec nu;

  double log_eval(const Vec& z) const { return -0.5 * c_tilde - 0.5 * z.dot(P_inv * z) + z.dot(nu); }
  GaussianQuadForm as_quadform() const { return {P_inv, nu, c_tilde}; }
};

// The observation term alone: log g(a_n, z; y_n) in information form.
BackwardInfoStat backward_info_terminal(const RegimeModel& model, int a_n, const Vec& y_n);

// z_i ↦ ∫ m(a_next, z_i; z) exp{stat_next(z)} dz, before folding in y_i.
// Computed in the inverse-free form X = P̃⁻¹ − P̃⁻¹HΔH'P̃⁻¹ with
// Δ = (I + H'P̃⁻¹H)⁻¹, so a singular H̄ is allowed here.
BackwardInfoStat backward_info_propagate(const RegimeModel& model, const BackwardInfoStat& stat_next,
                                         int a_next);

// Adds log g(a_i, z; y_i) to a propagated statistic.
BackwardInfoStat backward_info_fold(const RegimeModel& model, const BackwardInfoStat& propagated,
                                    int a_i, const Vec& y_i);

// One full backward step: propagate through a_next, then fold y_i under a_i.
BackwardInfoStat backward_info_step(const RegimeModel& model, const BackwardInfoStat& stat_next,
                                    int a_i, int a_next, const Vec& y_i);

// Precision-form statistics used by backward simulation. Omega/lambda describe
// p(y_{i+1:n}, a_{i+1:n} | z_i) up to a z-free factor; the hatted pair also
// includes y_i.
struct FfbsBackwardStat {
  Mat Omega;
  Vec lambda;
  Mat Omega_hat;
  Vec lambda_hat;
};

// Ω̂_n = B'Ḡ⁻¹B, λ̂_n = B'Ḡ⁻¹(y − c); Omega/lambda are zero.
FfbsBackwardStat ffbs_backward_terminal(const RegimeModel& model, int a_n, const Vec& y_n);

// Ω_i, λ_i from the statistic at i+1; the hatted fields are left equal to them.
FfbsBackwardStat ffbs_backward_propagate(const RegimeModel& model, const FfbsBackwardStat& next, int a_next);

// Ω̂_i = Ω_i + B'Ḡ⁻¹B, λ̂_i = λ_i + B'Ḡ⁻¹(y_i − c) under regime a_i.
FfbsBackwardStat ffbs_backward_fold(const RegimeModel& model, const FfbsBackwardStat& propagated, int a_i,
                                    const Vec& y_i);

// Extends a suffix statistic at i+1 to time i.
FfbsBackwardStat ffbs_backward_step(const RegimeModel& model, const FfbsBackwardStat& next, int a_i,
                                    int a_next, const Vec& y_i);

// Whole suffix at once: element t holds the statistic for time `first + t`.
std::vector<FfbsBackwardStat> ffbs_backward_stats(const RegimeModel& model, std::span<const int> regimes,
                                                  std::span<const Vec> ys, int first);

// log ∫ N(z; mu, P) exp{−½z'Ωz + λ'z} dz = −½log|Λ| − ½η with Γ = chol(P),
// Λ = Γ'ΩΓ + I, v = Γ'(λ − Ωμ), η = μ'Ωμ − 2λ'μ − v'Λ⁻¹v.
// `Gamma` is the lower Cholesky factor of P (any square root works).
double log_gaussian_info_factor(const Vec& mu, const Mat& Gamma, const Mat& Omega, const Vec& lambda);

// Posterior moments of N(mu, P)·exp{−½z'Ωz + λ'z}, with the same log mass as
// log_gaussian_info_factor.
WeightedNormal gaussian_info_posterior(const Vec& mu, const Mat& Gamma, const Mat& Omega,
                                       const Vec& lambda);

// log ∫ φ_{μ,Σ}(z) p(y_{i:n} | a_{i:n}, z) dz.
double gaussian_backward_integral(const Vec& mu, const Mat& Sigma, const BackwardInfoStat& stat);

// Lower Cholesky factor of a covariance, tolerating semidefinite input.
Mat covariance_root(const Mat& P);

}  // namespace rbsmc
