#pragma once

#include <span>
#include <vector>

#include "rbsmc/kalman.hpp"
#include "rbsmc/model.hpp"
#include "rbsmc/smoothing.hpp"

namespace rbsmc {

// Kalman filter plus Rauch–Tung–Striebel smoother for a fixed regime path.
struct RtsResult {
  std::vector<Vec> mean;       // E[z_i | y_{1:n}, a_{1:n}]
  std::vector<Mat> cov;        // Cov(z_i | y_{1:n}, a_{1:n})
  std::vector<Mat> cross_cov;  // Cov(z_i, z_{i−1} | ·) for i ≥ 1; element 0 is zero
  std::vector<KalmanStat> filtered;
  double loglik = 0.0;  // log p(y_{1:n} | a_{1:n})
};

RtsResult rts_given_regimes(const RegimeModel& model, std::span<const int> regimes, std::span<const Vec> ys);

// Exact smoothing by summing over all J^n regime sequences.
struct OracleResult {
  double log_evidence = 0.0;
  // log p(y_{1:n}, a_{1:n}) in lexicographic order of a_{1:n}
  // (sequence index = Σ_i a_i J^{n−1−i}).
  std::vector<double> log_joint;
  std::vector<std::vector<double>> filtering;  // P(a_i = j | y_{1:i})
  SmoothingMarginals smoothing;                // P(a_i = j | y_{1:n}) and state moments
};

inline constexpr double kOracleMaxSequences = 1e6;

// Throws ValidationError("instance-too-large") when J^n exceeds 10⁶.
OracleResult enumerate_posterior(const RegimeModel& model, std::span<const Vec> ys, bool state_moments = true);

}  // namespace rbsmc
