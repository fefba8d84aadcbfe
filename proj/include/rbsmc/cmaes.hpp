#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace rbsmc {

struct CmaesSettings {
  double sigma0 = 0.005;
  int lambda = 0;  // 0: 4 + ⌊3 ln n⌋
  int mu = 0;      // 0: λ/2
  int max_evaluations = 10000;
  double tol_x = 1e-12;  // stop once σ·max √eig(C) falls below this
};

struct CmaesResult {
  Eigen::VectorXd best;
  double best_value = -std::numeric_limits<double>::infinity();
  int evaluations = 0;
  int generations = 0;
  bool budget_exhausted = false;  // stopped by the evaluation budget, not by tol_x
};

// Maximizes f. `repair`, if given, projects each sampled point onto the
// feasible set before evaluation; the repaired point is what enters the
// mean/covariance update. f may return −∞ for points it cannot evaluate.
CmaesResult cmaes_maximize(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                           const CmaesSettings& settings, std::uint64_t seed,
                           const std::function<void(Eigen::VectorXd&)>& repair = {});

}  // namespace rbsmc
