#pragma once

#include <vector>

#include "rbsmc/linalg.hpp"

namespace rbsmc {

// Per-time regime posterior probabilities, optionally with the overall state
// posterior mean and covariance (the moments of the regime mixture).
struct SmoothingMarginals {
  std::vector<std::vector<double>> prob;  // prob[i][j]
  std::vector<Vec> state_mean;            // empty unless moments were requested
  std::vector<Mat> state_cov;

  int length() const { return static_cast<int>(prob.size()); }
  bool has_moments() const { return !state_mean.empty(); }
};

// Accumulates a Gaussian mixture with log-domain weights, rescaling on the
// fly; yields the total log mass and the mixture mean/covariance.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(int m = 0) : s1_(Vec::Zero(m)), s2_(Mat::Zero(m, m)) {}

  void add(double log_w, const Vec& mean, const Mat& cov);
  void merge(const MomentAccumulator& other);

  double log_mass() const { return max_ == kNegInf ? kNegInf : max_ + std::log(w_); }
  Vec mean() const { return s1_ / w_; }
  Mat cov() const;

 private:
  void rescale_to(double new_max);

  double max_ = kNegInf;
  double w_ = 0.0;
  Vec s1_;
  Mat s2_;
};

// Mean absolute difference of P(a_i = j) over all i and j.
double marginal_mae(const SmoothingMarginals& a, const SmoothingMarginals& b);

}  // namespace rbsmc
