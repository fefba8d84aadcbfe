#include "rbsmc/smoothing.hpp"

#include <cmath>

#include "rbsmc/errors.hpp"

namespace rbsmc {

void MomentAccumulator::rescale_to(double new_max) {
  if (max_ != kNegInf) {
    const double f = std::exp(max_ - new_max);
    w_ *= f;
    s1_ *= f;
    s2_ *= f;
  }
  max_ = new_max;
}

void MomentAccumulator::add(double log_w, const Vec& mean, const Mat& cov) {
  if (log_w == kNegInf) return;
  if (log_w > max_) rescale_to(log_w);
  const double w = std::exp(log_w - max_);
  w_ += w;
  s1_ += w * mean;
  s2_ += w * (cov + mean * mean.transpose());
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  if (other.max_ == kNegInf) return;
  if (other.max_ > max_) rescale_to(other.max_);
  const double f = std::exp(other.max_ - max_);
  w_ += f * other.w_;
  s1_ += f * other.s1_;
  s2_ += f * other.s2_;
}

Mat MomentAccumulator::cov() const {
  const Vec mu = mean();
  Mat c = s2_ / w_ - mu * mu.transpose();
  symmetrize(c);
  return c;
}

double marginal_mae(const SmoothingMarginals& a, const SmoothingMarginals& b) {
  if (a.length() != b.length()) throw ValidationError("invalid-input", "marginal lengths differ");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.prob.size(); ++i) {
    if (a.prob[i].size() != b.prob[i].size()) throw ValidationError("invalid-input", "regime counts differ");
    for (std::size_t j = 0; j < a.prob[i].size(); ++j) {
      total += std::abs(a.prob[i][j] - b.prob[i][j]);
      ++count;
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

}  // namespace rbsmc
