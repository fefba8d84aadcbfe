#include "rbsmc/linalg.hpp"

#include <algorithm>
#include <string>

#include "rbsmc/errors.hpp"

namespace rbsmc {

Vec CholeskyFactor::solve(const Vec& x) const {
  Vec y = L.triangularView<Eigen::Lower>().solve(x);
  return L.transpose().triangularView<Eigen::Upper>().solve(y);
}

Mat CholeskyFactor::solve(const Mat& X) const {
  Mat Y = L.triangularView<Eigen::Lower>().solve(X);
  return L.transpose().triangularView<Eigen::Upper>().solve(Y);
}

double CholeskyFactor::inv_quad(const Vec& x) const {
  Vec y = L.triangularView<Eigen::Lower>().solve(x);
  return y.squaredNorm();
}

Mat CholeskyFactor::inverse() const {
  Mat inv = solve(Mat(Mat::Identity(dim(), dim())));
  symmetrize(inv);
  return inv;
}

namespace {

bool factor_once(const Mat& A, double jitter, CholeskyFactor& out) {
  const int m = static_cast<int>(A.rows());
  Mat work = A;
  if (jitter > 0.0) work.diagonal().array() += jitter;
  Eigen::LLT<Mat> llt(work);
  if (llt.info() != Eigen::Success) return false;
  Mat L = llt.matrixL();
  double log_det = 0.0;
  for (int i = 0; i < m; ++i) {
    const double d = L(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    log_det += 2.0 * std::log(d);
  }
  out.L = std::move(L);
  out.log_det = log_det;
  out.jitter = jitter;
  return true;
}

}  // namespace

bool try_cholesky(const Mat& A, CholeskyFactor& out) {
  const int m = static_cast<int>(A.rows());
  if (m == 0) {
    out = CholeskyFactor{Mat(0, 0), 0.0, 0.0};
    return true;
  }
  if (!A.allFinite()) return false;
  if (factor_once(A, 0.0, out)) return true;
  const double scale = std::max(A.trace() / m, std::numeric_limits<double>::min());
  for (double eps = 1e-12; eps <= 1.0001e-6; eps *= 10.0) {
    if (factor_once(A, eps * scale, out)) return true;
  }
  return false;
}

CholeskyFactor robust_cholesky(const Mat& A, const char* what) {
  CholeskyFactor out;
  if (!try_cholesky(A, out)) {
    throw NumericalError("not-positive-definite",
                         std::string(what) + " is not positive definite (Cholesky failed after jitter)");
  }
  return out;
}

double inv_norm2(const Mat& A, const Vec& x) { return robust_cholesky(A).inv_quad(x); }

double log_normal_pdf(const Vec& x, const Vec& mean, const CholeskyFactor& cov) {
  const double k = static_cast<double>(x.size());
  return -0.5 * (k * kLog2Pi + cov.log_det + cov.inv_quad(x - mean));
}

double log_normal_pdf(const Vec& x, const Vec& mean, const Mat& cov) {
  return log_normal_pdf(x, mean, robust_cholesky(cov, "covariance"));
}

double log_sum_exp(std::span<const double> values) {
  double mx = kNegInf;
  for (double v : values) mx = std::max(mx, v);
  if (mx == kNegInf) return kNegInf;
  if (mx == std::numeric_limits<double>::infinity()) return mx;
  double s = 0.0;
  for (double v : values) s += std::exp(v - mx);
  return mx + std::log(s);
}

double normalize_log_weights(std::span<double> log_weights, const char* context) {
  const double lse = log_sum_exp(log_weights);
  if (!std::isfinite(lse)) {
    throw NumericalError("degenerate-weights", std::string("all weights vanish: ") + context);
  }
  for (double& w : log_weights) w -= lse;
  return lse;
}

}  // namespace rbsmc
