#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace rbsmc {

// State and observation dimensions are small (a handful of factors and
// contracts). Bounded-size dynamic matrices keep every per-particle matrix on
// the stack.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor,
                          kMaxDim, kMaxDim>;

inline constexpr double kLog2Pi = 1.8378770664093454836;  // log(2π)
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Lower Cholesky factor of a symmetric positive definite matrix, plus the
// jitter that had to be added to the diagonal to obtain it.
struct CholeskyFactor {
  Mat L;
  double log_det = 0.0;
  double jitter = 0.0;

  int dim() const { return static_cast<int>(L.rows()); }
  // A⁻¹ x
  Vec solve(const Vec& x) const;
  Mat solve(const Mat& X) const;
  // x'A⁻¹x
  double inv_quad(const Vec& x) const;
  Mat inverse() const;
};

// Cholesky with diagonal jitter escalation: tries the matrix as given, then
// adds ε·trace/m to the diagonal for ε = 1e-12, 1e-11, ..., 1e-6.
// Throws NumericalError when every level fails.
CholeskyFactor robust_cholesky(const Mat& A, const char* what = "matrix");

// Same, returning false instead of throwing.
bool try_cholesky(const Mat& A, CholeskyFactor& out);

// ‖x‖²_A := x'A⁻¹x. Note the inverse: the subscript matrix is a covariance.
double inv_norm2(const Mat& A, const Vec& x);

inline void symmetrize(Mat& A) { A = 0.5 * (A + A.transpose()).eval(); }

inline Mat symmetrized(const Mat& A) { return 0.5 * (A + A.transpose()); }

// log N(x; mean, cov)
double log_normal_pdf(const Vec& x, const Vec& mean, const Mat& cov);
double log_normal_pdf(const Vec& x, const Vec& mean, const CholeskyFactor& cov);

double log_sum_exp(std::span<const double> values);

// Normalizes log-weights in place so that log_sum_exp == 0; returns the
// log normalizer. Throws NumericalError("degenerate-weights") if all are -inf.
double normalize_log_weights(std::span<double> log_weights, const char* context);

// Online log-sum-exp.
class LogSumExp {
 public:
  void add(double v) {
    if (v == kNegInf) return;
    if (v <= max_) {
      sum_ += std::exp(v - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - v) + 1.0;
      max_ = v;
    }
  }
  double value() const { return max_ == kNegInf ? kNegInf : max_ + std::log(sum_); }

 private:
  double max_ = kNegInf;
  double sum_ = 0.0;
};

inline Mat zeros(int r, int c) { return Mat::Zero(r, c); }
inline Mat identity(int m) { return Mat::Identity(m, m); }
inline Vec zero_vec(int m) { return Vec::Zero(m); }

}  // namespace rbsmc
