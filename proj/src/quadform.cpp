#include "rbsmc/quadform.hpp"

#include "rbsmc/errors.hpp"

namespace rbsmc {

GaussianQuadForm GaussianQuadForm::unit(int m) { return {Mat::Zero(m, m), Vec::Zero(m), 0.0}; }

GaussianQuadForm GaussianQuadForm::from_gaussian(const Vec& mean, const Mat& cov, double log_weight) {
  const CholeskyFactor ch = robust_cholesky(cov, "Gaussian covariance");
  GaussianQuadForm q;
  q.A = ch.inverse();
  q.b = ch.solve(mean);
  q.c = static_cast<double>(mean.size()) * kLog2Pi + ch.log_det + mean.dot(q.b) - 2.0 * log_weight;
  return q;
}

double GaussianQuadForm::log_eval(const Vec& z) const {
  return -0.5 * z.dot(A * z) + z.dot(b) - 0.5 * c;
}

double quadform_integral(const GaussianQuadForm& q) {
  CholeskyFactor ch;
  if (!try_cholesky(q.A, ch) || ch.jitter > 0.0) {
    throw NumericalError("non-normalizable",
                         "quadratic form is not normalizable (precision not positive definite)");
  }
  const double m = static_cast<double>(q.dim());
  return 0.5 * m * kLog2Pi - 0.5 * ch.log_det + 0.5 * ch.inv_quad(q.b) - 0.5 * q.c;
}

GaussianQuadForm quadform_product(const GaussianQuadForm& q1, const GaussianQuadForm& q2) {
  return {q1.A + q2.A, q1.b + q2.b, q1.c + q2.c};
}

WeightedNormal quadform_to_normal(const GaussianQuadForm& q) {
  CholeskyFactor ch;
  if (!try_cholesky(q.A, ch) || ch.jitter > 0.0) {
    throw NumericalError("non-normalizable",
                         "quadratic form is not normalizable (precision not positive definite)");
  }
  WeightedNormal out;
  out.mean = ch.solve(q.b);
  out.cov = ch.inverse();
  const double m = static_cast<double>(q.dim());
  out.log_w = 0.5 * m * kLog2Pi - 0.5 * ch.log_det + 0.5 * q.b.dot(out.mean) - 0.5 * q.c;
  return out;
}

}  // namespace rbsmc
