#pragma once

#include "rbsmc/linalg.hpp"

namespace rbsmc {

// Unnormalized density z ↦ exp{−½ z'Az + z'b − ½c} in precision form.
// Every merge and marginalization step of the smoothers is carried out in
// this representation.
struct GaussianQuadForm {
  Mat A;
  Vec b;
  double c = 0.0;

  int dim() const { return static_cast<int>(b.size()); }

  // The constant function 1 on R^m.
  static GaussianQuadForm unit(int m);
  // exp(log_weight)·N(z; mean, cov).
  static GaussianQuadForm from_gaussian(const Vec& mean, const Mat& cov, double log_weight = 0.0);

  double log_eval(const Vec& z) const;
};

// Mixture component: exp(log_w)·N(mean, cov).
struct WeightedNormal {
  double log_w = 0.0;
  Vec mean;
  Mat cov;
};

// log ∫ exp{−½ z'Az + z'b − ½c} dz = (m/2)log2π − ½log|A| + ½ b'A⁻¹b − ½c.
// Throws NumericalError("non-normalizable") if A is not positive definite.
double quadform_integral(const GaussianQuadForm& q);

// Pointwise product: (A₁+A₂, b₁+b₂, c₁+c₂).
GaussianQuadForm quadform_product(const GaussianQuadForm& q1, const GaussianQuadForm& q2);

// The normalized Gaussian proportional to q, with its log mass.
WeightedNormal quadform_to_normal(const GaussianQuadForm& q);

}  // namespace rbsmc
