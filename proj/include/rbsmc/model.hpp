#pragma once

#include <optional>
#include <vector>

#include "json.hpp"

#include "rbsmc/linalg.hpp"

namespace rbsmc {

// Raw parameters of a conditionally linear Gaussian model with J regimes:
//
//   Z_i = d[a_i] + T[a_i] Z_{i-1} + H[a_i] ε_i,   Z_1 ~ N(mu1, Sigma1)
//   Y_i = c[a_i] + B[a_i] Z_i     + G[a_i] η_i
//
// with (a_i) a Markov chain (pi, Q). Regimes are 0-based in code.
struct RegimeParams {
  std::vector<double> pi;
  Eigen::MatrixXd Q;
  std::vector<Vec> d;
  std::vector<Mat> T;
  std::vector<Mat> H;
  std::vector<Vec> c;
  std::vector<Mat> B;
  std::vector<Mat> G;
  Vec mu1;
  Mat Sigma1;
};

// Per-regime matrices derived once at model construction.
struct RegimeTerms {
  Vec d;
  Mat T;
  Mat H;
  Mat Hbar;  // H H'
  Vec c;
  Mat B;
  Mat G;
  Mat Gbar;  // G G'
  CholeskyFactor Gbar_chol;
  Mat Gbar_inv;
  Mat Bt_Ginv;    // B'Ḡ⁻¹  (m×p)
  Mat Bt_Ginv_B;  // B'Ḡ⁻¹B (m×m)
  // Present only when H̄ is positive definite.
  std::optional<CholeskyFactor> Hbar_chol;
  Mat Hbar_inv;
};

// Immutable, validated CLGM. Construction throws ValidationError when the
// chain is not stochastic, dimensions disagree, or Ḡ_j / Σ₁ are not SPD.
// H̄_j may be singular; operations that need H̄_j⁻¹ check for it.
class RegimeModel {
 public:
  explicit RegimeModel(RegimeParams params);

  int num_regimes() const { return J_; }
  int state_dim() const { return m_; }
  int obs_dim() const { return p_; }

  const RegimeParams& params() const { return params_; }
  const RegimeTerms& regime(int j) const { return terms_[static_cast<std::size_t>(j)]; }

  double pi(int j) const { return params_.pi[static_cast<std::size_t>(j)]; }
  double log_pi(int j) const { return log_pi_[static_cast<std::size_t>(j)]; }
  double Q(int from, int to) const { return params_.Q(from, to); }
  double log_Q(int from, int to) const { return log_Q_(from, to); }
  const Vec& mu1() const { return params_.mu1; }
  const Mat& Sigma1() const { return params_.Sigma1; }
  const CholeskyFactor& Sigma1_chol() const { return Sigma1_chol_; }

  // Throws ValidationError("model-validation") if H̄_j is singular.
  const RegimeTerms& require_transition_precision(int j) const;

  void check_regime(int j) const;

 private:
  RegimeParams params_;
  int J_ = 0;
  int m_ = 0;
  int p_ = 0;
  std::vector<RegimeTerms> terms_;
  std::vector<double> log_pi_;
  Eigen::MatrixXd log_Q_;
  CholeskyFactor Sigma1_chol_;
};

// log m(a_i, z_{i-1}; z_i) = −½log|2πH̄| − ½‖z − d − T z_prev‖²_{H̄}.
double transition_logdensity(const RegimeModel& model, int regime, const Vec& z_prev, const Vec& z);

// log g(a_i, z_i; y_i) = −½log|2πḠ| − ½‖y − c − B z‖²_{Ḡ}.
double observation_logdensity(const RegimeModel& model, int regime, const Vec& z, const Vec& y);

// JSON with fields pi, Q, d, T, H, c, B, G, mu1, Sigma1; matrices are
// row-major arrays of arrays. "Hbar"/"Gbar" may replace "H"/"G", in which case
// the factors are taken as lower Cholesky factors.
nlohmann::json model_to_json(const RegimeModel& model);
RegimeModel model_from_json(const nlohmann::json& j);

nlohmann::json matrix_to_json(const Mat& M);
nlohmann::json vector_to_json(const Vec& v);
Mat matrix_from_json(const nlohmann::json& j, const char* field);
Vec vector_from_json(const nlohmann::json& j, const char* field);

}  // namespace rbsmc
