#include "rbsmc/kalman.hpp"

#include "rbsmc/errors.hpp"

namespace rbsmc {

KalmanStep kalman_update(const RegimeModel& model, const KalmanStat& predicted, int regime,
                         const Vec& y) {
  const RegimeTerms& t = model.regime(regime);
  const Mat PBt = predicted.P * t.B.transpose();
  const Mat S = symmetrized(t.B * PBt + t.Gbar);
  const CholeskyFactor chS = robust_cholesky(S, "innovation covariance");
  const Vec innov = y - t.c - t.B * predicted.mu;
  const Mat Kt = chS.solve(Mat(PBt.transpose()));  // K' = S⁻¹BP
  KalmanStep out;
  out.stat.mu = predicted.mu + Kt.transpose() * innov;
  out.stat.P = predicted.P - PBt * Kt;
  symmetrize(out.stat.P);
  const double p = static_cast<double>(y.size());
  out.loglik = -0.5 * (p * kLog2Pi + chS.log_det + chS.inv_quad(innov));
  return out;
}

KalmanStep kalman_init(const RegimeModel& model, int a1, const Vec& y1) {
  model.check_regime(a1);
  return kalman_update(model, KalmanStat{model.mu1(), model.Sigma1()}, a1, y1);
}

KalmanStat kalman_predict(const RegimeModel& model, const KalmanStat& stat, int regime) {
  model.check_regime(regime);
  const RegimeTerms& t = model.regime(regime);
  KalmanStat out;
  out.mu = t.d + t.T * stat.mu;
  out.P = t.T * stat.P * t.T.transpose() + t.Hbar;
  symmetrize(out.P);
  return out;
}

KalmanStep kalman_predict_update(const RegimeModel& model, const KalmanStat& stat, int regime,
                                 const Vec& y) {
  return kalman_update(model, kalman_predict(model, stat, regime), regime, y);
}

// ---------------------------------------------------------------------------
// Backward information recursion

BackwardInfoStat backward_info_terminal(const RegimeModel& model, int a_n, const Vec& y_n) {
  model.check_regime(a_n);
  const int m = model.state_dim();
  BackwardInfoStat flat{0.0, Mat::Zero(m, m), Vec::Zero(m)};
  return backward_info_fold(model, flat, a_n, y_n);
}

BackwardInfoStat backward_info_fold(const RegimeModel& model, const BackwardInfoStat& propagated,
                                    int a_i, const Vec& y_i) {
  model.check_regime(a_i);
  const RegimeTerms& t = model.regime(a_i);
  const Vec r = y_i - t.c;
  const double p = static_cast<double>(model.obs_dim());
  BackwardInfoStat out;
  out.c_tilde = propagated.c_tilde + p * kLog2Pi + t.Gbar_chol.log_det + t.Gbar_chol.inv_quad(r);
  out.P_inv = propagated.P_inv + t.Bt_Ginv_B;
  symmetrize(out.P_inv);
  out.nu = propagated.nu + t.Bt_Ginv * r;
  return out;
}

BackwardInfoStat backward_info_propagate(const RegimeModel& model, const BackwardInfoStat& stat_next,
                                         int a_next) {
  model.check_regime(a_next);
  const RegimeTerms& t = model.regime(a_next);
  const int m = model.state_dim();
  const Mat& P = stat_next.P_inv;
  const Vec& nu = stat_next.nu;

  // ∫ N(ε; 0, I) exp{...(d + Tz + Hε)} dε with Δ = (I + H'PH)⁻¹.
  const Mat PH = P * t.H;
  const Mat Dinv = symmetrized(Mat::Identity(m, m) + t.H.transpose() * PH);
  const CholeskyFactor chD = robust_cholesky(Dinv, "I + H'P̃⁻¹H");
  // K = HΔH'
  const Mat K = symmetrized(t.H * chD.solve(Mat(t.H.transpose())));
  const Mat X = symmetrized(P - PH * chD.solve(Mat(PH.transpose())));
  const Vec x = nu - P * (K * nu);

  BackwardInfoStat out;
  out.P_inv = symmetrized(t.T.transpose() * X * t.T);
  out.nu = t.T.transpose() * (x - X * t.d);
  // log|Δ| = −log|I + H'PH|
  out.c_tilde = stat_next.c_tilde + chD.log_det - nu.dot(K * nu) + t.d.dot(X * t.d) - 2.0 * t.d.dot(x);
  return out;
}

BackwardInfoStat backward_info_step(const RegimeModel& model, const BackwardInfoStat& stat_next,
                                    int a_i, int a_next, const Vec& y_i) {
  return backward_info_fold(model, backward_info_propagate(model, stat_next, a_next), a_i, y_i);
}

// ---------------------------------------------------------------------------
// Backward simulation statistics

FfbsBackwardStat ffbs_backward_terminal(const RegimeModel& model, int a_n, const Vec& y_n) {
  model.check_regime(a_n);
  const RegimeTerms& t = model.regime(a_n);
  const int m = model.state_dim();
  FfbsBackwardStat out;
  out.Omega = Mat::Zero(m, m);
  out.lambda = Vec::Zero(m);
  out.Omega_hat = t.Bt_Ginv_B;
  out.lambda_hat = t.Bt_Ginv * (y_n - t.c);
  return out;
}

FfbsBackwardStat ffbs_backward_propagate(const RegimeModel& model, const FfbsBackwardStat& next, int a_next) {
  model.check_regime(a_next);
  const RegimeTerms& tn = model.regime(a_next);
  const int m = model.state_dim();

  // M = H'Ω̂H + I; (I − Ω̂HM⁻¹H') applied to Ω̂ and to λ̂ − Ω̂d.
  const Mat OH = next.Omega_hat * tn.H;
  const Mat M = symmetrized(Mat::Identity(m, m) + tn.H.transpose() * OH);
  const CholeskyFactor chM = robust_cholesky(M, "H'Ω̂H + I");
  const Mat A = Mat::Identity(m, m) - OH * chM.solve(Mat(tn.H.transpose()));
  const Vec mvec = next.lambda_hat - next.Omega_hat * tn.d;

  FfbsBackwardStat out;
  out.Omega = symmetrized(tn.T.transpose() * A * next.Omega_hat * tn.T);
  out.lambda = tn.T.transpose() * (A * mvec);
  out.Omega_hat = out.Omega;
  out.lambda_hat = out.lambda;
  return out;
}

FfbsBackwardStat ffbs_backward_fold(const RegimeModel& model, const FfbsBackwardStat& propagated, int a_i,
                                    const Vec& y_i) {
  model.check_regime(a_i);
  const RegimeTerms& ti = model.regime(a_i);
  FfbsBackwardStat out = propagated;
  out.Omega_hat = symmetrized(propagated.Omega + ti.Bt_Ginv_B);
  out.lambda_hat = propagated.lambda + ti.Bt_Ginv * (y_i - ti.c);
  return out;
}

FfbsBackwardStat ffbs_backward_step(const RegimeModel& model, const FfbsBackwardStat& next, int a_i,
                                    int a_next, const Vec& y_i) {
  return ffbs_backward_fold(model, ffbs_backward_propagate(model, next, a_next), a_i, y_i);
}

std::vector<FfbsBackwardStat> ffbs_backward_stats(const RegimeModel& model, std::span<const int> regimes,
                                                  std::span<const Vec> ys, int first) {
  if (regimes.size() != ys.size() || regimes.empty()) {
    throw ValidationError("invalid-input", "regime and observation suffixes must be nonempty and aligned");
  }
  const std::size_t len = regimes.size() - static_cast<std::size_t>(first);
  std::vector<FfbsBackwardStat> out(len);
  const std::size_t last = regimes.size() - 1;
  out[len - 1] = ffbs_backward_terminal(model, regimes[last], ys[last]);
  for (std::size_t t = len - 1; t-- > 0;) {
    const std::size_t i = static_cast<std::size_t>(first) + t;
    out[t] = ffbs_backward_step(model, out[t + 1], regimes[i], regimes[i + 1], ys[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian × information-form integrals

Mat covariance_root(const Mat& P) {
  const Mat S = symmetrized(P);
  Eigen::LLT<Mat> llt(S);
  if (llt.info() == Eigen::Success) {
    Mat L = llt.matrixL();
    if (L.allFinite()) return L;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(S);
  const Vec root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

namespace {

struct InfoFactor {
  double log_mass;
  CholeskyFactor chL;
  Vec v;
};

InfoFactor info_factor(const Vec& mu, const Mat& Gamma, const Mat& Omega, const Vec& lambda) {
  const int m = static_cast<int>(mu.size());
  const Mat OG = Omega * Gamma;
  const Mat Lam = symmetrized(Gamma.transpose() * OG + Mat::Identity(m, m));
  InfoFactor f{0.0, robust_cholesky(Lam, "Γ'ΩΓ + I"), Gamma.transpose() * (lambda - Omega * mu)};
  const double eta = mu.dot(Omega * mu) - 2.0 * lambda.dot(mu) - f.chL.inv_quad(f.v);
  f.log_mass = -0.5 * f.chL.log_det - 0.5 * eta;
  return f;
}

}  // namespace

double log_gaussian_info_factor(const Vec& mu, const Mat& Gamma, const Mat& Omega, const Vec& lambda) {
  if (mu.size() == 1) {
    const double g = Gamma(0, 0), om = Omega(0, 0), la = lambda(0), m0 = mu(0);
    const double lam = g * g * om + 1.0;
    const double v = g * (la - om * m0);
    const double eta = m0 * om * m0 - 2.0 * la * m0 - v * v / lam;
    return -0.5 * std::log(lam) - 0.5 * eta;
  }
  return info_factor(mu, Gamma, Omega, lambda).log_mass;
}

WeightedNormal gaussian_info_posterior(const Vec& mu, const Mat& Gamma, const Mat& Omega,
                                       const Vec& lambda) {
  const InfoFactor f = info_factor(mu, Gamma, Omega, lambda);
  WeightedNormal out;
  out.log_w = f.log_mass;
  out.mean = mu + Gamma * f.chL.solve(f.v);
  out.cov = symmetrized(Gamma * f.chL.solve(Mat(Gamma.transpose())));
  return out;
}

double gaussian_backward_integral(const Vec& mu, const Mat& Sigma, const BackwardInfoStat& stat) {
  return -0.5 * stat.c_tilde + log_gaussian_info_factor(mu, covariance_root(Sigma), stat.P_inv, stat.nu);
}

}  // namespace rbsmc
