#include "rbsmc/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rbsmc/errors.hpp"
#include "rbsmc/rng.hpp"

namespace rbsmc {

CmaesResult cmaes_maximize(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                           const CmaesSettings& settings, std::uint64_t seed,
                           const std::function<void(Eigen::VectorXd&)>& repair) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const int n = static_cast<int>(x0.size());
  if (n < 1) throw ValidationError("invalid-input", "CMA-ES needs at least one dimension");
  if (!(settings.sigma0 > 0.0)) throw ValidationError("invalid-config", "CMA-ES sigma0 must be positive");
  const int lambda = settings.lambda > 0 ? settings.lambda : 4 + static_cast<int>(std::floor(3.0 * std::log(n)));
  const int mu = settings.mu > 0 ? settings.mu : lambda / 2;
  if (lambda < 2 || mu < 1 || mu > lambda) throw ValidationError("invalid-config", "CMA-ES needs 1 <= mu <= lambda");

  // Strategy parameters, default recombination weights.
  VectorXd w(mu);
  for (int i = 0; i < mu; ++i) w(i) = std::log(mu + 0.5) - std::log(i + 1.0);
  w /= w.sum();
  const double mueff = 1.0 / w.squaredNorm();
  const double nd = n;
  const double cs = (mueff + 2.0) / (nd + mueff + 5.0);
  const double ds = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (nd + 1.0)) - 1.0) + cs;
  const double cc = (4.0 + mueff / nd) / (nd + 4.0 + 2.0 * mueff / nd);
  const double c1 = 2.0 / ((nd + 1.3) * (nd + 1.3) + mueff);
  const double cmu = std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nd + 2.0) * (nd + 2.0) + mueff));
  const double chi_n = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));

  VectorXd mean = x0;
  if (repair) repair(mean);
  double sigma = settings.sigma0;
  MatrixXd C = MatrixXd::Identity(n, n);
  MatrixXd Bm = MatrixXd::Identity(n, n);
  VectorXd D = VectorXd::Ones(n);
  VectorXd ps = VectorXd::Zero(n), pc = VectorXd::Zero(n);

  Rng rng(seed, 0x434D41);
  CmaesResult res;
  res.best = mean;
  std::vector<VectorXd> xs(static_cast<std::size_t>(lambda));
  std::vector<double> fx(static_cast<std::size_t>(lambda));
  std::vector<int> order(static_cast<std::size_t>(lambda));

  while (true) {
    if (res.evaluations + lambda > settings.max_evaluations) {
      res.budget_exhausted = true;
      break;
    }
    for (int k = 0; k < lambda; ++k) {
      VectorXd z(n);
      for (int i = 0; i < n; ++i) z(i) = rng.normal();
      VectorXd x = mean + sigma * (Bm * D.asDiagonal() * z);
      if (repair) repair(x);
      const double v = f(x);
      fx[static_cast<std::size_t>(k)] = std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
      if (fx[static_cast<std::size_t>(k)] > res.best_value) {
        res.best_value = fx[static_cast<std::size_t>(k)];
        res.best = x;
      }
      xs[static_cast<std::size_t>(k)] = std::move(x);
    }
    res.evaluations += lambda;
    ++res.generations;

    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return fx[static_cast<std::size_t>(a)] > fx[static_cast<std::size_t>(b)];
    });

    const VectorXd old_mean = mean;
    mean.setZero();
    for (int i = 0; i < mu; ++i) mean += w(i) * xs[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    const VectorXd yw = (mean - old_mean) / sigma;

    // C^{-1/2} y_w through the eigenbasis.
    const VectorXd c_inv_sqrt_yw = Bm * (Bm.transpose() * yw).cwiseQuotient(D);
    ps = (1.0 - cs) * ps + std::sqrt(cs * (2.0 - cs) * mueff) * c_inv_sqrt_yw;
    const double ps_norm = ps.norm();
    const double denom = std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * res.generations));
    const bool hsig = ps_norm / denom < (1.4 + 2.0 / (nd + 1.0)) * chi_n;
    pc = (1.0 - cc) * pc + (hsig ? std::sqrt(cc * (2.0 - cc) * mueff) : 0.0) * yw;

    MatrixXd rank_mu = MatrixXd::Zero(n, n);
    for (int i = 0; i < mu; ++i) {
      const VectorXd y = (xs[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] - old_mean) / sigma;
      rank_mu += w(i) * y * y.transpose();
    }
    C = (1.0 - c1 - cmu) * C + c1 * (pc * pc.transpose() + (hsig ? 0.0 : cc * (2.0 - cc)) * C) + cmu * rank_mu;
    C = 0.5 * (C + C.transpose()).eval();
    sigma *= std::exp((cs / ds) * (ps_norm / chi_n - 1.0));

    Eigen::SelfAdjointEigenSolver<MatrixXd> es(C);
    Bm = es.eigenvectors();
    D = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt();

    if (!std::isfinite(sigma) || sigma * D.maxCoeff() < settings.tol_x) break;
  }
  return res;
}

}  // namespace rbsmc
