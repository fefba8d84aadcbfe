#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rbsmc/benchmark.hpp"
#include "rbsmc/cmaes.hpp"
#include "rbsmc/em.hpp"
#include "rbsmc/oracle.hpp"
#include "rbsmc/simulate.hpp"

using namespace rbsmc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// E[log p(z, y)] for a one-regime model with states distributed per the RTS
// smoother of `smoother_model`, written out term by term.
double rts_intermediate_quantity(const RegimeModel& smoother_model, const RegimeModel& eval,
                                 const std::vector<Vec>& ys) {
  const std::size_t n = ys.size();
  const oracle::Rts r = oracle::kalman_rts(smoother_model, std::vector<int>(n, 0), ys);
  const auto& sp = smoother_model.params();
  const auto& P = eval.params();
  const MatrixXd T = oracle::dense(P.T[0]), B = oracle::dense(P.B[0]);
  const MatrixXd Hbar = oracle::dense(eval.regime(0).Hbar), Gbar = oracle::dense(eval.regime(0).Gbar);
  const VectorXd d = oracle::dense(P.d[0]), c = oracle::dense(P.c[0]);
  const int m = eval.state_dim(), p = eval.obs_dim();

  double q = 0.0;
  const VectorXd e1 = r.smooth_mean[0] - oracle::dense(P.mu1);
  const MatrixXd S1 = oracle::dense(P.Sigma1);
  q += -0.5 * (m * oracle::kLog2Pi + oracle::log_det_spd(S1) +
               (S1.inverse() * (r.smooth_cov[0] + e1 * e1.transpose())).trace());
  for (std::size_t i = 0; i < n; ++i) {
    const VectorXd res = oracle::dense(ys[i]) - c - B * r.smooth_mean[i];
    const MatrixXd E = res * res.transpose() + B * r.smooth_cov[i] * B.transpose();
    q += -0.5 * (p * oracle::kLog2Pi + oracle::log_det_spd(Gbar) + (Gbar.inverse() * E).trace());
    if (i == 0) continue;
    // Lag-one covariance Cov(z_i, z_{i−1}) = P^s_i C_{i−1}'.
    const MatrixXd Ts = oracle::dense(sp.T[0]);
    const MatrixXd Hs = oracle::dense(smoother_model.regime(0).Hbar);
    const MatrixXd pred = Ts * r.filt_cov[i - 1] * Ts.transpose() + Hs;
    const MatrixXd C = r.filt_cov[i - 1] * Ts.transpose() * pred.inverse();
    const MatrixXd cross = r.smooth_cov[i] * C.transpose();
    const VectorXd mres = r.smooth_mean[i] - d - T * r.smooth_mean[i - 1];
    const MatrixXd D = mres * mres.transpose() + r.smooth_cov[i] - cross * T.transpose() - T * cross.transpose() +
                       T * r.smooth_cov[i - 1] * T.transpose();
    q += -0.5 * (m * oracle::kLog2Pi + oracle::log_det_spd(Hbar) + (Hbar.inverse() * D).trace());
  }
  return q;
}

}  // namespace

TEST_CASE("complete-data log-likelihood at n = 1") {
  const RegimeModel m = benchmark_model();
  const std::vector<int> a{1};
  const std::vector<Vec> z{Vec::Constant(1, 0.2)}, y{Vec::Constant(1, 0.5)};
  const double expect = std::log(0.5) - 0.5 * std::log(2 * M_PI) - 0.02 +
                        observation_logdensity(m, 1, z[0], y[0]);
  CHECK(complete_data_loglik(m, a, z, y) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("complete-data likelihood integrates to the evidence") {
  const RegimeModel m = benchmark_model();
  const std::vector<Vec> y{Vec::Constant(1, 0.3), Vec::Constant(1, 0.9)};
  const OracleResult o = enumerate_posterior(m, y, false);
  double total = 0.0;
  for (int a0 = 0; a0 < 2; ++a0) {
    for (int a1 = 0; a1 < 2; ++a1) {
      const std::vector<int> a{a0, a1};
      total += oracle::integrate(
          [&](double z0) {
            return oracle::integrate(
                [&](double z1) {
                  const std::vector<Vec> z{Vec::Constant(1, z0), Vec::Constant(1, z1)};
                  return std::exp(complete_data_loglik(m, a, z, y));
                },
                -6, 6);
          },
          -6, 6);
    }
  }
  CHECK(std::log(total) == doctest::Approx(o.log_evidence).epsilon(1e-7));
}

TEST_CASE("true paths beat permuted regimes") {
  RegimeParams p = benchmark_model().params();
  p.c = {Vec::Constant(1, 2.0), Vec::Constant(1, -2.0)};
  p.G = {Mat::Constant(1, 1, 0.2), Mat::Constant(1, 1, 0.2)};
  const RegimeModel m(p);
  int wins = 0;
  for (int r = 0; r < 100; ++r) {
    const SimulatedPath sp = simulate(m, 20, 40 + r);
    std::vector<int> flipped = sp.regimes;
    for (int& a : flipped) a = 1 - a;
    wins += complete_data_loglik(m, sp.regimes, sp.states, sp.observations) >
            complete_data_loglik(m, flipped, sp.states, sp.observations);
  }
  CHECK(wins >= 95);
}

TEST_CASE("single-regime intermediate quantity equals the RTS closed form") {
  std::mt19937_64 gen(17);
  for (int rep = 0; rep < 4; ++rep) {
    const RegimeModel m = oracle::random_model(gen, 1, 1 + rep % 2, 2);
    const RegimeModel other = oracle::random_model(gen, 1, 1 + rep % 2, 2);
    const SimulatedPath sp = simulate(m, 25, 60 + rep);
    EStepSettings es;
    es.particles = 7;
    const SmoothedSufficientStats s = e_step(m, sp.observations, es, 5);
    CHECK(expected_loglik(s, m).total() ==
          doctest::Approx(rts_intermediate_quantity(m, m, sp.observations)).epsilon(1e-6));
    CHECK(expected_loglik(s, other).total() ==
          doctest::Approx(rts_intermediate_quantity(m, other, sp.observations)).epsilon(1e-6));
    // The trajectory-based route gives the same numbers.
    const SmoothedSufficientStats f = e_step_ffbs(m, sp.observations, es, 5);
    CHECK(expected_loglik(f, other).total() == doctest::Approx(expected_loglik(s, other).total()).epsilon(1e-8));
  }
}

TEST_CASE("pairwise weights marginalize to the smoothing marginals") {
  const RegimeModel m = benchmark_model();
  const SimulatedPath sp = simulate(m, 12, 3);
  EStepSettings es;
  es.particles = 60;
  const SmoothedSufficientStats s = e_step(m, sp.observations, es, 21);
  MethodSettings ms;
  ms.particles = 60;
  const SmoothingMarginals tf = run_method(m, sp.observations, SmoothingMethod::kTwoFilterRejuv, ms, 21);
  for (int i = 0; i < 12; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (int j = 0; j < 2; ++j) {
      double sum = s.prob[ui][static_cast<std::size_t>(j)];
      if (i > 0) {
        sum = 0.0;
        for (int k = 0; k < 2; ++k) sum += s.pair[ui][static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
      }
      CHECK(std::abs(sum - tf.prob[ui][static_cast<std::size_t>(j)]) < 1e-8);
    }
  }
  const double a = expected_loglik(s, m).total();
  const double b = expected_loglik(e_step(m, sp.observations, es, 21), m).total();
  CHECK(std::isfinite(a));
  CHECK(a == b);
}

TEST_CASE("CMA-ES on a 13-dimensional quadratic") {
  VectorXd target(13);
  for (int i = 0; i < 13; ++i) target(i) = 0.1 * (i - 6);
  CmaesSettings s;
  s.sigma0 = 0.3;
  s.max_evaluations = 5000;
  const CmaesResult r = cmaes_maximize([&](const VectorXd& x) { return -(x - target).squaredNorm(); },
                                       VectorXd::Zero(13), s, 3);
  CHECK(r.evaluations <= 5000);
  CHECK((r.best - target).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("CMA-ES respects the repair map and is deterministic") {
  // Unconstrained optimum at α₁ = −1 < α₂ = 1.
  auto f = [](const VectorXd& x) { return -std::pow(x(0) + 1.0, 2) - std::pow(x(1) - 1.0, 2); };
  auto repair = [](VectorXd& x) {
    if (x(0) < x(1)) x(0) = x(1) = 0.5 * (x(0) + x(1));
  };
  CmaesSettings s;
  s.sigma0 = 0.5;
  s.max_evaluations = 2000;
  const CmaesResult a = cmaes_maximize(f, VectorXd::Zero(2), s, 9, repair);
  CHECK(a.best(0) >= a.best(1));
  const CmaesResult b = cmaes_maximize(f, VectorXd::Zero(2), s, 9, repair);
  CHECK(a.best == b.best);
  CHECK(a.evaluations == b.evaluations);

  CmaesSettings tight = s;
  tight.max_evaluations = 20;
  tight.tol_x = 0.0;
  CHECK(cmaes_maximize(f, VectorXd::Zero(2), tight, 1).budget_exhausted);
}

TEST_CASE("parameter packing and projection") {
  TwoFactorParams p = calibration_start_params();
  p.mu1 = Vec{{4.0, 0.05}};
  VectorXd x = pack_params(p);
  CHECK(x.size() == 15);
  const TwoFactorParams back = unpack_params(x, p);
  CHECK(back.alpha == p.alpha);
  CHECK(back.g == p.g);
  CHECK(back.Q(0, 1) == doctest::Approx(p.Q(0, 1)).epsilon(1e-15));

  x(1) = -0.2;  // α₁ below α₂ = −0.05
  x(3) = -1.0;  // σ₁
  x(7) = 1.5;   // ρ₁
  project_params(x, 2, 4, ParamBounds{});
  const TwoFactorParams q = unpack_params(x, p);
  CHECK(q.alpha[0] >= q.alpha[1]);
  CHECK(q.alpha[0] == doctest::Approx(-0.125));
  CHECK(q.sigma[0] == doctest::Approx(1e-4));
  CHECK(q.rho[0] == doctest::Approx(0.999));
}

TEST_CASE("one EM iteration on a short panel") {
  TwoFactorParams p = calibration_start_params();
  p.mu1 = Vec{{4.0, 0.05}};
  const SimulatedPanel sim = simulate_panel(p, default_maturities(), 30, 2);
  EmConfig cfg;
  cfg.initial = p;
  cfg.iterations = 2;
  cfg.estep.particles = 20;
  cfg.optimizer.max_evaluations = 600;
  cfg.seed = 4;
  const EmResult r = em_run(cfg, sim.panel);
  REQUIRE(r.trace.size() == 2);
  for (const EmIteration& it : r.trace) {
    CHECK(std::isfinite(it.q_current));
    CHECK(it.params.alpha[0] >= it.params.alpha[1]);
  }
  CHECK(r.posterior.size() == 30);
  const EmResult again = em_run(cfg, sim.panel);
  CHECK(again.trace.back().q_next == r.trace.back().q_next);
}
