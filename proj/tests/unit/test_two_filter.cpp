#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rbsmc/benchmark.hpp"
#include "rbsmc/components.hpp"
#include "rbsmc/oracle.hpp"
#include "rbsmc/simulate.hpp"
#include "rbsmc/two_filter.hpp"

using namespace rbsmc;

TEST_CASE("single-particle predictive mixture is the Kalman predictive") {
  std::mt19937_64 gen(2);
  const RegimeModel m = oracle::random_model(gen, 1, 2, 2);
  const SimulatedPath sp = simulate(m, 4, 1);
  const auto clouds = forward_pass(m, sp.observations, 1, SelectionScheme::kKLOS, 1);
  const ForwardPredictiveMixture mix = forward_predictive_mixture(m, clouds[1]);
  REQUIRE(mix.components.size() == 1);
  const oracle::Rts ref = oracle::kalman_rts(m, {0, 0, 0, 0}, sp.observations);
  const Eigen::MatrixXd T = oracle::dense(m.regime(0).T);
  const Eigen::VectorXd mean = oracle::dense(m.regime(0).d) + T * ref.filt_mean[1];
  const Eigen::MatrixXd cov = T * ref.filt_cov[1] * T.transpose() + oracle::dense(m.regime(0).Hbar);
  CHECK(oracle::rel_err(oracle::dense(mix.components[0].mean), mean) < 1e-12);
  CHECK(oracle::rel_err(oracle::dense(mix.components[0].cov), cov) < 1e-12);
  CHECK(mix.components[0].log_w == doctest::Approx(0.0));
}

TEST_CASE("predictive mixture integrates to one") {
  const RegimeModel m = benchmark_model();
  const SimulatedPath sp = simulate(m, 3, 5);
  const auto clouds = forward_pass(m, sp.observations, 30, SelectionScheme::kKLOS, 2);
  const ForwardPredictiveMixture mix = forward_predictive_mixture(m, clouds[1]);
  double total = 0.0;
  for (int j = 0; j < 2; ++j) {
    total += oracle::integrate([&](double z) { return std::exp(mix.log_density(j, Vec::Constant(1, z))); }, -15, 15);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("J = 1 backward suffixes and merges") {
  std::mt19937_64 gen(3);
  const RegimeModel m = oracle::random_model(gen, 1, 2, 3);
  const SimulatedPath sp = simulate(m, 10, 6);
  const auto clouds = forward_pass(m, sp.observations, 5, SelectionScheme::kKLOS, 3);
  const auto sched = default_gamma_schedule(m, clouds);
  const auto bwd = backward_filter_pass(m, sp.observations, sched, 6, 4);
  for (const BackwardParticleCloud& c : bwd) {
    for (const BackwardParticle& p : c.particles) CHECK(p.regime == 0);
  }
  const oracle::Rts ref = oracle::kalman_rts(m, std::vector<int>(10, 0), sp.observations);
  for (bool rejuvenate : {true, false}) {
    TwoFilterOptions opt;
    opt.rejuvenate = rejuvenate;
    opt.state_moments = true;
    const SmoothingMarginals s = two_filter_smooth(m, sp.observations, clouds, 6, 4, opt);
    for (int i = 0; i < 10; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      CHECK(s.prob[ui][0] == doctest::Approx(1.0));
      CHECK(oracle::rel_err(oracle::dense(s.state_mean[ui]), ref.smooth_mean[ui]) < 1e-8);
      CHECK(oracle::rel_err(oracle::dense(s.state_cov[ui]), ref.smooth_cov[ui]) < 1e-8);
    }
  }
}

TEST_CASE("rejuvenation mixture against direct integration") {
  const RegimeModel m = benchmark_model();
  const SimulatedPath sp = simulate(m, 6, 7);
  const auto clouds = forward_pass(m, sp.observations, 50, SelectionScheme::kKLOS, 5);
  const auto sched = default_gamma_schedule(m, clouds);
  const auto bwd = backward_filter_pass(m, sp.observations, sched, 50, 6);
  const int i = 2;
  const RejuvenationMixture rej = rejuvenation_mixture(m, bwd[i + 1]);
  for (int a = 0; a < 2; ++a) {
    for (double z : {-1.0, 0.0, 0.7, 2.0}) {
      double direct = 0.0;
      for (const BackwardParticle& b : bwd[i + 1].particles) {
        const double inner = oracle::log_integrate_peaked(
            [&](double zp) {
              return transition_logdensity(m, b.regime, Vec::Constant(1, z), Vec::Constant(1, zp)) +
                     b.stat.log_eval(Vec::Constant(1, zp));
            },
            -30, 30);
        direct += std::exp(b.log_w - b.log_integral + inner) * m.Q(a, b.regime);
      }
      CHECK(rej.log_eval(m, a, Vec::Constant(1, z)) == doctest::Approx(std::log(direct)).epsilon(1e-8));
    }
  }
}

TEST_CASE("diffuse dynamics flatten the rejuvenation factor") {
  RegimeParams p = benchmark_model().params();
  p.H = {Mat::Constant(1, 1, 1e3), Mat::Constant(1, 1, 1e3)};  // H̄ = 10⁶
  const RegimeModel m(p);
  const SimulatedPath sp = simulate(benchmark_model(), 4, 8);
  const auto clouds = forward_pass(m, sp.observations, 20, SelectionScheme::kKLOS, 1);
  const auto bwd = backward_filter_pass(m, sp.observations, default_gamma_schedule(m, clouds), 20, 2);
  const RejuvenationMixture rej = rejuvenation_mixture(m, bwd[2]);
  for (const RejuvenationComponent& c : rej.components) CHECK(std::abs(c.form.P_inv(0, 0)) < 1e-6);
}

TEST_CASE("a one-hot transition row keeps only matching components") {
  RegimeParams p = benchmark_model().params();
  p.Q << 0.0, 1.0, 0.5, 0.5;
  const RegimeModel m(p);
  const SimulatedPath sp = simulate(benchmark_model(), 5, 9);
  const auto clouds = forward_pass(m, sp.observations, 40, SelectionScheme::kKLOS, 1);
  const auto bwd = backward_filter_pass(m, sp.observations, default_gamma_schedule(m, clouds), 40, 2);
  const RejuvenationMixture rej = rejuvenation_mixture(m, bwd[2]);
  // From regime 0 only the regime-1 successors contribute.
  RejuvenationMixture only1;
  for (const auto& c : rej.components) {
    if (c.next_regime == 1) only1.components.push_back(c);
  }
  const Vec z = Vec::Constant(1, 0.3);
  CHECK(rej.log_eval(m, 0, z) == doctest::Approx(only1.log_eval(m, 0, z)).epsilon(1e-14));
}

TEST_CASE("two-filter smoothers converge to enumeration") {
  const RegimeModel m = benchmark_model();
  const SimulatedPath sp = simulate(m, 10, 1);
  const OracleResult o = enumerate_posterior(m, sp.observations, false);
  MethodSettings s;
  s.particles = 2000;
  CHECK(marginal_mae(run_method(m, sp.observations, SmoothingMethod::kTwoFilterRejuv, s, 3), o.smoothing) < 0.02);
  CHECK(marginal_mae(run_method(m, sp.observations, SmoothingMethod::kTwoFilter, s, 3), o.smoothing) < 0.03);
}

TEST_CASE("rejuvenated merge at short horizons") {
  const RegimeModel m = benchmark_model();
  std::vector<double> maes;
  for (int seed = 0; seed < 20; ++seed) {
    const SimulatedPath sp = simulate(m, 3, 100 + seed);
    const OracleResult o = enumerate_posterior(m, sp.observations, false);
    MethodSettings s;
    s.particles = 500;
    maes.push_back(marginal_mae(run_method(m, sp.observations, SmoothingMethod::kTwoFilterRejuv, s, seed), o.smoothing));
  }
  std::nth_element(maes.begin(), maes.begin() + 10, maes.end());
  CHECK(maes[10] < 0.03);
}
