#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rbsmc/errors.hpp"
#include "rbsmc/oracle.hpp"
#include "rbsmc/simulate.hpp"

using namespace rbsmc;

TEST_CASE("identical regimes give flat marginals") {
  RegimeParams p = benchmark_model().params();
  p.Q = Eigen::MatrixXd::Constant(2, 2, 0.5);
  p.d[1] = p.d[0];
  p.c[1] = p.c[0];
  p.G[1] = p.G[0];
  const RegimeModel m(p);
  const SimulatedPath sp = simulate(m, 6, 2);
  const OracleResult o = enumerate_posterior(m, sp.observations);
  for (const auto& row : o.smoothing.prob) CHECK(row[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("J = 1 enumeration is the RTS smoother") {
  std::mt19937_64 gen(4);
  const RegimeModel m = oracle::random_model(gen, 1, 2, 2);
  const SimulatedPath sp = simulate(m, 8, 3);
  const OracleResult o = enumerate_posterior(m, sp.observations);
  const oracle::Rts ref = oracle::kalman_rts(m, std::vector<int>(8, 0), sp.observations);
  CHECK(o.log_evidence == doctest::Approx(ref.loglik).epsilon(1e-12));
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(o.smoothing.prob[i][0] == 1.0);
    CHECK(oracle::rel_err(oracle::dense(o.smoothing.state_mean[i]), ref.smooth_mean[i]) < 1e-10);
    CHECK(oracle::rel_err(oracle::dense(o.smoothing.state_cov[i]), ref.smooth_cov[i]) < 1e-10);
  }
}

TEST_CASE("joint table summed in two orders") {
  const RegimeModel m = benchmark_model();
  const SimulatedPath sp = simulate(m, 8, 1);
  const OracleResult o = enumerate_posterior(m, sp.observations, false);
  REQUIRE(o.log_joint.size() == 256);
  // Forward order, and grouped by the last regime first.
  double fwd = 0.0;
  for (double v : o.log_joint) fwd += std::exp(v);
  double grouped = 0.0;
  for (int last = 0; last < 2; ++last) {
    double part = 0.0;
    for (int s = 255; s >= 0; --s) {
      if (s % 2 == last) part += std::exp(o.log_joint[static_cast<std::size_t>(s)]);
    }
    grouped += part;
  }
  CHECK(std::abs(fwd - grouped) <= 1e-12 * fwd);
  CHECK(std::log(fwd) == doctest::Approx(o.log_evidence).epsilon(1e-12));

  // Marginal of a₁ from the table vs the smoothing output.
  double first0 = 0.0;
  for (int s = 0; s < 128; ++s) first0 += std::exp(o.log_joint[static_cast<std::size_t>(s)]);
  CHECK(first0 / fwd == doctest::Approx(o.smoothing.prob[0][0]).epsilon(1e-12));
}

TEST_CASE("each joint entry is a regime-path likelihood") {
  const RegimeModel m = benchmark_model();
  const SimulatedPath sp = simulate(m, 4, 5);
  const OracleResult o = enumerate_posterior(m, sp.observations, false);
  const std::vector<int> a{1, 0, 0, 1};
  const double prior = std::log(m.pi(1) * m.Q(1, 0) * m.Q(0, 0) * m.Q(0, 1));
  const double ll = oracle::kalman_rts(m, a, sp.observations).loglik;
  CHECK(o.log_joint[0b1001] == doctest::Approx(prior + ll).epsilon(1e-12));
}

TEST_CASE("oversized instances are refused") {
  const RegimeModel m = benchmark_model();
  const SimulatedPath sp = simulate(m, 21, 1);
  CHECK_THROWS_AS(enumerate_posterior(m, sp.observations), ValidationError);
}
