#include "rbsmc/simulate.hpp"

#include <cmath>

#include "rbsmc/errors.hpp"
#include "rbsmc/rng.hpp"

namespace rbsmc {

namespace {

Vec standard_normal(Rng& rng, int dim) {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.normal();
  return v;
}

int draw(Rng& rng, const double* probs, int J) {
  return rng.categorical(std::span<const double>(probs, static_cast<std::size_t>(J)));
}

}  // namespace

SimulatedPath simulate(const RegimeModel& model, int n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("invalid-input", "path length must be at least 1");
  const int J = model.num_regimes();
  const int m = model.state_dim();
  const int p = model.obs_dim();
  Rng rng(seed, 0x53494DULL);
  SimulatedPath path;
  std::vector<double> row(static_cast<std::size_t>(J));
  const Mat L1 = model.Sigma1_chol().L;
  for (int i = 0; i < n; ++i) {
    int a;
    Vec z;
    if (i == 0) {
      a = draw(rng, model.params().pi.data(), J);
      z = model.mu1() + L1 * standard_normal(rng, m);
    } else {
      for (int j = 0; j < J; ++j) row[static_cast<std::size_t>(j)] = model.Q(path.regimes.back(), j);
      a = draw(rng, row.data(), J);
      const RegimeTerms& t = model.regime(a);
      z = t.d + t.T * path.states.back() + t.H * standard_normal(rng, m);
    }
    const RegimeTerms& t = model.regime(a);
    Vec y = t.c + t.B * z + t.G * standard_normal(rng, p);
    path.regimes.push_back(a);
    path.states.push_back(std::move(z));
    path.observations.push_back(std::move(y));
  }
  return path;
}

RegimeModel benchmark_model() {
  RegimeParams p;
  p.pi = {0.5, 0.5};
  p.Q.resize(2, 2);
  p.Q << 0.99, 0.01, 0.03, 0.97;
  auto scalar = [](double v) {
    Mat M(1, 1);
    M(0, 0) = v;
    return M;
  };
  auto vec1 = [](double v) {
    Vec x(1);
    x(0) = v;
    return x;
  };
  p.d = {vec1(0.5), vec1(0.0)};
  p.T = {scalar(1.0), scalar(1.0)};
  p.H = {scalar(std::sqrt(0.1)), scalar(std::sqrt(0.1))};
  p.c = {vec1(0.1), vec1(0.0)};
  p.B = {scalar(1.0), scalar(1.0)};
  p.G = {scalar(std::sqrt(0.3)), scalar(std::sqrt(0.1))};
  p.mu1 = vec1(0.0);
  p.Sigma1 = scalar(1.0);
  return RegimeModel(std::move(p));
}

}  // namespace rbsmc
