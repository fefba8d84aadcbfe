#include "rbsmc/ffbs.hpp"

#include <cmath>
#include <map>
#include <string>

#include "rbsmc/errors.hpp"
#include "rbsmc/oracle.hpp"

namespace rbsmc {

namespace {

void check_inputs(std::span<const ParticleCloud> clouds, std::span<const Vec> ys, int n_tilde) {
  if (clouds.empty() || clouds.size() != ys.size()) {
    throw ValidationError("invalid-input", "forward clouds and observations must be nonempty and aligned");
  }
  if (n_tilde < 1) throw ValidationError("invalid-input", "backward trajectory count must be at least 1");
}

[[noreturn]] void degenerate(int i) {
  throw NumericalError("degenerate-weights",
                       "all backward weights vanish at time index " + std::to_string(i + 1));
}

// log Σ_e w_e ∫ N(z; μ_e, P_e) exp{−½z'Ωz + λ'z} dz per regime.
std::vector<double> regime_log_mass(int J, std::span<const FilteredComponent> comps, const FfbsBackwardStat* prop) {
  std::vector<LogSumExp> acc(static_cast<std::size_t>(J));
  for (const FilteredComponent& c : comps) {
    double lw = c.log_w;
    if (prop) lw += log_gaussian_info_factor(c.mu, c.Gamma, prop->Omega, prop->lambda);
    acc[static_cast<std::size_t>(c.regime)].add(lw);
  }
  std::vector<double> out(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) out[static_cast<std::size_t>(j)] = acc[static_cast<std::size_t>(j)].value();
  return out;
}

}  // namespace

std::vector<BackwardTrajectory> ffbs_sample_plain(const RegimeModel& model, std::span<const ParticleCloud> clouds,
                                                  std::span<const Vec> ys, int n_tilde, std::uint64_t seed) {
  check_inputs(clouds, ys, n_tilde);
  const int n = static_cast<int>(clouds.size());
  std::vector<std::vector<FilteredComponent>> comps;
  comps.reserve(clouds.size());
  for (const ParticleCloud& c : clouds) comps.push_back(cloud_components(c));

  std::vector<BackwardTrajectory> out(static_cast<std::size_t>(n_tilde));
  std::vector<double> lw;
  for (int t = 0; t < n_tilde; ++t) {
    Rng rng(seed, static_cast<std::uint64_t>(t));
    BackwardTrajectory& traj = out[static_cast<std::size_t>(t)];
    traj.regimes.resize(static_cast<std::size_t>(n));
    traj.stats.resize(static_cast<std::size_t>(n));

    const auto& last = comps.back();
    lw.resize(last.size());
    for (std::size_t k = 0; k < last.size(); ++k) lw[k] = last[k].log_w;
    int k = rng.categorical_log(lw);
    int a_next = last[static_cast<std::size_t>(k)].regime;
    traj.regimes.back() = a_next;
    traj.stats.back() = ffbs_backward_terminal(model, a_next, ys.back());

    for (int i = n - 2; i >= 0; --i) {
      const FfbsBackwardStat prop = ffbs_backward_propagate(model, traj.stats[static_cast<std::size_t>(i) + 1], a_next);
      const auto& cs = comps[static_cast<std::size_t>(i)];
      lw.resize(cs.size());
      bool any = false;
      for (std::size_t e = 0; e < cs.size(); ++e) {
        const double lq = model.log_Q(cs[e].regime, a_next);
        lw[e] = lq == kNegInf ? kNegInf
                              : cs[e].log_w + lq + log_gaussian_info_factor(cs[e].mu, cs[e].Gamma, prop.Omega, prop.lambda);
        any = any || lw[e] != kNegInf;
      }
      if (!any) degenerate(i);
      k = rng.categorical_log(lw);
      a_next = cs[static_cast<std::size_t>(k)].regime;
      traj.regimes[static_cast<std::size_t>(i)] = a_next;
      traj.stats[static_cast<std::size_t>(i)] = ffbs_backward_fold(model, prop, a_next, ys[static_cast<std::size_t>(i)]);
    }
  }
  return out;
}

std::vector<double> rejuvenated_step_distribution(const RegimeModel& model,
                                                  std::span<const FilteredComponent> components,
                                                  const FfbsBackwardStat* propagated, int next_regime) {
  const int J = model.num_regimes();
  std::vector<double> lw = regime_log_mass(J, components, propagated);
  if (propagated) {
    for (int j = 0; j < J; ++j) lw[static_cast<std::size_t>(j)] += model.log_Q(j, next_regime);
  }
  normalize_log_weights(lw, "rejuvenated backward step");
  for (double& v : lw) v = std::exp(v);
  return lw;
}

std::vector<BackwardTrajectory> ffbs_sample_rejuvenated(const RegimeModel& model,
                                                        std::span<const ParticleCloud> clouds,
                                                        std::span<const Vec> ys, int n_tilde, std::uint64_t seed) {
  check_inputs(clouds, ys, n_tilde);
  const int n = static_cast<int>(clouds.size());
  const int J = model.num_regimes();
  // p^N(a_i, z_i | y_{1:i}) over all regimes, shared by every trajectory.
  std::vector<std::vector<FilteredComponent>> comps(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) comps[static_cast<std::size_t>(i)] = rejuvenation_components(model, clouds, ys, i);
  const std::vector<double> terminal = regime_log_mass(J, comps.back(), nullptr);

  std::vector<BackwardTrajectory> out(static_cast<std::size_t>(n_tilde));
  std::vector<double> lw(static_cast<std::size_t>(J));
  for (int t = 0; t < n_tilde; ++t) {
    Rng rng(seed, static_cast<std::uint64_t>(t));
    BackwardTrajectory& traj = out[static_cast<std::size_t>(t)];
    traj.regimes.resize(static_cast<std::size_t>(n));
    traj.stats.resize(static_cast<std::size_t>(n));
    int a_next = rng.categorical_log(terminal);
    traj.regimes.back() = a_next;
    traj.stats.back() = ffbs_backward_terminal(model, a_next, ys.back());
    for (int i = n - 2; i >= 0; --i) {
      const FfbsBackwardStat prop = ffbs_backward_propagate(model, traj.stats[static_cast<std::size_t>(i) + 1], a_next);
      lw = regime_log_mass(J, comps[static_cast<std::size_t>(i)], &prop);
      bool any = false;
      for (int j = 0; j < J; ++j) {
        lw[static_cast<std::size_t>(j)] += model.log_Q(j, a_next);
        any = any || lw[static_cast<std::size_t>(j)] != kNegInf;
      }
      if (!any) degenerate(i);
      a_next = rng.categorical_log(lw);
      traj.regimes[static_cast<std::size_t>(i)] = a_next;
      traj.stats[static_cast<std::size_t>(i)] = ffbs_backward_fold(model, prop, a_next, ys[static_cast<std::size_t>(i)]);
    }
  }
  return out;
}

SmoothingMarginals marginal_estimate(std::span<const BackwardTrajectory> trajectories, int J) {
  if (trajectories.empty()) throw ValidationError("invalid-input", "no trajectories to average");
  const std::size_t n = trajectories.front().regimes.size();
  SmoothingMarginals out;
  out.prob.assign(n, std::vector<double>(static_cast<std::size_t>(J), 0.0));
  const double w = 1.0 / static_cast<double>(trajectories.size());
  for (const BackwardTrajectory& t : trajectories) {
    for (std::size_t i = 0; i < n; ++i) out.prob[i][static_cast<std::size_t>(t.regimes[i])] += w;
  }
  return out;
}

SmoothingMarginals marginal_estimate(std::span<const BackwardTrajectory> trajectories, const RegimeModel& model,
                                     std::span<const Vec> ys) {
  SmoothingMarginals out = marginal_estimate(trajectories, model.num_regimes());
  std::map<std::vector<int>, int> counts;
  for (const BackwardTrajectory& t : trajectories) ++counts[t.regimes];
  const std::size_t n = ys.size();
  std::vector<MomentAccumulator> acc(n, MomentAccumulator(model.state_dim()));
  for (const auto& [path, count] : counts) {
    const RtsResult r = rts_given_regimes(model, path, ys);
    for (std::size_t i = 0; i < n; ++i) acc[i].add(std::log(static_cast<double>(count)), r.mean[i], r.cov[i]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.state_mean.push_back(acc[i].mean());
    out.state_cov.push_back(acc[i].cov());
  }
  return out;
}

}  // namespace rbsmc
