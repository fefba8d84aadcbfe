#include "rbsmc/two_filter.hpp"

#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "rbsmc/errors.hpp"

namespace rbsmc {

namespace {

PredictiveComponent make_component(int ancestor, int regime, double log_w, Vec mean, Mat cov) {
  PredictiveComponent c;
  c.ancestor = ancestor;
  c.regime = regime;
  c.log_w = log_w;
  c.mean = std::move(mean);
  c.cov = std::move(cov);
  c.root = covariance_root(c.cov);
  return c;
}

std::vector<double> normalized_row(const std::vector<LogSumExp>& acc) {
  std::vector<double> lv(acc.size());
  for (std::size_t j = 0; j < acc.size(); ++j) lv[j] = acc[j].value();
  normalize_log_weights(lv, "smoothing merge");
  for (double& v : lv) v = std::exp(v);
  return lv;
}

SmoothingMarginals single_time(std::vector<double> prob, const MomentAccumulator* moments) {
  SmoothingMarginals out;
  out.prob.push_back(std::move(prob));
  if (moments) {
    out.state_mean.push_back(moments->mean());
    out.state_cov.push_back(moments->cov());
  }
  return out;
}

}  // namespace

double ForwardPredictiveMixture::log_density(int regime, const Vec& z) const {
  LogSumExp acc;
  for (const PredictiveComponent& c : components) {
    if (c.regime == regime) acc.add(c.log_w + log_normal_pdf(z, c.mean, c.cov));
  }
  return acc.value();
}

ForwardPredictiveMixture forward_predictive_mixture(const RegimeModel& model, const ParticleCloud& cloud_prev) {
  ForwardPredictiveMixture out;
  const int J = model.num_regimes();
  out.components.reserve(cloud_prev.particles.size() * static_cast<std::size_t>(J));
  for (int k = 0; k < cloud_prev.size(); ++k) {
    const Particle& p = cloud_prev.particles[static_cast<std::size_t>(k)];
    for (int j = 0; j < J; ++j) {
      const double lq = model.log_Q(p.regime, j);
      if (lq == kNegInf || p.log_w == kNegInf) continue;
      KalmanStat pred = kalman_predict(model, p.stat, j);
      out.components.push_back(make_component(k, j, p.log_w + lq, std::move(pred.mu), std::move(pred.P)));
    }
  }
  return out;
}

ForwardPredictiveMixture prior_mixture(const RegimeModel& model) {
  ForwardPredictiveMixture out;
  for (int j = 0; j < model.num_regimes(); ++j) {
    if (model.log_pi(j) == kNegInf) continue;
    out.components.push_back(make_component(-1, j, model.log_pi(j), model.mu1(), model.Sigma1()));
  }
  return out;
}

PredictiveComponent moment_match(std::span<const PredictiveComponent> components) {
  if (components.empty()) throw ValidationError("invalid-input", "cannot moment-match an empty mixture");
  MomentAccumulator acc(static_cast<int>(components.front().mean.size()));
  for (const PredictiveComponent& c : components) acc.add(c.log_w, c.mean, c.cov);
  return make_component(-1, components.front().regime, acc.log_mass(), acc.mean(), acc.cov());
}

ArtificialDensitySchedule default_gamma_schedule(const RegimeModel& model, std::span<const ParticleCloud> clouds,
                                                 bool full_mixture) {
  const int J = model.num_regimes();
  ArtificialDensitySchedule schedule;
  schedule.gamma.resize(clouds.size());
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    const ForwardPredictiveMixture mix = i == 0 ? prior_mixture(model) : forward_predictive_mixture(model, clouds[i - 1]);
    std::vector<std::vector<PredictiveComponent>> by_regime(static_cast<std::size_t>(J));
    for (const PredictiveComponent& c : mix.components) by_regime[static_cast<std::size_t>(c.regime)].push_back(c);
    for (auto& comps : by_regime) {
      if (!full_mixture && comps.size() > 1) comps = {moment_match(comps)};
    }
    schedule.gamma[i] = std::move(by_regime);
  }
  return schedule;
}

double gamma_backward_integral(const ArtificialDensitySchedule& schedule, int i, int regime,
                               const BackwardInfoStat& stat) {
  LogSumExp acc;
  for (const PredictiveComponent& c : schedule.gamma[static_cast<std::size_t>(i)][static_cast<std::size_t>(regime)]) {
    acc.add(c.log_w + log_gaussian_info_factor(c.mean, c.root, stat.P_inv, stat.nu));
  }
  const double v = acc.value();
  return v == kNegInf ? kNegInf : v - 0.5 * stat.c_tilde;
}

std::vector<BackwardParticleCloud> backward_filter_pass(const RegimeModel& model, std::span<const Vec> ys,
                                                        const ArtificialDensitySchedule& schedule, int N,
                                                        std::uint64_t seed) {
  const int n = static_cast<int>(ys.size());
  const int J = model.num_regimes();
  if (n < 1 || schedule.gamma.size() != ys.size()) {
    throw ValidationError("invalid-input", "artificial density schedule must cover every time index");
  }
  if (N < 1) throw ValidationError("invalid-input", "particle count must be at least 1");
  Rng rng(seed, 0x42574B44ULL);
  std::vector<BackwardParticleCloud> clouds(static_cast<std::size_t>(n));

  // Candidate extensions for one parent: J folded statistics and their
  // log proposal masses log Q(j, ã_{i+1}) + log ∫γ_i(j) p.
  struct Candidates {
    std::vector<BackwardInfoStat> stat;
    std::vector<double> log_integral;
    std::vector<double> log_q;
    double log_total = kNegInf;
  };
  auto degenerate = [](int i) {
    throw NumericalError("degenerate-backward",
                         "backward proposal has zero mass at time index " + std::to_string(i + 1));
  };

  {
    const int i = n - 1;
    Candidates cand;
    for (int j = 0; j < J; ++j) {
      cand.stat.push_back(backward_info_terminal(model, j, ys[static_cast<std::size_t>(i)]));
      cand.log_integral.push_back(gamma_backward_integral(schedule, i, j, cand.stat.back()));
    }
    if (!std::isfinite(log_sum_exp(cand.log_integral))) degenerate(i);
    BackwardParticleCloud& cloud = clouds.back();
    cloud.time = i;
    const double lw = -std::log(static_cast<double>(N));
    for (int l = 0; l < N; ++l) {
      const int j = rng.categorical_log(cand.log_integral);
      cloud.particles.push_back(BackwardParticle{j, -1, lw, cand.stat[static_cast<std::size_t>(j)],
                                                 cand.log_integral[static_cast<std::size_t>(j)]});
    }
  }

  for (int i = n - 2; i >= 0; --i) {
    const BackwardParticleCloud& next = clouds[static_cast<std::size_t>(i) + 1];
    std::vector<double> next_lw(next.particles.size());
    for (std::size_t l = 0; l < next_lw.size(); ++l) next_lw[l] = next.particles[l].log_w;
    const std::vector<int> parents = systematic_resample(next_lw, N, rng);

    std::map<int, Candidates> cache;
    BackwardParticleCloud& cloud = clouds[static_cast<std::size_t>(i)];
    cloud.time = i;
    std::vector<double> lw;
    for (const int parent : parents) {
      const BackwardParticle& bp = next.particles[static_cast<std::size_t>(parent)];
      auto it = cache.find(parent);
      if (it == cache.end()) {
        Candidates cand;
        const BackwardInfoStat prop = backward_info_propagate(model, bp.stat, bp.regime);
        for (int j = 0; j < J; ++j) {
          cand.stat.push_back(backward_info_fold(model, prop, j, ys[static_cast<std::size_t>(i)]));
          const double lq = model.log_Q(j, bp.regime);
          const double li = lq == kNegInf ? kNegInf : gamma_backward_integral(schedule, i, j, cand.stat.back());
          cand.log_integral.push_back(li);
          cand.log_q.push_back(lq == kNegInf || li == kNegInf ? kNegInf : lq + li);
        }
        cand.log_total = log_sum_exp(cand.log_q);
        if (!std::isfinite(cand.log_total)) degenerate(i);
        it = cache.emplace(parent, std::move(cand)).first;
      }
      const Candidates& cand = it->second;
      const int j = rng.categorical_log(cand.log_q);
      cloud.particles.push_back(BackwardParticle{j, parent, 0.0, cand.stat[static_cast<std::size_t>(j)],
                                                 cand.log_integral[static_cast<std::size_t>(j)]});
      lw.push_back(cand.log_total - bp.log_integral);
    }
    normalize_log_weights(lw, "backward information particles");
    for (std::size_t l = 0; l < lw.size(); ++l) cloud.particles[l].log_w = lw[l];
  }
  return clouds;
}

std::vector<BackwardParticle> distinct_particles(const BackwardParticleCloud& cloud) {
  std::map<std::pair<int, int>, std::size_t> index;
  std::vector<BackwardParticle> out;
  std::vector<LogSumExp> weight;
  for (const BackwardParticle& p : cloud.particles) {
    const auto key = std::make_pair(p.parent, p.regime);
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, out.size());
      out.push_back(p);
      weight.emplace_back();
      weight.back().add(p.log_w);
    } else {
      weight[it->second].add(p.log_w);
    }
  }
  for (std::size_t l = 0; l < out.size(); ++l) out[l].log_w = weight[l].value();
  return out;
}

SmoothingMarginals merge_plain(const RegimeModel& model, const ForwardPredictiveMixture& fwd,
                               const BackwardParticleCloud& bwd, bool state_moments) {
  const int J = model.num_regimes();
  const int m = model.state_dim();
  const std::vector<BackwardParticle> parts = distinct_particles(bwd);
  std::vector<LogSumExp> acc(static_cast<std::size_t>(J));
  MomentAccumulator moments(m);
  for (const BackwardParticle& b : parts) {
    const double base = b.log_w - b.log_integral - 0.5 * b.stat.c_tilde;
    for (const PredictiveComponent& c : fwd.components) {
      if (c.regime != b.regime) continue;
      if (state_moments) {
        const WeightedNormal post = gaussian_info_posterior(c.mean, c.root, b.stat.P_inv, b.stat.nu);
        const double lw = base + c.log_w + post.log_w;
        acc[static_cast<std::size_t>(c.regime)].add(lw);
        moments.add(lw, post.mean, post.cov);
      } else {
        acc[static_cast<std::size_t>(c.regime)].add(
            base + c.log_w + log_gaussian_info_factor(c.mean, c.root, b.stat.P_inv, b.stat.nu));
      }
    }
  }
  return single_time(normalized_row(acc), state_moments ? &moments : nullptr);
}

double RejuvenationMixture::log_eval(const RegimeModel& model, int regime, const Vec& z) const {
  LogSumExp acc;
  for (const RejuvenationComponent& c : components) {
    const double lq = model.log_Q(regime, c.next_regime);
    if (lq == kNegInf) continue;
    acc.add(c.log_w + lq + c.form.log_eval(z));
  }
  return acc.value();
}

RejuvenationMixture rejuvenation_mixture(const RegimeModel& model, const BackwardParticleCloud& bwd_next) {
  RejuvenationMixture out;
  for (const BackwardParticle& b : distinct_particles(bwd_next)) {
    if (b.log_w == kNegInf) continue;
    out.components.push_back(RejuvenationComponent{b.regime, b.log_w - b.log_integral,
                                                   backward_info_propagate(model, b.stat, b.regime)});
  }
  return out;
}

SmoothingMarginals merge_rejuvenated(const RegimeModel& model, std::span<const FilteredComponent> filtered,
                                     const RejuvenationMixture* rej, bool state_moments) {
  const int J = model.num_regimes();
  const int m = model.state_dim();
  std::vector<LogSumExp> acc(static_cast<std::size_t>(J));
  MomentAccumulator moments(m);
  for (const FilteredComponent& f : filtered) {
    if (!rej) {
      acc[static_cast<std::size_t>(f.regime)].add(f.log_w);
      if (state_moments) moments.add(f.log_w, f.mu, f.P);
      continue;
    }
    for (const RejuvenationComponent& t : rej->components) {
      const double lq = model.log_Q(f.regime, t.next_regime);
      if (lq == kNegInf) continue;
      const double base = f.log_w + lq + t.log_w - 0.5 * t.form.c_tilde;
      if (state_moments) {
        const WeightedNormal post = gaussian_info_posterior(f.mu, f.Gamma, t.form.P_inv, t.form.nu);
        acc[static_cast<std::size_t>(f.regime)].add(base + post.log_w);
        moments.add(base + post.log_w, post.mean, post.cov);
      } else {
        acc[static_cast<std::size_t>(f.regime)].add(
            base + log_gaussian_info_factor(f.mu, f.Gamma, t.form.P_inv, t.form.nu));
      }
    }
  }
  return single_time(normalized_row(acc), state_moments ? &moments : nullptr);
}

SmoothingMarginals two_filter_smooth(const RegimeModel& model, std::span<const Vec> ys,
                                     std::span<const ParticleCloud> clouds, int N, std::uint64_t seed,
                                     const TwoFilterOptions& options) {
  if (clouds.size() != ys.size() || ys.empty()) {
    throw ValidationError("invalid-input", "forward clouds and observations must be nonempty and aligned");
  }
  const int n = static_cast<int>(ys.size());
  const ArtificialDensitySchedule schedule = default_gamma_schedule(model, clouds, options.full_gamma_mixture);
  const std::vector<BackwardParticleCloud> bwd = backward_filter_pass(model, ys, schedule, N, seed);
  SmoothingMarginals out;
  for (int i = 0; i < n; ++i) {
    SmoothingMarginals row;
    if (options.rejuvenate) {
      const std::vector<FilteredComponent> filt = rejuvenation_components(model, clouds, ys, i);
      if (i + 1 < n) {
        const RejuvenationMixture rej = rejuvenation_mixture(model, bwd[static_cast<std::size_t>(i) + 1]);
        row = merge_rejuvenated(model, filt, &rej, options.state_moments);
      } else {
        row = merge_rejuvenated(model, filt, nullptr, options.state_moments);
      }
    } else {
      const ForwardPredictiveMixture fwd =
          i == 0 ? prior_mixture(model) : forward_predictive_mixture(model, clouds[static_cast<std::size_t>(i) - 1]);
      row = merge_plain(model, fwd, bwd[static_cast<std::size_t>(i)], options.state_moments);
    }
    out.prob.push_back(std::move(row.prob.front()));
    if (options.state_moments) {
      out.state_mean.push_back(row.state_mean.front());
      out.state_cov.push_back(row.state_cov.front());
    }
  }
  return out;
}

}  // namespace rbsmc
