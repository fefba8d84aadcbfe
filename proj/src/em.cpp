#include "rbsmc/em.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "rbsmc/benchmark.hpp"
#include "rbsmc/components.hpp"
#include "rbsmc/errors.hpp"
#include "rbsmc/ffbs.hpp"
#include "rbsmc/kalman.hpp"
#include "rbsmc/oracle.hpp"
#include "rbsmc/rng.hpp"
#include "rbsmc/smoothing.hpp"
#include "rbsmc/two_filter.hpp"

namespace rbsmc {

double complete_data_loglik(const RegimeModel& model, std::span<const int> regimes, std::span<const Vec> zs,
                            std::span<const Vec> ys) {
  const std::size_t n = ys.size();
  if (n == 0 || regimes.size() != n || zs.size() != n) {
    throw ValidationError("invalid-input", "regimes, states and observations must be nonempty and aligned");
  }
  double ll = model.log_pi(regimes[0]) + log_normal_pdf(zs[0], model.mu1(), model.Sigma1_chol()) +
              observation_logdensity(model, regimes[0], zs[0], ys[0]);
  for (std::size_t i = 1; i < n; ++i) {
    ll += model.log_Q(regimes[i - 1], regimes[i]) + transition_logdensity(model, regimes[i], zs[i - 1], zs[i]) +
          observation_logdensity(model, regimes[i], zs[i], ys[i]);
  }
  return ll;
}

SmoothedSufficientStats SmoothedSufficientStats::zeros(int J, int m, int p, int n) {
  SmoothedSufficientStats s;
  s.J = J;
  s.m = m;
  s.p = p;
  s.n = n;
  s.prob.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(J), 0.0));
  s.pair.resize(static_cast<std::size_t>(n));
  for (int i = 1; i < n; ++i) {
    s.pair[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(J),
                                               std::vector<double>(static_cast<std::size_t>(J), 0.0));
  }
  s.z1_mean = Vec::Zero(m);
  s.z1_second = Mat::Zero(m, m);
  s.transitions = Eigen::MatrixXd::Zero(J, J);
  for (int j = 0; j < J; ++j) {
    Dynamics d;
    d.s_cur = d.s_prev = Vec::Zero(m);
    d.s_cur_cur = d.s_prev_prev = d.s_cur_prev = Mat::Zero(m, m);
    s.dynamics.push_back(d);
    Observation o;
    o.sz = Vec::Zero(m);
    o.szz = Mat::Zero(m, m);
    o.sy = Vec::Zero(p);
    o.syy = Mat::Zero(p, p);
    o.syz = Mat::Zero(p, m);
    s.observation.push_back(o);
  }
  return s;
}

namespace {

void add_observation(SmoothedSufficientStats::Observation& o, double w, const Vec& mean, const Mat& second,
                     const Vec& y) {
  o.w += w;
  o.sz += w * mean;
  o.szz += w * second;
  o.sy += w * y;
  o.syy += w * y * y.transpose();
  o.syz += w * y * mean.transpose();
}

void check_shapes(const SmoothedSufficientStats& a, const SmoothedSufficientStats& b) {
  if (a.J != b.J || a.m != b.m || a.p != b.p || a.n != b.n) {
    throw ValidationError("invalid-input", "sufficient statistics of different shapes");
  }
}

}  // namespace

void add_scaled(SmoothedSufficientStats& into, const SmoothedSufficientStats& other, double weight) {
  check_shapes(into, other);
  for (int i = 0; i < into.n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (int j = 0; j < into.J; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      into.prob[ui][uj] += weight * other.prob[ui][uj];
      if (i > 0) {
        for (int k = 0; k < into.J; ++k) into.pair[ui][static_cast<std::size_t>(k)][uj] += weight * other.pair[ui][static_cast<std::size_t>(k)][uj];
      }
    }
  }
  into.z1_mean += weight * other.z1_mean;
  into.z1_second += weight * other.z1_second;
  into.transitions += weight * other.transitions;
  for (int j = 0; j < into.J; ++j) {
    auto& d = into.dynamics[static_cast<std::size_t>(j)];
    const auto& od = other.dynamics[static_cast<std::size_t>(j)];
    d.w += weight * od.w;
    d.s_cur += weight * od.s_cur;
    d.s_prev += weight * od.s_prev;
    d.s_cur_cur += weight * od.s_cur_cur;
    d.s_prev_prev += weight * od.s_prev_prev;
    d.s_cur_prev += weight * od.s_cur_prev;
    auto& o = into.observation[static_cast<std::size_t>(j)];
    const auto& oo = other.observation[static_cast<std::size_t>(j)];
    o.w += weight * oo.w;
    o.sz += weight * oo.sz;
    o.szz += weight * oo.szz;
    o.sy += weight * oo.sy;
    o.syy += weight * oo.syy;
    o.syz += weight * oo.syz;
  }
}

ExpectedLoglik expected_loglik(const SmoothedSufficientStats& s, const RegimeModel& model) {
  if (model.num_regimes() != s.J || model.state_dim() != s.m || model.obs_dim() != s.p) {
    throw ValidationError("invalid-input", "model does not match the sufficient statistics");
  }
  ExpectedLoglik q;
  const int J = s.J;
  // 0·log 0 counts as 0.
  auto wlog = [](double w, double logv) { return w > 0.0 ? w * logv : 0.0; };

  for (int j = 0; j < J; ++j) q.initial_regime += wlog(s.prob[0][static_cast<std::size_t>(j)], model.log_pi(j));

  {
    const Vec& mu = model.mu1();
    const CholeskyFactor& ch = model.Sigma1_chol();
    const Mat E = s.z1_second - s.z1_mean * mu.transpose() - mu * s.z1_mean.transpose() + mu * mu.transpose();
    q.initial_state = -0.5 * (s.m * kLog2Pi + ch.log_det) - 0.5 * ch.solve(E).trace();
  }

  for (int k = 0; k < J; ++k) {
    for (int j = 0; j < J; ++j) q.transitions += wlog(s.transitions(k, j), model.log_Q(k, j));
  }

  for (int j = 0; j < J; ++j) {
    const auto& d = s.dynamics[static_cast<std::size_t>(j)];
    if (d.w <= 0.0) continue;
    const RegimeTerms& t = model.require_transition_precision(j);
    const Vec r = d.s_cur - t.T * d.s_prev;
    Mat E = d.s_cur_cur - d.s_cur_prev * t.T.transpose() - t.T * d.s_cur_prev.transpose() +
            t.T * d.s_prev_prev * t.T.transpose() - r * t.d.transpose() - t.d * r.transpose() +
            d.w * t.d * t.d.transpose();
    q.dynamics += -0.5 * d.w * (s.m * kLog2Pi + t.Hbar_chol->log_det) - 0.5 * (t.Hbar_inv * E).trace();
  }

  for (int j = 0; j < J; ++j) {
    const auto& o = s.observation[static_cast<std::size_t>(j)];
    if (o.w <= 0.0) continue;
    const RegimeTerms& t = model.regime(j);
    const Mat Srr = o.syy - o.sy * t.c.transpose() - t.c * o.sy.transpose() + o.w * t.c * t.c.transpose();
    const Mat Srz = o.syz - t.c * o.sz.transpose();
    const Mat O = Srr - Srz * t.B.transpose() - t.B * Srz.transpose() + t.B * o.szz * t.B.transpose();
    q.observations += -0.5 * o.w * (s.p * kLog2Pi + t.Gbar_chol.log_det) - 0.5 * (t.Gbar_inv * O).trace();
  }
  return q;
}

namespace {

// Mixture over the backward factor: Σ_ℓ Q(j, ℓ) t_ℓ(z) · exp(base)·N(z; mu, ΓΓ').
MomentAccumulator times_backward(const RegimeModel& model, int regime, double base, const Vec& mu, const Mat& P,
                                 const RejuvenationMixture* rej) {
  MomentAccumulator acc(model.state_dim());
  if (!rej) {
    acc.add(base, mu, P);
    return acc;
  }
  const Mat Gamma = covariance_root(P);
  for (const RejuvenationComponent& t : rej->components) {
    const double lq = model.log_Q(regime, t.next_regime);
    if (lq == kNegInf) continue;
    const WeightedNormal post = gaussian_info_posterior(mu, Gamma, t.form.P_inv, t.form.nu);
    acc.add(base + lq + t.log_w - 0.5 * t.form.c_tilde + post.log_w, post.mean, post.cov);
  }
  return acc;
}

}  // namespace

SmoothedSufficientStats e_step(const RegimeModel& model, std::span<const Vec> ys, const EStepSettings& settings,
                               std::uint64_t seed) {
  const int n = static_cast<int>(ys.size());
  if (n < 1) throw ValidationError("invalid-input", "no observations");
  const int J = model.num_regimes();
  const int m = model.state_dim();
  const int Nb = settings.backward_particles > 0 ? settings.backward_particles : settings.particles;
  const std::vector<ParticleCloud> clouds = forward_pass(model, ys, settings.particles, settings.scheme,
                                                         derive_seed(seed, 1));
  const ArtificialDensitySchedule schedule = default_gamma_schedule(model, clouds, false);
  const std::vector<BackwardParticleCloud> bwd = backward_filter_pass(model, ys, schedule, Nb, derive_seed(seed, 2));

  SmoothedSufficientStats s = SmoothedSufficientStats::zeros(J, m, model.obs_dim(), n);
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const Vec& y = ys[ui];
    RejuvenationMixture rej;
    const bool last = i + 1 == n;
    if (!last) rej = rejuvenation_mixture(model, bwd[ui + 1]);
    const RejuvenationMixture* rp = last ? nullptr : &rej;

    if (i == 0) {
      const std::vector<KalmanStep> init = initial_regime_terms(model, y);
      std::vector<MomentAccumulator> acc;
      std::vector<double> lw;
      for (int j = 0; j < J; ++j) {
        const KalmanStep& st = init[static_cast<std::size_t>(j)];
        acc.push_back(st.loglik == kNegInf ? MomentAccumulator(m)
                                           : times_backward(model, j, st.loglik, st.stat.mu, st.stat.P, rp));
        lw.push_back(acc.back().log_mass());
      }
      normalize_log_weights(lw, "initial smoothing weights");
      for (int j = 0; j < J; ++j) {
        const double w = std::exp(lw[static_cast<std::size_t>(j)]);
        if (w <= 0.0) continue;
        const Vec mean = acc[static_cast<std::size_t>(j)].mean();
        const Mat second = acc[static_cast<std::size_t>(j)].cov() + mean * mean.transpose();
        s.prob[0][static_cast<std::size_t>(j)] = w;
        s.z1_mean += w * mean;
        s.z1_second += w * second;
        add_observation(s.observation[static_cast<std::size_t>(j)], w, mean, second, y);
      }
      continue;
    }

    const ParticleCloud& prev = clouds[ui - 1];
    const OffspringTable table = extend_all_offspring(model, prev, y);
    std::vector<const OffspringEntry*> entries;
    std::vector<MomentAccumulator> acc;
    std::vector<double> lw;
    for (const OffspringEntry& e : table.entries) {
      if (e.log_w == kNegInf) continue;
      entries.push_back(&e);
      acc.push_back(times_backward(model, e.regime, e.log_w, e.stat.mu, e.stat.P, rp));
      lw.push_back(acc.back().log_mass());
    }
    normalize_log_weights(lw, "pairwise smoothing weights");

    for (std::size_t q = 0; q < entries.size(); ++q) {
      const double w = std::exp(lw[q]);
      if (w <= 0.0) continue;
      const OffspringEntry& e = *entries[q];
      const Particle& par = prev.particles[static_cast<std::size_t>(e.ancestor)];
      const int j = e.regime;
      const int k = par.regime;
      const RegimeTerms& t = model.regime(j);

      // z_{i−1} | z_i under the forward model: mean μ_k + G(z_i − μ_pred).
      const Vec mu_pred = t.d + t.T * par.stat.mu;
      Mat P_pred = t.T * par.stat.P * t.T.transpose() + t.Hbar;
      symmetrize(P_pred);
      const Mat G = robust_cholesky(P_pred, "predicted covariance").solve(Mat(t.T * par.stat.P)).transpose();

      const Vec M1 = acc[q].mean();
      const Mat C1 = acc[q].cov();
      const Mat M2 = C1 + M1 * M1.transpose();
      const Vec prev_mean = par.stat.mu + G * (M1 - mu_pred);
      const Mat prev_cov = par.stat.P - G * P_pred * G.transpose() + G * C1 * G.transpose();
      const Mat prev_second = prev_cov + prev_mean * prev_mean.transpose();
      const Mat cross = M1 * par.stat.mu.transpose() + M2 * G.transpose() - M1 * mu_pred.transpose() * G.transpose();

      s.prob[ui][static_cast<std::size_t>(j)] += w;
      s.pair[ui][static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] += w;
      s.transitions(k, j) += w;
      auto& d = s.dynamics[static_cast<std::size_t>(j)];
      d.w += w;
      d.s_cur += w * M1;
      d.s_prev += w * prev_mean;
      d.s_cur_cur += w * M2;
      d.s_prev_prev += w * prev_second;
      d.s_cur_prev += w * cross;
      add_observation(s.observation[static_cast<std::size_t>(j)], w, M1, M2, y);
    }
  }
  return s;
}

SmoothedSufficientStats path_stats(const RegimeModel& model, std::span<const int> regimes, std::span<const Vec> ys) {
  const int n = static_cast<int>(ys.size());
  const RtsResult r = rts_given_regimes(model, regimes, ys);
  SmoothedSufficientStats s = SmoothedSufficientStats::zeros(model.num_regimes(), model.state_dim(), model.obs_dim(), n);
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const int j = regimes[ui];
    const Mat second = r.cov[ui] + r.mean[ui] * r.mean[ui].transpose();
    s.prob[ui][static_cast<std::size_t>(j)] = 1.0;
    add_observation(s.observation[static_cast<std::size_t>(j)], 1.0, r.mean[ui], second, ys[ui]);
    if (i == 0) {
      s.z1_mean = r.mean[0];
      s.z1_second = second;
      continue;
    }
    const int k = regimes[ui - 1];
    s.pair[ui][static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] = 1.0;
    s.transitions(k, j) += 1.0;
    auto& d = s.dynamics[static_cast<std::size_t>(j)];
    d.w += 1.0;
    d.s_cur += r.mean[ui];
    d.s_prev += r.mean[ui - 1];
    d.s_cur_cur += second;
    d.s_prev_prev += r.cov[ui - 1] + r.mean[ui - 1] * r.mean[ui - 1].transpose();
    d.s_cur_prev += r.cross_cov[ui] + r.mean[ui] * r.mean[ui - 1].transpose();
  }
  return s;
}

SmoothedSufficientStats e_step_ffbs(const RegimeModel& model, std::span<const Vec> ys, const EStepSettings& settings,
                                    std::uint64_t seed) {
  const int Nb = settings.backward_particles > 0 ? settings.backward_particles : settings.particles;
  const std::vector<ParticleCloud> clouds = forward_pass(model, ys, settings.particles, settings.scheme,
                                                         derive_seed(seed, 1));
  const std::vector<BackwardTrajectory> traj = ffbs_sample_rejuvenated(model, clouds, ys, Nb, derive_seed(seed, 2));
  // Repeated paths share one RTS pass.
  std::map<std::vector<int>, int> counts;
  for (const BackwardTrajectory& t : traj) ++counts[t.regimes];
  SmoothedSufficientStats s = SmoothedSufficientStats::zeros(model.num_regimes(), model.state_dim(), model.obs_dim(),
                                                             static_cast<int>(ys.size()));
  for (const auto& [path, count] : counts) {
    add_scaled(s, path_stats(model, path, ys), static_cast<double>(count) / static_cast<double>(traj.size()));
  }
  return s;
}

Eigen::VectorXd pack_params(const TwoFactorParams& p) {
  const int J = p.num_regimes();
  const int L = p.num_contracts();
  Eigen::VectorXd x(1 + 5 * J + L);
  int o = 0;
  x(o++) = p.kappa;
  for (double v : p.alpha) x(o++) = v;
  for (double v : p.sigma) x(o++) = v;
  for (double v : p.eta) x(o++) = v;
  for (double v : p.rho) x(o++) = v;
  for (double v : p.g) x(o++) = v;
  for (int j = 0; j < J; ++j) x(o++) = p.Q(j, j);
  return x;
}

TwoFactorParams unpack_params(const Eigen::VectorXd& x, const TwoFactorParams& base) {
  const int J = base.num_regimes();
  const int L = base.num_contracts();
  if (x.size() != 1 + 5 * J + L) throw ValidationError("invalid-input", "parameter vector has the wrong length");
  TwoFactorParams p = base;
  int o = 0;
  p.kappa = x(o++);
  for (auto* v : {&p.alpha, &p.sigma, &p.eta, &p.rho}) {
    for (int j = 0; j < J; ++j) (*v)[static_cast<std::size_t>(j)] = x(o++);
  }
  for (int l = 0; l < L; ++l) p.g[static_cast<std::size_t>(l)] = x(o++);
  for (int j = 0; j < J; ++j) {
    const double stay = J == 1 ? 1.0 : x(o);
    ++o;
    for (int k = 0; k < J; ++k) p.Q(j, k) = k == j ? stay : (1.0 - stay) / (J - 1);
  }
  return p;
}

void project_params(Eigen::VectorXd& x, int J, int num_contracts, const ParamBounds& b) {
  int o = 0;
  x(o) = std::max(x(o), b.min_kappa);
  ++o;
  if (b.alpha_order && J > 1) {
    // Isotonic (non-increasing) least-squares fit by pooling adjacent violators.
    std::vector<double> val;
    std::vector<int> len;
    for (int j = 0; j < J; ++j) {
      val.push_back(x(o + j));
      len.push_back(1);
      while (val.size() > 1 && val[val.size() - 2] < val.back()) {
        const double v2 = val.back();
        const int l2 = len.back();
        val.pop_back();
        len.pop_back();
        val.back() = (val.back() * len.back() + v2 * l2) / (len.back() + l2);
        len.back() += l2;
      }
    }
    int j = 0;
    for (std::size_t blk = 0; blk < val.size(); ++blk) {
      for (int r = 0; r < len[blk]; ++r) x(o + j++) = val[blk];
    }
  }
  o += J;
  for (int j = 0; j < 2 * J; ++j, ++o) x(o) = std::max(x(o), b.min_scale);  // σ, η
  for (int j = 0; j < J; ++j, ++o) x(o) = std::clamp(x(o), -b.max_abs_rho, b.max_abs_rho);
  for (int l = 0; l < num_contracts; ++l, ++o) x(o) = std::max(x(o), b.min_scale);
  for (int j = 0; j < J; ++j, ++o) x(o) = std::clamp(x(o), b.min_stay, 1.0 - b.min_stay);
}

MStepResult m_step(const SmoothedSufficientStats& stats, const TwoFactorParams& current,
                   const std::vector<int>& maturities, const CmaesSettings& optimizer, const ParamBounds& bounds,
                   std::uint64_t seed) {
  const int J = current.num_regimes();
  const int L = current.num_contracts();
  TwoFactorParams base = current;
  // π maximizes Σ_j P(a₁ = j | Y) log π_j in closed form.
  {
    double total = 0.0;
    for (int j = 0; j < J; ++j) {
      base.pi[static_cast<std::size_t>(j)] = std::max(stats.prob[0][static_cast<std::size_t>(j)], 1e-12);
      total += base.pi[static_cast<std::size_t>(j)];
    }
    for (double& v : base.pi) v /= total;
  }

  auto objective = [&](const Eigen::VectorXd& x) {
    try {
      const RegimeModel model = build_clgm(unpack_params(x, base), maturities);
      return expected_loglik(stats, model).total();
    } catch (const Error&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  auto repair = [&](Eigen::VectorXd& x) { project_params(x, J, L, bounds); };

  const CmaesResult r = cmaes_maximize(objective, pack_params(current), optimizer, seed, repair);
  MStepResult out;
  if (r.best_value == -std::numeric_limits<double>::infinity()) {
    throw NumericalError("m-step-failed", "no feasible candidate could be evaluated");
  }
  out.params = unpack_params(r.best, base);
  out.value = r.best_value;
  out.evaluations = r.evaluations;
  out.budget_exhausted = r.budget_exhausted;
  return out;
}

EmConfig em_config_from_json(const nlohmann::json& j) {
  EmConfig c;
  try {
    if (j.contains("model")) c.initial = two_factor_from_json(j.at("model"));
    c.maturities = maturities_from_json(j);
    c.iterations = j.value("iterations", c.iterations);
    c.estep.particles = j.value("particles", c.estep.particles);
    c.estep.backward_particles = j.value("backward_particles", c.estep.backward_particles);
    if (j.contains("scheme")) c.estep.scheme = parse_selection_scheme(j.at("scheme").get<std::string>());
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      c.optimizer.sigma0 = o.value("sigma0", c.optimizer.sigma0);
      c.optimizer.lambda = o.value("lambda", c.optimizer.lambda);
      c.optimizer.mu = o.value("mu", c.optimizer.mu);
      c.optimizer.max_evaluations = o.value("max_evaluations", c.optimizer.max_evaluations);
      c.optimizer.tol_x = o.value("tol_x", c.optimizer.tol_x);
    }
    if (j.contains("constraints")) {
      const auto& b = j.at("constraints");
      c.bounds.alpha_order = b.value("alpha_order", c.bounds.alpha_order);
      c.bounds.min_kappa = b.value("min_kappa", c.bounds.min_kappa);
      c.bounds.min_scale = b.value("min_scale", c.bounds.min_scale);
      c.bounds.max_abs_rho = b.value("max_abs_rho", c.bounds.max_abs_rho);
      c.bounds.min_stay = b.value("min_stay", c.bounds.min_stay);
    }
    c.common_random_numbers = j.value("common_random_numbers", c.common_random_numbers);
    c.e_step_method = j.value("e_step", c.e_step_method);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid-config", std::string("malformed EM config: ") + e.what());
  }
  if (c.iterations < 0) throw ValidationError("invalid-config", "iterations must be nonnegative");
  if (c.estep.particles < 1 || c.estep.backward_particles < 0) {
    throw ValidationError("invalid-config", "particle counts must be positive");
  }
  if (c.e_step_method != "two-filter-rejuv" && c.e_step_method != "ffbs-rejuv") {
    throw ValidationError("invalid-config", "e_step must be two-filter-rejuv or ffbs-rejuv");
  }
  if (c.initial.num_contracts() != static_cast<int>(c.maturities.size())) {
    throw ValidationError("invalid-config", "g must have one entry per maturity");
  }
  if (!(c.bounds.max_abs_rho < 1.0) || !(c.bounds.min_scale > 0.0) || !(c.bounds.min_kappa > 0.0) ||
      !(c.bounds.min_stay > 0.0 && c.bounds.min_stay < 0.5)) {
    throw ValidationError("invalid-config", "constraint bounds are inconsistent");
  }
  return c;
}

namespace {

SmoothedSufficientStats run_e_step(const EmConfig& config, const RegimeModel& model, std::span<const Vec> ys,
                                   std::uint64_t seed) {
  return config.e_step_method == "ffbs-rejuv" ? e_step_ffbs(model, ys, config.estep, seed)
                                              : e_step(model, ys, config.estep, seed);
}

}  // namespace

EmResult em_run(const EmConfig& config, const FuturesPanel& panel) {
  if (panel.Y.empty()) throw ValidationError("invalid-input", "empty futures panel");
  if (panel.Y.front().size() != static_cast<int>(config.maturities.size())) {
    throw ValidationError("invalid-input", "panel columns do not match the configured maturities");
  }
  TwoFactorParams theta = config.initial;
  if (theta.mu1.size() == 0) theta.mu1 = initial_state_mean(panel.Y.front(), config.maturities, theta.r, theta.tau);
  // Start from a feasible point.
  {
    Eigen::VectorXd x = pack_params(theta);
    project_params(x, theta.num_regimes(), theta.num_contracts(), config.bounds);
    theta = unpack_params(x, theta);
  }

  EmResult res;
  res.initial = theta;
  const std::span<const Vec> ys(panel.Y);
  for (int it = 0; it < config.iterations; ++it) {
    const RegimeModel model = build_clgm(theta, config.maturities);
    const std::uint64_t eseed = derive_seed(config.seed, config.common_random_numbers ? 0 : static_cast<std::uint64_t>(it));
    const SmoothedSufficientStats stats = run_e_step(config, model, ys, eseed);
    EmIteration rec;
    rec.iteration = it + 1;
    rec.q_current = expected_loglik(stats, model).total();
    const MStepResult ms = m_step(stats, theta, config.maturities, config.optimizer, config.bounds,
                                  derive_seed(config.seed ^ 0x4D535445ULL, static_cast<std::uint64_t>(it)));
    rec.params = ms.params;
    rec.q_next = ms.value;
    rec.evaluations = ms.evaluations;
    rec.budget_exhausted = ms.budget_exhausted;
    res.trace.push_back(rec);
    theta = ms.params;
  }
  res.final_params = theta;
  const RegimeModel model = build_clgm(theta, config.maturities);
  const std::uint64_t fseed = derive_seed(config.seed, config.common_random_numbers ? 0 : static_cast<std::uint64_t>(config.iterations));
  res.posterior = run_e_step(config, model, ys, fseed).prob;
  return res;
}

void write_trace_csv(const std::string& path, const EmResult& result) {
  std::ofstream f(path);
  if (!f) throw ValidationError("io-error", "cannot write " + path);
  const int J = result.initial.num_regimes();
  const int L = result.initial.num_contracts();
  f << "iteration,kappa";
  for (const char* name : {"sigma", "eta", "rho", "alpha"}) {
    for (int j = 1; j <= J; ++j) f << ',' << name << '_' << j;
  }
  for (int l = 1; l <= L; ++l) f << ",g_" << l;
  for (int j = 1; j <= J; ++j) f << ",Q_" << j << j;
  f << ",q_current,q_next,ascent\n";
  for (const EmIteration& it : result.trace) {
    const TwoFactorParams& p = it.params;
    f << it.iteration << ',' << format_double(p.kappa);
    for (const auto* v : {&p.sigma, &p.eta, &p.rho, &p.alpha}) {
      for (double x : *v) f << ',' << format_double(x);
    }
    for (double x : p.g) f << ',' << format_double(x);
    for (int j = 0; j < J; ++j) f << ',' << format_double(p.Q(j, j));
    f << ',' << format_double(it.q_current) << ',' << format_double(it.q_next) << ',' << format_double(it.ascent())
      << '\n';
  }
}

void write_posterior_csv(const std::string& path, const std::vector<std::string>& dates,
                         const std::vector<std::vector<double>>& posterior) {
  std::ofstream f(path);
  if (!f) throw ValidationError("io-error", "cannot write " + path);
  const std::size_t J = posterior.empty() ? 0 : posterior.front().size();
  f << "time_index";
  if (!dates.empty()) f << ",date";
  for (std::size_t j = 1; j <= J; ++j) f << ",p_regime_" << j;
  f << '\n';
  for (std::size_t i = 0; i < posterior.size(); ++i) {
    f << (i + 1);
    if (!dates.empty()) f << ',' << dates[i];
    for (double v : posterior[i]) f << ',' << format_double(v);
    f << '\n';
  }
}

}  // namespace rbsmc
