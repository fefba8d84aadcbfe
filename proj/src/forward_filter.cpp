#include "rbsmc/forward_filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rbsmc/errors.hpp"

namespace rbsmc {

SelectionScheme parse_selection_scheme(const std::string& name) {
  if (name == "klos" || name == "KL-OS") return SelectionScheme::kKLOS;
  if (name == "csos" || name == "CS-OS") return SelectionScheme::kCSOS;
  if (name == "multinomial") return SelectionScheme::kMultinomial;
  throw ValidationError("invalid-input", "unknown selection scheme '" + name + "'");
}

std::string to_string(SelectionScheme scheme) {
  switch (scheme) {
    case SelectionScheme::kKLOS: return "klos";
    case SelectionScheme::kCSOS: return "csos";
    case SelectionScheme::kMultinomial: return "multinomial";
  }
  return "unknown";
}

std::vector<KalmanStep> initial_regime_terms(const RegimeModel& model, const Vec& y1) {
  std::vector<KalmanStep> out;
  out.reserve(static_cast<std::size_t>(model.num_regimes()));
  for (int j = 0; j < model.num_regimes(); ++j) {
    KalmanStep s = kalman_init(model, j, y1);
    s.loglik += model.log_pi(j);
    out.push_back(std::move(s));
  }
  return out;
}

ParticleCloud init_cloud(const RegimeModel& model, const Vec& y1, int N, Rng& rng) {
  if (N < 1) throw ValidationError("invalid-input", "particle count must be at least 1");
  const std::vector<KalmanStep> init = initial_regime_terms(model, y1);
  std::vector<double> logp(init.size());
  for (std::size_t j = 0; j < init.size(); ++j) logp[j] = init[j].loglik;
  ParticleCloud cloud;
  cloud.time = 0;
  cloud.log_evidence = log_sum_exp(logp);
  if (!std::isfinite(cloud.log_evidence)) {
    throw NumericalError("degenerate-likelihood", "first observation has zero likelihood under every regime");
  }
  cloud.particles.resize(static_cast<std::size_t>(N));
  const double lw = -std::log(static_cast<double>(N));
  for (auto& p : cloud.particles) {
    const int j = rng.categorical_log(logp);
    p.regime = j;
    p.parent = -1;
    p.log_w = lw;
    p.stat = init[static_cast<std::size_t>(j)].stat;
  }
  return cloud;
}

OffspringTable extend_all_offspring(const RegimeModel& model, const ParticleCloud& cloud, const Vec& y) {
  const int J = model.num_regimes();
  OffspringTable table;
  table.time = cloud.time + 1;
  table.entries.resize(static_cast<std::size_t>(cloud.size() * J));
  std::vector<double> lw(table.entries.size());
  for (int k = 0; k < cloud.size(); ++k) {
    const Particle& anc = cloud.particles[static_cast<std::size_t>(k)];
    for (int j = 0; j < J; ++j) {
      const std::size_t e = static_cast<std::size_t>(k * J + j);
      OffspringEntry& entry = table.entries[e];
      entry.ancestor = k;
      entry.regime = j;
      const double lq = model.log_Q(anc.regime, j);
      if (lq == kNegInf || anc.log_w == kNegInf) {
        entry.log_gamma = kNegInf;
        entry.stat = anc.stat;
      } else {
        KalmanStep step = kalman_predict_update(model, anc.stat, j, y);
        entry.log_gamma = lq + step.loglik;
        entry.stat = std::move(step.stat);
      }
      lw[e] = anc.log_w + entry.log_gamma;
    }
  }
  const double total = log_sum_exp(lw);
  if (!std::isfinite(total)) {
    throw NumericalError("degenerate-likelihood",
                         "every offspring has zero weight at time index " + std::to_string(table.time + 1));
  }
  table.log_increment = total;
  for (std::size_t e = 0; e < lw.size(); ++e) table.entries[e].log_w = lw[e] - total;
  return table;
}

// ---------------------------------------------------------------------------
// Optimal selection

namespace {

// Indices of positive weights sorted by decreasing weight, ties by index.
std::vector<int> sorted_positive(std::span<const double> w) {
  std::vector<int> idx;
  for (std::size_t e = 0; e < w.size(); ++e) {
    if (w[e] > 0.0) idx.push_back(static_cast<int>(e));
  }
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return w[a] > w[b]; });
  return idx;
}

// Returns (λ, number of certain entries). `root` selects the CS-OS form.
std::pair<double, int> solve_threshold(std::span<const double> w, int N, bool root) {
  if (N < 1) throw ValidationError("invalid-input", "selection size must be at least 1");
  const std::vector<int> idx = sorted_positive(w);
  const int M = static_cast<int>(idx.size());
  if (M <= N) return {0.0, M};
  // suffix[t] = Σ_{s ≥ t} f(w_(s)), accumulated from the smallest entry.
  std::vector<double> suffix(static_cast<std::size_t>(M) + 1, 0.0);
  for (int t = M - 1; t >= 0; --t) {
    const double v = w[idx[static_cast<std::size_t>(t)]];
    suffix[static_cast<std::size_t>(t)] = suffix[static_cast<std::size_t>(t) + 1] + (root ? std::sqrt(v) : v);
  }
  for (int t = 0; t < N; ++t) {
    const double s = suffix[static_cast<std::size_t>(t)] / static_cast<double>(N - t);
    const double v = w[idx[static_cast<std::size_t>(t)]];
    if (root ? std::sqrt(v) <= s : v <= s) return {root ? s * s : s, t};
  }
  // Unreachable for finite weights: at t = N−1 the candidate dominates w_(t).
  throw NumericalError("selection-threshold", "threshold equation has no root");
}

}  // namespace

double klos_threshold(std::span<const double> weights, int N) { return solve_threshold(weights, N, false).first; }

double csos_threshold(std::span<const double> weights, int N) { return solve_threshold(weights, N, true).first; }

Selection select_offspring(std::span<const double> weights, int N, SelectionScheme scheme, Rng& rng) {
  if (scheme == SelectionScheme::kMultinomial) {
    throw ValidationError("invalid-input", "multinomial selection operates on a cloud, not a table");
  }
  const bool root = scheme == SelectionScheme::kCSOS;
  const auto [lambda, certain] = solve_threshold(weights, N, root);
  Selection sel;
  sel.lambda = lambda;
  sel.certain = certain;
  if (lambda == 0.0) {
    for (std::size_t e = 0; e < weights.size(); ++e) {
      if (weights[e] > 0.0) {
        sel.index.push_back(static_cast<int>(e));
        sel.weight.push_back(weights[e]);
      }
    }
    return sel;
  }
  // Systematic sampling over the sub-threshold entries in table order, with
  // inclusion probability w/λ (KL-OS) or √(w/λ) (CS-OS).
  const double u = rng.uniform();
  double cum = 0.0;
  for (std::size_t e = 0; e < weights.size(); ++e) {
    const double w = weights[e];
    if (!(w > 0.0)) continue;
    if (w >= lambda) {
      sel.index.push_back(static_cast<int>(e));
      sel.weight.push_back(w);
      continue;
    }
    const double p = std::min(1.0, root ? std::sqrt(w / lambda) : w / lambda);
    const double before = cum;
    cum += p;
    if (std::ceil(cum - u) > std::ceil(before - u)) {
      sel.index.push_back(static_cast<int>(e));
      sel.weight.push_back(root ? std::sqrt(w * lambda) : lambda);
    }
  }
  if (sel.index.empty()) throw NumericalError("degenerate-weights", "selection kept no particle");
  return sel;
}

namespace {

ParticleCloud cloud_from_selection(const OffspringTable& table, const ParticleCloud& prev,
                                   const Selection& sel) {
  ParticleCloud cloud;
  cloud.time = table.time;
  cloud.log_evidence = prev.log_evidence + table.log_increment;
  cloud.particles.reserve(sel.index.size());
  std::vector<double> lw(sel.index.size());
  for (std::size_t s = 0; s < sel.index.size(); ++s) {
    const OffspringEntry& e = table.entries[static_cast<std::size_t>(sel.index[s])];
    Particle p;
    p.regime = e.regime;
    p.parent = e.ancestor;
    p.stat = e.stat;
    cloud.particles.push_back(std::move(p));
    lw[s] = std::log(sel.weight[s]);
  }
  normalize_log_weights(lw, "selected particles");
  for (std::size_t s = 0; s < lw.size(); ++s) cloud.particles[s].log_w = lw[s];
  return cloud;
}

std::vector<double> table_weights(const OffspringTable& table) {
  std::vector<double> w(table.entries.size());
  for (std::size_t e = 0; e < w.size(); ++e) w[e] = std::exp(table.entries[e].log_w);
  return w;
}

ParticleCloud select_from_table(const OffspringTable& table, int N, SelectionScheme scheme, Rng& rng) {
  const std::vector<double> w = table_weights(table);
  const Selection sel = select_offspring(w, N, scheme, rng);
  ParticleCloud prev;  // evidence is patched by the caller
  return cloud_from_selection(table, prev, sel);
}

ParticleCloud select_multinomial(const OffspringTable& table, const ParticleCloud& prev, int N, int J,
                                 Rng& rng) {
  std::vector<double> anc_lw(static_cast<std::size_t>(prev.size()));
  for (int k = 0; k < prev.size(); ++k) anc_lw[static_cast<std::size_t>(k)] = prev.particles[static_cast<std::size_t>(k)].log_w;
  std::vector<double> gamma(static_cast<std::size_t>(J));
  ParticleCloud cloud;
  cloud.time = table.time;
  cloud.log_evidence = prev.log_evidence + table.log_increment;
  std::vector<double> lw(static_cast<std::size_t>(N));
  for (int s = 0; s < N; ++s) {
    const int k = rng.categorical_log(anc_lw);
    for (int j = 0; j < J; ++j) gamma[static_cast<std::size_t>(j)] = table.entries[static_cast<std::size_t>(k * J + j)].log_gamma;
    const double total = log_sum_exp(gamma);
    if (total == kNegInf) {
      throw NumericalError("degenerate-likelihood",
                           "ancestor has no viable offspring at time index " + std::to_string(table.time + 1));
    }
    const int j = rng.categorical_log(gamma);
    const OffspringEntry& e = table.entries[static_cast<std::size_t>(k * J + j)];
    cloud.particles.push_back(Particle{e.regime, e.ancestor, 0.0, e.stat});
    lw[static_cast<std::size_t>(s)] = total;
  }
  normalize_log_weights(lw, "multinomial selection");
  for (int s = 0; s < N; ++s) cloud.particles[static_cast<std::size_t>(s)].log_w = lw[static_cast<std::size_t>(s)];
  return cloud;
}

}  // namespace

ParticleCloud select_klos(const OffspringTable& table, int N, Rng& rng) {
  return select_from_table(table, N, SelectionScheme::kKLOS, rng);
}

ParticleCloud select_csos(const OffspringTable& table, int N, Rng& rng) {
  return select_from_table(table, N, SelectionScheme::kCSOS, rng);
}

ParticleCloud filter_step(const RegimeModel& model, const ParticleCloud& cloud, const Vec& y, int N,
                          SelectionScheme scheme, Rng& rng) {
  const OffspringTable table = extend_all_offspring(model, cloud, y);
  if (scheme == SelectionScheme::kMultinomial) {
    return select_multinomial(table, cloud, N, model.num_regimes(), rng);
  }
  ParticleCloud next = select_from_table(table, N, scheme, rng);
  next.log_evidence = cloud.log_evidence + table.log_increment;
  return next;
}

std::vector<ParticleCloud> forward_pass(const RegimeModel& model, std::span<const Vec> ys, int N,
                                        SelectionScheme scheme, std::uint64_t seed) {
  if (ys.empty()) throw ValidationError("invalid-input", "at least one observation is required");
  Rng rng(seed, 0x464F5257ULL);
  std::vector<ParticleCloud> clouds;
  clouds.reserve(ys.size());
  clouds.push_back(init_cloud(model, ys[0], N, rng));
  for (std::size_t i = 1; i < ys.size(); ++i) {
    clouds.push_back(filter_step(model, clouds.back(), ys[i], N, scheme, rng));
  }
  return clouds;
}

std::vector<int> systematic_resample(std::span<const double> log_weights, int N, Rng& rng) {
  std::vector<double> w(log_weights.begin(), log_weights.end());
  normalize_log_weights(w, "resampling");
  const double u = rng.uniform();
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(N));
  double cum = 0.0;
  int last = -1;
  for (std::size_t e = 0; e < w.size() && static_cast<int>(out.size()) < N; ++e) {
    if (w[e] == kNegInf) continue;
    last = static_cast<int>(e);
    cum += std::exp(w[e]) * N;
    while (static_cast<int>(out.size()) < N && static_cast<double>(out.size()) + u < cum) out.push_back(last);
  }
  while (static_cast<int>(out.size()) < N) out.push_back(last);  // rounding at the top end
  return out;
}

std::vector<int> trajectory(std::span<const ParticleCloud> clouds, int i, int k) {
  std::vector<int> path(static_cast<std::size_t>(i) + 1);
  for (int t = i; t >= 0; --t) {
    const Particle& p = clouds[static_cast<std::size_t>(t)].particles[static_cast<std::size_t>(k)];
    path[static_cast<std::size_t>(t)] = p.regime;
    k = p.parent;
  }
  return path;
}

std::vector<std::vector<double>> filtering_marginals(std::span<const ParticleCloud> clouds, int J) {
  std::vector<std::vector<double>> out;
  for (const ParticleCloud& c : clouds) {
    std::vector<double> row(static_cast<std::size_t>(J), 0.0);
    for (const Particle& p : c.particles) row[static_cast<std::size_t>(p.regime)] += std::exp(p.log_w);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace rbsmc
