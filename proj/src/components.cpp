#include "rbsmc/components.hpp"

namespace rbsmc {

std::vector<FilteredComponent> cloud_components(const ParticleCloud& cloud) {
  std::vector<FilteredComponent> out;
  out.reserve(cloud.particles.size());
  for (const Particle& p : cloud.particles) {
    out.push_back(FilteredComponent{p.regime, p.log_w, p.stat.mu, p.stat.P, covariance_root(p.stat.P)});
  }
  return out;
}

std::vector<FilteredComponent> rejuvenation_components(const RegimeModel& model,
                                                       std::span<const ParticleCloud> clouds,
                                                       std::span<const Vec> ys, int i) {
  std::vector<FilteredComponent> out;
  if (i == 0) {
    const std::vector<KalmanStep> init = initial_regime_terms(model, ys[0]);
    std::vector<double> lw;
    for (std::size_t j = 0; j < init.size(); ++j) lw.push_back(init[j].loglik);
    normalize_log_weights(lw, "initial regime terms");
    for (std::size_t j = 0; j < init.size(); ++j) {
      if (lw[j] == kNegInf) continue;
      out.push_back(FilteredComponent{static_cast<int>(j), lw[j], init[j].stat.mu, init[j].stat.P,
                                      covariance_root(init[j].stat.P)});
    }
    return out;
  }
  const OffspringTable table =
      extend_all_offspring(model, clouds[static_cast<std::size_t>(i - 1)], ys[static_cast<std::size_t>(i)]);
  out.reserve(table.entries.size());
  for (const OffspringEntry& e : table.entries) {
    if (e.log_w == kNegInf) continue;
    out.push_back(FilteredComponent{e.regime, e.log_w, e.stat.mu, e.stat.P, covariance_root(e.stat.P)});
  }
  return out;
}

}  // namespace rbsmc
