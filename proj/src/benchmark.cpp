#include "rbsmc/benchmark.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "rbsmc/errors.hpp"
#include "rbsmc/ffbs.hpp"
#include "rbsmc/oracle.hpp"
#include "rbsmc/simulate.hpp"
#include "rbsmc/two_filter.hpp"

namespace rbsmc {

SmoothingMethod parse_method(const std::string& name) {
  if (name == "ffbs") return SmoothingMethod::kFfbs;
  if (name == "ffbs-rejuv") return SmoothingMethod::kFfbsRejuv;
  if (name == "two-filter") return SmoothingMethod::kTwoFilter;
  if (name == "two-filter-rejuv") return SmoothingMethod::kTwoFilterRejuv;
  if (name == "oracle") return SmoothingMethod::kOracle;
  throw ValidationError("invalid-input", "unknown smoothing method '" + name + "'");
}

std::string to_string(SmoothingMethod method) {
  switch (method) {
    case SmoothingMethod::kFfbs: return "ffbs";
    case SmoothingMethod::kFfbsRejuv: return "ffbs-rejuv";
    case SmoothingMethod::kTwoFilter: return "two-filter";
    case SmoothingMethod::kTwoFilterRejuv: return "two-filter-rejuv";
    case SmoothingMethod::kOracle: return "oracle";
  }
  return "unknown";
}

SmoothingMarginals run_method(const RegimeModel& model, std::span<const Vec> ys, SmoothingMethod method,
                              const MethodSettings& settings, std::uint64_t seed) {
  if (method == SmoothingMethod::kOracle) {
    return enumerate_posterior(model, ys, settings.state_moments).smoothing;
  }
  const int N = settings.particles;
  const int Nb = settings.backward_particles > 0 ? settings.backward_particles : N;
  // Forward and backward passes draw from separate streams of the same seed.
  const std::vector<ParticleCloud> clouds = forward_pass(model, ys, N, settings.scheme, derive_seed(seed, 1));
  const std::uint64_t bseed = derive_seed(seed, 2);
  switch (method) {
    case SmoothingMethod::kFfbs:
    case SmoothingMethod::kFfbsRejuv: {
      const auto traj = method == SmoothingMethod::kFfbs ? ffbs_sample_plain(model, clouds, ys, Nb, bseed)
                                                         : ffbs_sample_rejuvenated(model, clouds, ys, Nb, bseed);
      return settings.state_moments ? marginal_estimate(traj, model, ys) : marginal_estimate(traj, model.num_regimes());
    }
    case SmoothingMethod::kTwoFilter:
    case SmoothingMethod::kTwoFilterRejuv: {
      TwoFilterOptions opt;
      opt.rejuvenate = method == SmoothingMethod::kTwoFilterRejuv;
      opt.full_gamma_mixture = settings.full_gamma_mixture;
      opt.state_moments = settings.state_moments;
      return two_filter_smooth(model, ys, clouds, Nb, bseed, opt);
    }
    case SmoothingMethod::kOracle: break;
  }
  throw ValidationError("invalid-input", "unsupported method");
}

BenchmarkConfig benchmark_config_from_json(const nlohmann::json& j) {
  BenchmarkConfig c;
  try {
    c.n = j.value("n", c.n);
    c.data_seed = j.value("data_seed", c.data_seed);
    c.runs = j.value("runs", c.runs);
    c.seed = j.value("seed", c.seed);
    c.reference_particles = j.value("reference_particles", c.reference_particles);
    if (j.contains("scheme")) c.scheme = parse_selection_scheme(j.at("scheme").get<std::string>());
    if (j.contains("methods")) {
      for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
    } else {
      c.methods = {SmoothingMethod::kFfbs, SmoothingMethod::kFfbsRejuv, SmoothingMethod::kTwoFilter,
                   SmoothingMethod::kTwoFilterRejuv};
    }
    for (SmoothingMethod m : c.methods) c.particles[m] = 100;
    if (j.contains("particles")) {
      for (const auto& [name, value] : j.at("particles").items()) c.particles[parse_method(name)] = value.get<int>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid-config", std::string("malformed benchmark config: ") + e.what());
  }
  if (c.n < 1 || c.runs < 1) throw ValidationError("invalid-config", "n and runs must be positive");
  if (c.methods.empty()) throw ValidationError("invalid-config", "no methods selected");
  for (const auto& [m, N] : c.particles) {
    if (N < 1) throw ValidationError("invalid-config", "particle counts must be positive");
  }
  return c;
}

BenchmarkResult run_benchmark(const RegimeModel& model, const BenchmarkConfig& config) {
  const SimulatedPath data = simulate(model, config.n, config.data_seed);
  const std::vector<Vec>& ys = data.observations;
  const auto n = static_cast<std::size_t>(config.n);
  const std::size_t M = config.methods.size();

  BenchmarkResult out;
  for (SmoothingMethod m : config.methods) out.methods.push_back(to_string(m));
  SmoothingMarginals ref;
  if (std::pow(static_cast<double>(model.num_regimes()), config.n) <= kOracleMaxSequences) {
    ref = enumerate_posterior(model, ys, false).smoothing;
    out.reference_source = "oracle";
  } else {
    MethodSettings s;
    s.particles = config.reference_particles;
    s.scheme = config.scheme;
    ref = run_method(model, ys, SmoothingMethod::kFfbsRejuv, s, derive_seed(config.seed, 0xBE4C));
    out.reference_source = "ffbs-rejuv";
  }
  for (std::size_t i = 0; i < n; ++i) out.reference.push_back(ref.prob[i][0]);

  out.runs.resize(static_cast<std::size_t>(config.runs));
  for (int r = 0; r < config.runs; ++r) {
    const std::uint64_t run_seed = derive_seed(config.seed, static_cast<std::uint64_t>(r));
    auto& row = out.runs[static_cast<std::size_t>(r)];
    for (SmoothingMethod m : config.methods) {
      MethodSettings s;
      s.particles = config.particles.at(m);
      s.scheme = config.scheme;
      // Methods with equal particle counts share the forward pass of a run.
      const SmoothingMarginals est =
          run_method(model, ys, m, s, derive_seed(run_seed, static_cast<std::uint64_t>(s.particles)));
      std::vector<double> p1(n);
      for (std::size_t i = 0; i < n; ++i) p1[i] = est.prob[i][0];
      row.push_back(std::move(p1));
    }
  }

  out.error.assign(n, std::vector<double>(M, 0.0));
  out.variance.assign(n, std::vector<double>(M, 0.0));
  const double R = static_cast<double>(config.runs);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < M; ++k) {
      double err = 0.0, mean = 0.0;
      for (const auto& run : out.runs) {
        err += std::abs(run[k][i] - out.reference[i]);
        mean += run[k][i];
      }
      mean /= R;
      double var = 0.0;
      for (const auto& run : out.runs) var += (run[k][i] - mean) * (run[k][i] - mean);
      out.error[i][k] = err / R;
      out.variance[i][k] = config.runs > 1 ? var / (R - 1.0) : 0.0;
    }
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_table_csv(const std::string& path, const std::vector<std::string>& methods,
                     const std::vector<std::vector<double>>& table) {
  std::ofstream f(path);
  if (!f) throw ValidationError("io-error", "cannot write " + path);
  f << "time_index";
  for (const auto& m : methods) f << ',' << m;
  f << '\n';
  for (std::size_t i = 0; i < table.size(); ++i) {
    f << (i + 1);
    for (double v : table[i]) f << ',' << format_double(v);
    f << '\n';
  }
}

}  // namespace rbsmc
