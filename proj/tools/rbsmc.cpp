// Command-line front end: simulate, filter, smooth, benchmark, calibrate.
//
// Exit status: 0 success, 1 invalid input/config, 2 numerical failure. Errors
// are reported on stderr as {"error": <kind>, "message": <text>}.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "rbsmc/benchmark.hpp"
#include "rbsmc/commodity.hpp"
#include "rbsmc/em.hpp"
#include "rbsmc/errors.hpp"
#include "rbsmc/forward_filter.hpp"
#include "rbsmc/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rbsmc;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> particles;
  std::string out = ".";
  std::string method;
  std::optional<int> n;
  std::string data;
  bool moments = false;
};

json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("io-error", "cannot open " + path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw ValidationError("invalid-config", path + ": " + e.what());
  }
}

// Relative paths inside a config are taken relative to the config file.
std::string resolve(const std::string& config_path, const std::string& p) {
  const fs::path q(p);
  if (q.is_absolute() || config_path.empty()) return p;
  return (fs::path(config_path).parent_path() / q).string();
}

fs::path out_file(const Options& o, const char* name) {
  fs::create_directories(o.out);
  return fs::path(o.out) / name;
}

// Where the model comes from: an inline/linked CLGM, or commodity parameters.
struct ModelSource {
  std::optional<RegimeModel> clgm;
  std::optional<TwoFactorParams> commodity;
  std::vector<int> maturities;

  RegimeModel build(std::span<const Vec> ys) const {
    if (clgm) return *clgm;
    TwoFactorParams p = *commodity;
    if (p.mu1.size() == 0) {
      if (ys.empty()) throw ValidationError("invalid-config", "commodity mu1 is required to simulate");
      p.mu1 = initial_state_mean(ys.front(), maturities, p.r, p.tau);
    }
    return build_clgm(p, maturities);
  }
};

ModelSource load_model(const json& cfg, const std::string& cfg_path) {
  ModelSource src;
  if (cfg.contains("commodity")) {
    src.commodity = two_factor_from_json(cfg.at("commodity"));
    src.maturities = maturities_from_json(cfg.at("commodity"));
  } else if (cfg.contains("model")) {
    const json& m = cfg.at("model");
    src.clgm = model_from_json(m.is_string() ? read_json(resolve(cfg_path, m.get<std::string>())) : m);
  } else {
    throw ValidationError("invalid-config", "config needs a 'model' or 'commodity' entry");
  }
  return src;
}

// Observation CSV: every column whose header starts with 'y' is a component.
std::vector<Vec> read_observation_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("io-error", "cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw ValidationError("invalid-input", path + ": empty file");
  std::vector<int> cols;
  {
    std::stringstream ss(line);
    std::string h;
    for (int c = 0; std::getline(ss, h, ','); ++c) {
      if (!h.empty() && h[0] == 'y') cols.push_back(c);
    }
  }
  if (cols.empty()) throw ValidationError("invalid-input", path + ": no y columns in header");
  std::vector<Vec> ys;
  for (int row = 2; std::getline(f, line); ++row) {
    if (line.find_first_not_of(" \r\n\t") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    Vec y(static_cast<int>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const auto c = static_cast<std::size_t>(cols[k]);
      try {
        std::size_t used = 0;
        if (c >= cells.size()) throw std::invalid_argument("missing");
        y(static_cast<int>(k)) = std::stod(cells[c], &used);
      } catch (const std::exception&) {
        throw ValidationError("invalid-input", path + ": row " + std::to_string(row) + ": bad value in column " +
                                                   std::to_string(c + 1));
      }
    }
    ys.push_back(y);
  }
  if (ys.empty()) throw ValidationError("invalid-input", path + ": no data rows");
  return ys;
}

struct Data {
  std::vector<Vec> ys;
  std::vector<std::string> dates;
};

// Observations from --data / "data", else simulated from the model ("n",
// "data_seed").
Data load_data(const Options& o, const json& cfg, const ModelSource& src) {
  std::string path = o.data;
  if (path.empty() && cfg.contains("data")) path = resolve(o.config, cfg.at("data").get<std::string>());
  Data d;
  if (!path.empty()) {
    if (src.commodity) {
      FuturesPanel panel = ingest_futures_csv(path, src.maturities);
      d.ys = std::move(panel.Y);
      d.dates = std::move(panel.dates);
    } else {
      d.ys = read_observation_csv(path);
    }
    return d;
  }
  const int n = o.n.value_or(cfg.value("n", 0));
  if (n < 1) throw ValidationError("invalid-config", "no data: give 'data' or a positive 'n'");
  const std::uint64_t data_seed = cfg.value("data_seed", std::uint64_t{1});
  d.ys = simulate(src.build({}), n, data_seed).observations;
  return d;
}

void write_probabilities(const fs::path& path, const std::vector<std::vector<double>>& prob,
                         const SmoothingMarginals* moments = nullptr) {
  std::ofstream f(path);
  if (!f) throw ValidationError("io-error", "cannot write " + path.string());
  const std::size_t J = prob.empty() ? 0 : prob.front().size();
  f << "time_index";
  for (std::size_t j = 1; j <= J; ++j) f << ",p_regime_" << j;
  const int m = moments && moments->has_moments() ? static_cast<int>(moments->state_mean.front().size()) : 0;
  for (int k = 1; k <= m; ++k) f << ",mean_" << k;
  for (int k = 1; k <= m; ++k) f << ",var_" << k;
  f << '\n';
  for (std::size_t i = 0; i < prob.size(); ++i) {
    f << (i + 1);
    for (double v : prob[i]) f << ',' << format_double(v);
    for (int k = 0; k < m; ++k) f << ',' << format_double(moments->state_mean[i](k));
    for (int k = 0; k < m; ++k) f << ',' << format_double(moments->state_cov[i](k, k));
    f << '\n';
  }
}

SelectionScheme scheme_of(const json& cfg) {
  return cfg.contains("scheme") ? parse_selection_scheme(cfg.at("scheme").get<std::string>()) : SelectionScheme::kKLOS;
}

int cmd_simulate(const Options& o) {
  const json cfg = read_json(o.config);
  const ModelSource src = load_model(cfg, o.config);
  const int n = o.n.value_or(cfg.value("n", 0));
  if (n < 1) throw ValidationError("invalid-config", "simulate needs a positive n");
  const std::uint64_t seed = o.seed.value_or(cfg.value("seed", std::uint64_t{1}));
  json summary = {{"command", "simulate"}, {"n", n}, {"seed", seed}};
  if (src.commodity) {
    const SimulatedPanel sim = simulate_panel(*src.commodity, src.maturities, n, seed,
                                              cfg.value("start_date", std::string("2000-01-05")));
    const fs::path panel_path = out_file(o, "panel.csv");
    write_futures_csv(panel_path.string(), sim.panel);
    const fs::path reg_path = out_file(o, "regimes.csv");
    std::ofstream f(reg_path);
    f << "time_index,date,regime\n";
    for (int i = 0; i < n; ++i) {
      f << (i + 1) << ',' << sim.panel.dates[static_cast<std::size_t>(i)] << ','
        << sim.regimes[static_cast<std::size_t>(i)] + 1 << '\n';
    }
    summary["outputs"] = {panel_path.string(), reg_path.string()};
  } else {
    const SimulatedPath path = simulate(*src.clgm, n, seed);
    const fs::path p = out_file(o, "simulated.csv");
    std::ofstream f(p);
    f << "time_index,regime";
    for (int k = 1; k <= src.clgm->state_dim(); ++k) f << ",z_" << k;
    for (int k = 1; k <= src.clgm->obs_dim(); ++k) f << ",y_" << k;
    f << '\n';
    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      f << (i + 1) << ',' << path.regimes[ui] + 1;
      for (int k = 0; k < path.states[ui].size(); ++k) f << ',' << format_double(path.states[ui](k));
      for (int k = 0; k < path.observations[ui].size(); ++k) f << ',' << format_double(path.observations[ui](k));
      f << '\n';
    }
    summary["outputs"] = {p.string()};
  }
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_filter(const Options& o) {
  const json cfg = read_json(o.config);
  const ModelSource src = load_model(cfg, o.config);
  const Data data = load_data(o, cfg, src);
  const RegimeModel model = src.build(data.ys);
  const int N = o.particles.value_or(cfg.value("particles", 100));
  const std::uint64_t seed = o.seed.value_or(cfg.value("seed", std::uint64_t{1}));
  const std::vector<ParticleCloud> clouds = forward_pass(model, data.ys, N, scheme_of(cfg), seed);
  const fs::path p = out_file(o, "filtering.csv");
  write_probabilities(p, filtering_marginals(clouds, model.num_regimes()));
  std::cout << json{{"command", "filter"}, {"n", data.ys.size()}, {"particles", N},
                    {"log_evidence", clouds.back().log_evidence}, {"outputs", {p.string()}}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_smooth(const Options& o) {
  const json cfg = read_json(o.config);
  const ModelSource src = load_model(cfg, o.config);
  const Data data = load_data(o, cfg, src);
  const RegimeModel model = src.build(data.ys);
  const std::string mname = !o.method.empty() ? o.method : cfg.value("method", std::string("two-filter-rejuv"));
  const SmoothingMethod method = parse_method(mname);
  MethodSettings s;
  s.particles = o.particles.value_or(cfg.value("particles", 100));
  s.backward_particles = cfg.value("backward_particles", 0);
  s.scheme = scheme_of(cfg);
  s.full_gamma_mixture = cfg.value("full_gamma_mixture", false);
  s.state_moments = o.moments || cfg.value("state_moments", false);
  const std::uint64_t seed = o.seed.value_or(cfg.value("seed", std::uint64_t{1}));
  const SmoothingMarginals est = run_method(model, data.ys, method, s, seed);
  const fs::path p = out_file(o, "smoothing.csv");
  write_probabilities(p, est.prob, &est);
  std::cout << json{{"command", "smooth"}, {"method", mname}, {"n", data.ys.size()}, {"outputs", {p.string()}}}.dump()
            << '\n';
  return 0;
}

int cmd_benchmark(const Options& o) {
  const json cfg = read_json(o.config);
  const ModelSource src = load_model(cfg, o.config);
  BenchmarkConfig bc = benchmark_config_from_json(cfg);
  if (o.seed) bc.seed = *o.seed;
  if (o.n) bc.n = *o.n;
  if (o.particles) {
    for (auto& [m, N] : bc.particles) N = *o.particles;
  }
  const BenchmarkResult r = run_benchmark(src.build({}), bc);
  const fs::path err = out_file(o, "error.csv");
  const fs::path var = out_file(o, "variance.csv");
  write_table_csv(err.string(), r.methods, r.error);
  write_table_csv(var.string(), r.methods, r.variance);
  json summary = {{"command", "benchmark"}, {"reference", r.reference_source}, {"runs", bc.runs},
                  {"outputs", {err.string(), var.string()}}};
  for (std::size_t k = 0; k < r.methods.size(); ++k) {
    double e = 0.0, v = 0.0;
    for (std::size_t i = 0; i < r.error.size(); ++i) {
      e += r.error[i][k];
      v += r.variance[i][k];
    }
    summary["mean_error"][r.methods[k]] = e / static_cast<double>(r.error.size());
    summary["mean_variance"][r.methods[k]] = v / static_cast<double>(r.error.size());
  }
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_calibrate(const Options& o) {
  const json cfg = read_json(o.config);
  EmConfig ec = em_config_from_json(cfg);
  if (o.seed) ec.seed = *o.seed;
  if (o.particles) ec.estep.particles = *o.particles;
  std::string path = o.data;
  if (path.empty()) {
    if (!cfg.contains("data")) throw ValidationError("invalid-config", "calibrate needs a futures panel ('data')");
    path = resolve(o.config, cfg.at("data").get<std::string>());
  }
  const FuturesPanel panel = ingest_futures_csv(path, ec.maturities);
  const EmResult r = em_run(ec, panel);
  const fs::path trace = out_file(o, "trace.csv");
  const fs::path post = out_file(o, "posterior.csv");
  const fs::path fin = out_file(o, "final_params.json");
  write_trace_csv(trace.string(), r);
  write_posterior_csv(post.string(), panel.dates, r.posterior);
  {
    std::ofstream f(fin);
    f << two_factor_to_json(r.final_params).dump(2) << '\n';
  }
  int ascents = 0;
  for (const EmIteration& it : r.trace) ascents += it.ascent() >= 0.0 ? 1 : 0;
  std::cout << json{{"command", "calibrate"}, {"iterations", r.trace.size()}, {"nonnegative_ascent", ascents},
                    {"outputs", {trace.string(), post.string(), fin.string()}}}
                   .dump()
            << '\n';
  return 0;
}

void report(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rao-Blackwellized SMC filtering and smoothing for regime-switching linear Gaussian models"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub, bool needs_config = true) {
    auto* c = sub->add_option("--config", o.config, "JSON config file");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "master seed (overrides config)");
    sub->add_option("--particles", o.particles, "particle count (overrides config)");
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
  };
  CLI::App* sim = app.add_subcommand("simulate", "simulate regimes, states and observations");
  common(sim);
  sim->add_option("--n", o.n, "path length");
  CLI::App* filt = app.add_subcommand("filter", "forward Rao-Blackwellized particle filter");
  common(filt);
  filt->add_option("--data", o.data, "observation CSV (overrides config)");
  filt->add_option("--n", o.n, "simulate this many observations when no data is given");
  CLI::App* smooth = app.add_subcommand("smooth", "regime smoothing marginals");
  common(smooth);
  smooth->add_option("--method", o.method, "ffbs | ffbs-rejuv | two-filter | two-filter-rejuv | oracle");
  smooth->add_option("--data", o.data, "observation CSV (overrides config)");
  smooth->add_option("--n", o.n, "simulate this many observations when no data is given");
  smooth->add_flag("--moments", o.moments, "also write smoothed state means and variances");
  CLI::App* bench = app.add_subcommand("benchmark", "Monte Carlo error/variance study against a reference");
  common(bench);
  bench->add_option("--n", o.n, "path length (overrides config)");
  CLI::App* cal = app.add_subcommand("calibrate", "EM calibration of the two-factor commodity model");
  common(cal);
  cal->add_option("--data", o.data, "futures CSV (overrides config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report("usage", e.what());
    return 1;
  }

  try {
    if (*sim) return cmd_simulate(o);
    if (*filt) return cmd_filter(o);
    if (*smooth) return cmd_smooth(o);
    if (*bench) return cmd_benchmark(o);
    if (*cal) return cmd_calibrate(o);
  } catch (const ValidationError& e) {
    report(e.kind(), e.what());
    return 1;
  } catch (const NumericalError& e) {
    report(e.kind(), e.what());
    return 2;
  } catch (const nlohmann::json::exception& e) {
    report("invalid-config", e.what());
    return 1;
  } catch (const fs::filesystem_error& e) {
    report("io-error", e.what());
    return 1;
  }
  return 1;
}
