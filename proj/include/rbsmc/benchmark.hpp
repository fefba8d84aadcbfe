#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rbsmc/forward_filter.hpp"
#include "rbsmc/model.hpp"
#include "rbsmc/smoothing.hpp"

namespace rbsmc {

enum class SmoothingMethod { kFfbs, kFfbsRejuv, kTwoFilter, kTwoFilterRejuv, kOracle };

SmoothingMethod parse_method(const std::string& name);
std::string to_string(SmoothingMethod method);

struct MethodSettings {
  int particles = 100;         // forward particle count N
  int backward_particles = 0;  // Ñ or backward N; 0 means "same as particles"
  SelectionScheme scheme = SelectionScheme::kKLOS;
  bool full_gamma_mixture = false;
  bool state_moments = false;
};

// Runs one smoother end to end (forward pass included).
SmoothingMarginals run_method(const RegimeModel& model, std::span<const Vec> ys, SmoothingMethod method,
                              const MethodSettings& settings, std::uint64_t seed);

struct BenchmarkConfig {
  int n = 10;
  std::uint64_t data_seed = 1;
  int runs = 100;
  std::uint64_t seed = 1;
  std::vector<SmoothingMethod> methods;
  std::map<SmoothingMethod, int> particles;
  int reference_particles = 5000;  // used only when the oracle is unavailable
  SelectionScheme scheme = SelectionScheme::kKLOS;
};

BenchmarkConfig benchmark_config_from_json(const nlohmann::json& j);

struct BenchmarkResult {
  std::vector<std::string> methods;
  std::vector<double> reference;                       // P(a_i = 1 | y_{1:n})
  std::string reference_source;                        // "oracle" or "ffbs-rejuv"
  std::vector<std::vector<double>> error;              // [i][method] mean absolute error
  std::vector<std::vector<double>> variance;           // [i][method] empirical variance
  std::vector<std::vector<std::vector<double>>> runs;  // [run][method][i] estimates
};

// The simulated-data study: one fixed data set, independent Monte Carlo runs
// of every method, errors against the exact (or large-N) reference.
BenchmarkResult run_benchmark(const RegimeModel& model, const BenchmarkConfig& config);

// CSV with columns time_index, then one per method; 17 significant digits.
void write_table_csv(const std::string& path, const std::vector<std::string>& methods,
                     const std::vector<std::vector<double>>& table);

std::string format_double(double v);

}  // namespace rbsmc
