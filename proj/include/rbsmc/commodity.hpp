#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "rbsmc/model.hpp"

namespace rbsmc {

// Regime-switching spot / convenience-yield model. State Z = (log S, δ):
//
//   dX_t = (r − δ_t − σ²/2) dt + σ dW¹,   dδ_t = κ(α − δ_t) dt + η dW²,
//   d<W¹, W²> = ρ dt,
//
// with (α, σ, η, ρ) switching with the regime and κ shared. Futures are
// observed weekly (τ years apart) at fixed maturities counted in weeks.
struct TwoFactorParams {
  double kappa = 5.0;
  std::vector<double> alpha;
  std::vector<double> sigma;
  std::vector<double> eta;
  std::vector<double> rho;
  std::vector<double> g;  // observation noise std per contract
  Eigen::MatrixXd Q;
  std::vector<double> pi;
  Vec mu1;  // empty: take it from the first observation
  Mat Sigma1;
  double r = 0.0296;
  double tau = 1.0 / 52.0;

  int num_regimes() const { return static_cast<int>(alpha.size()); }
  int num_contracts() const { return static_cast<int>(g.size()); }

  // Throws ValidationError("model-validation") on a violated invariant.
  void validate() const;
};

// Starting point of the calibration: κ = 5, α = (0.1, −0.05), σ = 0.4,
// η = 0.5, ρ = (0.75, 0.65), g = 0.1, Q diagonal (0.98, 0.97), π uniform,
// Σ₁ = 0.05 I and μ₁ left to the data.
TwoFactorParams calibration_start_params();

std::vector<int> default_maturities();  // 4, 16, 26, 56 weeks

struct SdeDiscretization {
  Vec d;
  Mat T;
  Mat Hbar;
  Mat H;  // lower Cholesky factor of Hbar
};

// Exact transition of the regime-j SDE over h years. Throws
// NumericalError("hbar-not-pd") if the covariance is not positive definite.
SdeDiscretization discretize_sde(const TwoFactorParams& params, int j, double h);

struct TermStructure {
  std::vector<std::vector<double>> A;     // A[m][j]
  std::vector<Eigen::RowVector2d> Bvec;   // Bvec[m]
};

// log F_{t,m} = A_m(a) + B_m Z_t, by the one-week recursion from A_0 = 0,
// B_0 = (1, 0).
TermStructure term_structure(const TwoFactorParams& params, int max_m);

// The CLGM seen by the smoothers. The transition into week i uses the
// parameters of the regime current at week i (see README on timing).
RegimeModel build_clgm(const TwoFactorParams& params, const std::vector<int>& maturities);

// μ₁ from the first log-price row: log F at the shortest maturity, and the
// yield implied by the slope between the first two maturities.
Vec initial_state_mean(const Vec& y1, const std::vector<int>& maturities, double r, double tau);

struct FuturesPanel {
  std::vector<std::string> dates;      // ISO yyyy-mm-dd, strictly increasing
  std::vector<std::string> contracts;  // column names after "date"
  std::vector<int> maturities;         // weeks
  std::vector<Vec> Y;                  // log prices

  int size() const { return static_cast<int>(Y.size()); }
};

// CSV "date,F1,F4,F6,F13" of prices. Errors name the offending row/cell.
FuturesPanel ingest_futures_csv(const std::string& path,
                                const std::vector<int>& maturities = default_maturities());
void write_futures_csv(const std::string& path, const FuturesPanel& panel);

// Simulated weekly panel (plus the regimes that generated it).
struct SimulatedPanel {
  FuturesPanel panel;
  std::vector<int> regimes;
  std::vector<Vec> states;
};

SimulatedPanel simulate_panel(const TwoFactorParams& params, const std::vector<int>& maturities, int n,
                              std::uint64_t seed, const std::string& start_date = "2000-01-05");

TwoFactorParams two_factor_from_json(const nlohmann::json& j);
nlohmann::json two_factor_to_json(const TwoFactorParams& params);
std::vector<int> maturities_from_json(const nlohmann::json& j);

}  // namespace rbsmc
