#include "rbsmc/commodity.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rbsmc/benchmark.hpp"
#include "rbsmc/errors.hpp"
#include "rbsmc/simulate.hpp"

namespace rbsmc {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("model-validation", what);
}

std::vector<double> doubles_from_json(const nlohmann::json& j, const char* field) {
  if (!j.contains(field)) throw ValidationError("invalid-config", std::string("missing field '") + field + "'");
  const auto& v = j.at(field);
  if (v.is_number()) return {v.get<double>()};
  return v.get<std::vector<double>>();
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_iso_date(const std::string& s, std::chrono::year_month_day& out) {
  int y = 0;
  unsigned m = 0, d = 0;
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  if (std::sscanf(s.c_str(), "%4d-%2u-%2u", &y, &m, &d) != 3) return false;
  out = std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  return out.ok();
}

std::string format_iso_date(std::chrono::year_month_day ymd) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::vector<std::string> contract_names(const std::vector<int>& maturities) {
  if (maturities == default_maturities()) return {"F1", "F4", "F6", "F13"};
  std::vector<std::string> names;
  for (int m : maturities) names.push_back("W" + std::to_string(m));
  return names;
}

void check_maturities(const std::vector<int>& maturities) {
  require(!maturities.empty(), "at least one maturity is required");
  for (int m : maturities) require(m >= 1, "maturities must be positive week counts");
}

}  // namespace

void TwoFactorParams::validate() const {
  const int J = num_regimes();
  require(J >= 1, "two-factor model needs at least one regime");
  const auto sz = static_cast<std::size_t>(J);
  require(sigma.size() == sz && eta.size() == sz && rho.size() == sz,
          "alpha, sigma, eta and rho must have one entry per regime");
  require(std::isfinite(kappa) && kappa > 0.0, "kappa must be positive");
  require(std::isfinite(tau) && tau > 0.0, "tau must be positive");
  require(std::isfinite(r), "r must be finite");
  for (std::size_t j = 0; j < sz; ++j) {
    require(std::isfinite(alpha[j]), "alpha must be finite");
    require(std::isfinite(sigma[j]) && sigma[j] > 0.0, "sigma must be positive");
    require(std::isfinite(eta[j]) && eta[j] > 0.0, "eta must be positive");
    require(std::isfinite(rho[j]) && std::abs(rho[j]) < 1.0, "rho must lie in (-1, 1)");
  }
  require(!g.empty(), "at least one observation noise scale is required");
  for (double v : g) require(std::isfinite(v) && v > 0.0, "observation noise scales must be positive");
  require(Q.rows() == J && Q.cols() == J, "Q must be J x J");
  require(pi.size() == sz, "pi must have one entry per regime");
  require(mu1.size() == 0 || mu1.size() == 2, "mu1 must have two entries");
  require(Sigma1.rows() == 2 && Sigma1.cols() == 2, "Sigma1 must be 2 x 2");
}

TwoFactorParams calibration_start_params() {
  TwoFactorParams p;
  p.kappa = 5.0;
  p.alpha = {0.1, -0.05};
  p.sigma = {0.4, 0.4};
  p.eta = {0.5, 0.5};
  p.rho = {0.75, 0.65};
  p.g = {0.1, 0.1, 0.1, 0.1};
  p.Q.resize(2, 2);
  p.Q << 0.98, 0.02, 0.03, 0.97;
  p.pi = {0.5, 0.5};
  p.Sigma1 = 0.05 * Mat::Identity(2, 2);
  return p;
}

std::vector<int> default_maturities() { return {4, 16, 26, 56}; }

SdeDiscretization discretize_sde(const TwoFactorParams& params, int j, double h) {
  if (!(h > 0.0)) throw ValidationError("invalid-input", "discretization step must be positive");
  const auto k = static_cast<std::size_t>(j);
  const double kappa = params.kappa;
  const double a = params.alpha[k], s = params.sigma[k], e = params.eta[k], rho = params.rho[k];
  const double e1 = -std::expm1(-kappa * h);        // 1 − e^{−κh}
  const double e2 = -std::expm1(-2.0 * kappa * h);  // 1 − e^{−2κh}

  SdeDiscretization out;
  out.d = Vec(2);
  out.d << (params.r - a - 0.5 * s * s) * h + a * e1 / kappa, a * e1;
  out.T = Mat(2, 2);
  out.T << 1.0, -e1 / kappa, 0.0, std::exp(-kappa * h);

  const double h11 = s * s * h + e * e * (h + e2 / (2.0 * kappa) - 2.0 * e1 / kappa) / (kappa * kappa) -
                     2.0 * rho * e * s * (h - e1 / kappa) / kappa;
  const double h12 = (rho * e * s - e * e / kappa) * e1 / kappa + e * e * e2 / (2.0 * kappa * kappa);
  const double h22 = e * e * e2 / (2.0 * kappa);
  out.Hbar = Mat(2, 2);
  out.Hbar << h11, h12, h12, h22;

  const double schur = h11 > 0.0 ? h22 - h12 * h12 / h11 : -1.0;
  if (!(h11 > 0.0) || !(schur > 0.0)) {
    throw NumericalError("hbar-not-pd", "transition covariance of regime " + std::to_string(j + 1) +
                                            " is not positive definite");
  }
  const double l11 = std::sqrt(h11);
  out.H = Mat::Zero(2, 2);
  out.H(0, 0) = l11;
  out.H(1, 0) = h12 / l11;
  out.H(1, 1) = std::sqrt(schur);
  return out;
}

TermStructure term_structure(const TwoFactorParams& params, int max_m) {
  if (max_m < 1) throw ValidationError("invalid-input", "term structure needs max_m >= 1");
  const int J = params.num_regimes();
  std::vector<SdeDiscretization> week;
  for (int j = 0; j < J; ++j) week.push_back(discretize_sde(params, j, params.tau));
  Eigen::Matrix2d T = week[0].T;

  TermStructure ts;
  ts.A.assign(static_cast<std::size_t>(max_m) + 1, std::vector<double>(static_cast<std::size_t>(J), 0.0));
  ts.Bvec.resize(static_cast<std::size_t>(max_m) + 1);
  ts.Bvec[0] = Eigen::RowVector2d(1.0, 0.0);
  std::vector<double> terms(static_cast<std::size_t>(J));
  for (int m = 1; m <= max_m; ++m) {
    const auto mu = static_cast<std::size_t>(m);
    const Eigen::RowVector2d& Bp = ts.Bvec[mu - 1];
    for (int j = 0; j < J; ++j) {
      for (int k = 0; k < J; ++k) {
        const double q = params.Q(j, k);
        terms[static_cast<std::size_t>(k)] = q > 0.0 ? std::log(q) + ts.A[mu - 1][static_cast<std::size_t>(k)] : kNegInf;
      }
      const Eigen::Vector2d d = week[static_cast<std::size_t>(j)].d;
      const Eigen::Matrix2d Hb = week[static_cast<std::size_t>(j)].Hbar;
      ts.A[mu][static_cast<std::size_t>(j)] = log_sum_exp(terms) + Bp.dot(d) + 0.5 * Bp * Hb * Bp.transpose();
    }
    ts.Bvec[mu] = Bp * T;
  }
  return ts;
}

RegimeModel build_clgm(const TwoFactorParams& params, const std::vector<int>& maturities) {
  params.validate();
  check_maturities(maturities);
  const int J = params.num_regimes();
  const int p = static_cast<int>(maturities.size());
  require(params.num_contracts() == p, "g must have one entry per maturity");
  require(params.mu1.size() == 2, "mu1 is not set");
  require(p <= kMaxDim, "too many contracts");

  int max_m = 0;
  for (int m : maturities) max_m = std::max(max_m, m);
  const TermStructure ts = term_structure(params, max_m);

  RegimeParams rp;
  rp.pi = params.pi;
  rp.Q = params.Q;
  rp.mu1 = params.mu1;
  rp.Sigma1 = params.Sigma1;
  Mat B(p, 2);
  for (int l = 0; l < p; ++l) B.row(l) = ts.Bvec[static_cast<std::size_t>(maturities[static_cast<std::size_t>(l)])];
  Mat G = Mat::Zero(p, p);
  for (int l = 0; l < p; ++l) G(l, l) = params.g[static_cast<std::size_t>(l)];
  for (int j = 0; j < J; ++j) {
    SdeDiscretization w = discretize_sde(params, j, params.tau);
    Vec c(p);
    for (int l = 0; l < p; ++l) {
      c(l) = ts.A[static_cast<std::size_t>(maturities[static_cast<std::size_t>(l)])][static_cast<std::size_t>(j)];
    }
    rp.d.push_back(w.d);
    rp.T.push_back(w.T);
    rp.H.push_back(w.H);
    rp.c.push_back(c);
    rp.B.push_back(B);
    rp.G.push_back(G);
  }
  return RegimeModel(std::move(rp));
}

Vec initial_state_mean(const Vec& y1, const std::vector<int>& maturities, double r, double tau) {
  if (maturities.size() < 2 || y1.size() < 2 || maturities[0] == maturities[1]) {
    throw ValidationError("invalid-input", "initial state mean needs two distinct maturities");
  }
  Vec mu(2);
  mu(0) = y1(0);
  mu(1) = r - (y1(1) - y1(0)) / ((maturities[1] - maturities[0]) * tau);
  return mu;
}

FuturesPanel ingest_futures_csv(const std::string& path, const std::vector<int>& maturities) {
  check_maturities(maturities);
  std::ifstream f(path);
  if (!f) throw ValidationError("io-error", "cannot open " + path);
  auto fail = [&](int row, const std::string& msg) -> void {
    throw ValidationError("invalid-input", path + ": row " + std::to_string(row) + ": " + msg);
  };

  FuturesPanel panel;
  panel.maturities = maturities;
  std::string line;
  int row = 0;
  bool header = false;
  while (std::getline(f, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    if (!header) {
      if (cells.empty() || cells[0] != "date") fail(row, "header must start with 'date'");
      panel.contracts.assign(cells.begin() + 1, cells.end());
      if (panel.contracts.size() != maturities.size()) {
        fail(row, "header has " + std::to_string(panel.contracts.size()) + " price columns, expected " +
                      std::to_string(maturities.size()));
      }
      header = true;
      continue;
    }
    if (cells.size() != panel.contracts.size() + 1) {
      fail(row, "expected " + std::to_string(panel.contracts.size() + 1) + " fields, found " +
                    std::to_string(cells.size()));
    }
    std::chrono::year_month_day ymd;
    if (!parse_iso_date(cells[0], ymd)) fail(row, "invalid date '" + cells[0] + "'");
    if (!panel.dates.empty() && !(panel.dates.back() < cells[0])) {
      fail(row, "date " + cells[0] + " does not follow " + panel.dates.back());
    }
    Vec y(static_cast<int>(panel.contracts.size()));
    for (std::size_t l = 0; l < panel.contracts.size(); ++l) {
      const std::string& cell = cells[l + 1];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        fail(row, "column " + panel.contracts[l] + ": not a number '" + cell + "'");
      }
      if (v <= 0.0) fail(row, "column " + panel.contracts[l] + ": price must be positive, got " + cell);
      y(static_cast<int>(l)) = std::log(v);
    }
    panel.dates.push_back(cells[0]);
    panel.Y.push_back(y);
  }
  if (!header) throw ValidationError("invalid-input", path + ": empty file");
  if (panel.Y.empty()) throw ValidationError("invalid-input", path + ": no data rows");
  return panel;
}

void write_futures_csv(const std::string& path, const FuturesPanel& panel) {
  std::ofstream f(path);
  if (!f) throw ValidationError("io-error", "cannot write " + path);
  const std::vector<std::string> names =
      panel.contracts.empty() ? contract_names(panel.maturities) : panel.contracts;
  f << "date";
  for (const auto& n : names) f << ',' << n;
  f << '\n';
  for (std::size_t i = 0; i < panel.Y.size(); ++i) {
    f << panel.dates[i];
    for (int l = 0; l < panel.Y[i].size(); ++l) f << ',' << format_double(std::exp(panel.Y[i](l)));
    f << '\n';
  }
}

SimulatedPanel simulate_panel(const TwoFactorParams& params, const std::vector<int>& maturities, int n,
                              std::uint64_t seed, const std::string& start_date) {
  std::chrono::year_month_day start;
  if (!parse_iso_date(start_date, start)) throw ValidationError("invalid-input", "invalid start date " + start_date);
  const RegimeModel model = build_clgm(params, maturities);
  SimulatedPath path = simulate(model, n, seed);

  SimulatedPanel out;
  out.panel.maturities = maturities;
  out.panel.contracts = contract_names(maturities);
  const std::chrono::sys_days day0{start};
  for (int i = 0; i < n; ++i) {
    out.panel.dates.push_back(format_iso_date(std::chrono::year_month_day{day0 + std::chrono::weeks{i}}));
  }
  out.panel.Y = std::move(path.observations);
  out.regimes = std::move(path.regimes);
  out.states = std::move(path.states);
  return out;
}

TwoFactorParams two_factor_from_json(const nlohmann::json& j) {
  TwoFactorParams p = calibration_start_params();
  try {
    p.kappa = j.value("kappa", p.kappa);
    if (j.contains("alpha")) p.alpha = doubles_from_json(j, "alpha");
    if (j.contains("sigma")) p.sigma = doubles_from_json(j, "sigma");
    if (j.contains("eta")) p.eta = doubles_from_json(j, "eta");
    if (j.contains("rho")) p.rho = doubles_from_json(j, "rho");
    if (j.contains("g")) p.g = doubles_from_json(j, "g");
    p.r = j.value("r", p.r);
    p.tau = j.value("tau", p.tau);
    const auto J = static_cast<int>(p.alpha.size());
    if (j.contains("Q")) {
      const Mat Qm = matrix_from_json(j.at("Q"), "Q");
      p.Q = Qm;
    } else if (j.contains("Q_diag")) {
      const std::vector<double> qd = doubles_from_json(j, "Q_diag");
      if (static_cast<int>(qd.size()) != J) throw ValidationError("invalid-config", "Q_diag needs J entries");
      p.Q = Eigen::MatrixXd::Zero(J, J);
      for (int a = 0; a < J; ++a) {
        for (int b = 0; b < J; ++b) p.Q(a, b) = a == b ? qd[static_cast<std::size_t>(a)] : (1.0 - qd[static_cast<std::size_t>(a)]) / (J - 1);
      }
    }
    if (j.contains("pi")) {
      p.pi = doubles_from_json(j, "pi");
    } else if (static_cast<int>(p.pi.size()) != J) {
      p.pi.assign(static_cast<std::size_t>(J), 1.0 / J);
    }
    if (j.contains("mu1")) p.mu1 = vector_from_json(j.at("mu1"), "mu1");
    if (j.contains("Sigma1")) p.Sigma1 = matrix_from_json(j.at("Sigma1"), "Sigma1");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid-config", std::string("malformed two-factor parameters: ") + e.what());
  }
  p.validate();
  return p;
}

nlohmann::json two_factor_to_json(const TwoFactorParams& p) {
  nlohmann::json j;
  j["kappa"] = p.kappa;
  j["alpha"] = p.alpha;
  j["sigma"] = p.sigma;
  j["eta"] = p.eta;
  j["rho"] = p.rho;
  j["g"] = p.g;
  Mat Qm = p.Q;
  j["Q"] = matrix_to_json(Qm);
  j["pi"] = p.pi;
  if (p.mu1.size() > 0) j["mu1"] = vector_to_json(p.mu1);
  j["Sigma1"] = matrix_to_json(p.Sigma1);
  j["r"] = p.r;
  j["tau"] = p.tau;
  return j;
}

std::vector<int> maturities_from_json(const nlohmann::json& j) {
  if (!j.contains("maturities")) return default_maturities();
  try {
    std::vector<int> m = j.at("maturities").get<std::vector<int>>();
    check_maturities(m);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid-config", std::string("malformed maturities: ") + e.what());
  }
}

}  // namespace rbsmc
