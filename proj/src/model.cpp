#include "rbsmc/model.hpp"

#include <cmath>
#include <string>

#include "rbsmc/errors.hpp"

namespace rbsmc {

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw ValidationError("model-validation", msg); }

void check_shape(const Mat& M, int rows, int cols, const std::string& name) {
  if (M.rows() != rows || M.cols() != cols) {
    invalid(name + " has shape " + std::to_string(M.rows()) + "x" + std::to_string(M.cols()) +
            ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (!M.allFinite()) invalid(name + " has non-finite entries");
}

void check_len(const Vec& v, int n, const std::string& name) {
  if (v.size() != n) {
    invalid(name + " has length " + std::to_string(v.size()) + ", expected " + std::to_string(n));
  }
  if (!v.allFinite()) invalid(name + " has non-finite entries");
}

}  // namespace

RegimeModel::RegimeModel(RegimeParams params) : params_(std::move(params)) {
  J_ = static_cast<int>(params_.pi.size());
  if (J_ < 1) invalid("at least one regime is required");
  m_ = static_cast<int>(params_.mu1.size());
  if (m_ < 1 || m_ > kMaxDim) invalid("state dimension must be in 1.." + std::to_string(kMaxDim));
  if (params_.c.empty()) invalid("observation offsets c are missing");
  p_ = static_cast<int>(params_.c.front().size());
  if (p_ < 1 || p_ > kMaxDim) invalid("observation dimension must be in 1.." + std::to_string(kMaxDim));

  const auto J = static_cast<std::size_t>(J_);
  if (params_.d.size() != J || params_.T.size() != J || params_.H.size() != J ||
      params_.c.size() != J || params_.B.size() != J || params_.G.size() != J) {
    invalid("per-regime arrays d, T, H, c, B, G must all have J entries");
  }
  if (params_.Q.rows() != J_ || params_.Q.cols() != J_) invalid("Q must be JxJ");

  double pi_sum = 0.0;
  for (double v : params_.pi) {
    if (!(v >= 0.0) || !std::isfinite(v)) invalid("pi entries must be nonnegative");
    pi_sum += v;
  }
  if (std::abs(pi_sum - 1.0) > 1e-12) invalid("pi must sum to 1");
  for (int r = 0; r < J_; ++r) {
    double row = 0.0;
    for (int s = 0; s < J_; ++s) {
      const double q = params_.Q(r, s);
      if (!(q >= 0.0) || !std::isfinite(q)) invalid("Q entries must be nonnegative");
      row += q;
    }
    if (std::abs(row - 1.0) > 1e-12) invalid("row " + std::to_string(r) + " of Q does not sum to 1");
  }

  check_shape(params_.Sigma1, m_, m_, "Sigma1");
  if (!try_cholesky(symmetrized(params_.Sigma1), Sigma1_chol_)) invalid("Sigma1 is not positive definite");

  log_pi_.resize(J);
  log_Q_.resize(J_, J_);
  for (int r = 0; r < J_; ++r) {
    log_pi_[static_cast<std::size_t>(r)] = std::log(params_.pi[static_cast<std::size_t>(r)]);
    for (int s = 0; s < J_; ++s) log_Q_(r, s) = std::log(params_.Q(r, s));
  }

  terms_.resize(J);
  for (std::size_t j = 0; j < J; ++j) {
    const std::string tag = "[" + std::to_string(j) + "]";
    check_len(params_.d[j], m_, "d" + tag);
    check_shape(params_.T[j], m_, m_, "T" + tag);
    check_shape(params_.H[j], m_, m_, "H" + tag);
    check_len(params_.c[j], p_, "c" + tag);
    check_shape(params_.B[j], p_, m_, "B" + tag);
    check_shape(params_.G[j], p_, p_, "G" + tag);

    RegimeTerms& t = terms_[j];
    t.d = params_.d[j];
    t.T = params_.T[j];
    t.H = params_.H[j];
    t.Hbar = symmetrized(t.H * t.H.transpose());
    t.c = params_.c[j];
    t.B = params_.B[j];
    t.G = params_.G[j];
    t.Gbar = symmetrized(t.G * t.G.transpose());
    if (!try_cholesky(t.Gbar, t.Gbar_chol) || t.Gbar_chol.jitter > 0.0) {
      invalid("Gbar" + tag + " is not positive definite");
    }
    t.Gbar_inv = t.Gbar_chol.inverse();
    t.Bt_Ginv = t.B.transpose() * t.Gbar_inv;
    t.Bt_Ginv_B = symmetrized(t.Bt_Ginv * t.B);
    CholeskyFactor hc;
    if (try_cholesky(t.Hbar, hc) && hc.jitter == 0.0) {
      t.Hbar_inv = hc.inverse();
      t.Hbar_chol = std::move(hc);
    }
  }
}

void RegimeModel::check_regime(int j) const {
  if (j < 0 || j >= J_) invalid("regime index " + std::to_string(j) + " out of range");
}

const RegimeTerms& RegimeModel::require_transition_precision(int j) const {
  check_regime(j);
  const RegimeTerms& t = regime(j);
  if (!t.Hbar_chol) invalid("Hbar[" + std::to_string(j) + "] is singular");
  return t;
}

double transition_logdensity(const RegimeModel& model, int regime, const Vec& z_prev, const Vec& z) {
  const RegimeTerms& t = model.require_transition_precision(regime);
  const Vec resid = z - t.d - t.T * z_prev;
  const double m = static_cast<double>(model.state_dim());
  return -0.5 * (m * kLog2Pi + t.Hbar_chol->log_det + t.Hbar_chol->inv_quad(resid));
}

double observation_logdensity(const RegimeModel& model, int regime, const Vec& z, const Vec& y) {
  model.check_regime(regime);
  const RegimeTerms& t = model.regime(regime);
  const Vec resid = y - t.c - t.B * z;
  const double p = static_cast<double>(model.obs_dim());
  return -0.5 * (p * kLog2Pi + t.Gbar_chol.log_det + t.Gbar_chol.inv_quad(resid));
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json matrix_to_json(const Mat& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < M.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json vector_to_json(const Vec& v) {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Mat matrix_from_json(const nlohmann::json& j, const char* field) {
  // A bare number is accepted as a 1x1 matrix.
  if (j.is_number()) {
    Mat M(1, 1);
    M(0, 0) = j.get<double>();
    return M;
  }
  if (!j.is_array() || j.empty()) invalid(std::string(field) + ": expected a matrix (array of arrays)");
  const int rows = static_cast<int>(j.size());
  const int cols = j[0].is_array() ? static_cast<int>(j[0].size()) : 1;
  if (rows > kMaxDim || cols > kMaxDim) invalid(std::string(field) + ": dimension exceeds limit");
  Mat M(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (row.is_number()) {
      if (cols != 1) invalid(std::string(field) + ": ragged matrix");
      M(r, 0) = row.get<double>();
      continue;
    }
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      invalid(std::string(field) + ": ragged matrix");
    }
    for (int c = 0; c < cols; ++c) M(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return M;
}

Vec vector_from_json(const nlohmann::json& j, const char* field) {
  if (j.is_number()) {
    Vec v(1);
    v(0) = j.get<double>();
    return v;
  }
  if (!j.is_array() || j.empty()) invalid(std::string(field) + ": expected a vector");
  if (static_cast<int>(j.size()) > kMaxDim) invalid(std::string(field) + ": dimension exceeds limit");
  Vec v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = j[i].get<double>();
  return v;
}

namespace {

const nlohmann::json& need(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) invalid(std::string("missing field '") + key + "'");
  return j.at(key);
}

template <class T, class F>
std::vector<T> per_regime(const nlohmann::json& arr, const char* field, F&& parse) {
  if (!arr.is_array()) invalid(std::string(field) + ": expected one entry per regime");
  std::vector<T> out;
  for (const auto& e : arr) out.push_back(parse(e, field));
  return out;
}

std::vector<Mat> factors(const nlohmann::json& j, const char* factor_key, const char* cov_key) {
  if (j.contains(factor_key)) return per_regime<Mat>(j.at(factor_key), factor_key, matrix_from_json);
  auto covs = per_regime<Mat>(need(j, cov_key), cov_key, matrix_from_json);
  std::vector<Mat> out;
  for (const Mat& S : covs) {
    const Mat sym = symmetrized(S);
    Eigen::LLT<Mat> llt(sym);
    if (llt.info() != Eigen::Success) {
      // Semidefinite covariance (e.g. zero process noise): use a symmetric root.
      Eigen::SelfAdjointEigenSolver<Mat> es(sym);
      Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
      out.push_back(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
    } else {
      out.push_back(llt.matrixL());
    }
  }
  return out;
}

}  // namespace

nlohmann::json model_to_json(const RegimeModel& model) {
  const RegimeParams& p = model.params();
  nlohmann::json j;
  j["pi"] = p.pi;
  nlohmann::json Q = nlohmann::json::array();
  for (int r = 0; r < p.Q.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < p.Q.cols(); ++c) row.push_back(p.Q(r, c));
    Q.push_back(row);
  }
  j["Q"] = Q;
  auto vecs = [](const std::vector<Vec>& vs) {
    nlohmann::json a = nlohmann::json::array();
    for (const Vec& v : vs) a.push_back(vector_to_json(v));
    return a;
  };
  auto mats = [](const std::vector<Mat>& ms) {
    nlohmann::json a = nlohmann::json::array();
    for (const Mat& m : ms) a.push_back(matrix_to_json(m));
    return a;
  };
  j["d"] = vecs(p.d);
  j["T"] = mats(p.T);
  j["H"] = mats(p.H);
  j["c"] = vecs(p.c);
  j["B"] = mats(p.B);
  j["G"] = mats(p.G);
  j["mu1"] = vector_to_json(p.mu1);
  j["Sigma1"] = matrix_to_json(p.Sigma1);
  return j;
}

RegimeModel model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) invalid("model JSON must be an object");
  RegimeParams p;
  try {
    p.pi = need(j, "pi").get<std::vector<double>>();
    const auto& Qj = need(j, "Q");
    const auto J = static_cast<int>(p.pi.size());
    if (!Qj.is_array() || static_cast<int>(Qj.size()) != J) invalid("Q must have J rows");
    p.Q.resize(J, J);
    for (int r = 0; r < J; ++r) {
      const auto& row = Qj[static_cast<std::size_t>(r)];
      if (!row.is_array() || static_cast<int>(row.size()) != J) invalid("Q must be JxJ");
      for (int c = 0; c < J; ++c) p.Q(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    p.d = per_regime<Vec>(need(j, "d"), "d", vector_from_json);
    p.T = per_regime<Mat>(need(j, "T"), "T", matrix_from_json);
    p.H = factors(j, "H", "Hbar");
    p.c = per_regime<Vec>(need(j, "c"), "c", vector_from_json);
    p.B = per_regime<Mat>(need(j, "B"), "B", matrix_from_json);
    p.G = factors(j, "G", "Gbar");
    p.mu1 = vector_from_json(need(j, "mu1"), "mu1");
    p.Sigma1 = matrix_from_json(need(j, "Sigma1"), "Sigma1");
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string("malformed model JSON: ") + e.what());
  }
  // B given as a flat row for p=1, m>1 parses as a column; fix the orientation.
  const int m = static_cast<int>(p.mu1.size());
  for (Mat& B : p.B) {
    if (B.cols() == 1 && m > 1 && B.rows() == m) B.transposeInPlace();
  }
  return RegimeModel(std::move(p));
}

}  // namespace rbsmc
