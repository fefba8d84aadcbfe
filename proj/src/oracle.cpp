#include "rbsmc/oracle.hpp"

#include <cmath>
#include <string>

#include "rbsmc/errors.hpp"

namespace rbsmc {

RtsResult rts_given_regimes(const RegimeModel& model, std::span<const int> regimes, std::span<const Vec> ys) {
  const std::size_t n = ys.size();
  if (n == 0 || regimes.size() != n) {
    throw ValidationError("invalid-input", "regime path and observations must be nonempty and aligned");
  }
  RtsResult out;
  out.filtered.resize(n);
  std::vector<KalmanStat> predicted(n);
  KalmanStep step = kalman_init(model, regimes[0], ys[0]);
  predicted[0] = KalmanStat{model.mu1(), model.Sigma1()};
  out.filtered[0] = step.stat;
  out.loglik = step.loglik;
  for (std::size_t i = 1; i < n; ++i) {
    predicted[i] = kalman_predict(model, out.filtered[i - 1], regimes[i]);
    step = kalman_update(model, predicted[i], regimes[i], ys[i]);
    out.filtered[i] = step.stat;
    out.loglik += step.loglik;
  }

  const int m = model.state_dim();
  out.mean.resize(n);
  out.cov.resize(n);
  out.cross_cov.assign(n, Mat::Zero(m, m));
  out.mean[n - 1] = out.filtered[n - 1].mu;
  out.cov[n - 1] = out.filtered[n - 1].P;
  for (std::size_t i = n - 1; i-- > 0;) {
    const RegimeTerms& t = model.regime(regimes[i + 1]);
    const CholeskyFactor chPp = robust_cholesky(predicted[i + 1].P, "predicted covariance");
    // G = P_f T' P_p⁻¹
    const Mat G = chPp.solve(Mat(t.T * out.filtered[i].P)).transpose();
    out.mean[i] = out.filtered[i].mu + G * (out.mean[i + 1] - predicted[i + 1].mu);
    out.cov[i] = out.filtered[i].P + G * (out.cov[i + 1] - predicted[i + 1].P) * G.transpose();
    symmetrize(out.cov[i]);
    out.cross_cov[i + 1] = out.cov[i + 1] * G.transpose();
  }
  return out;
}

namespace {

struct Enumerator {
  const RegimeModel& model;
  std::span<const Vec> ys;
  int J;
  int n;
  std::vector<int> path;
  std::vector<KalmanStat> stats;  // filtered moments along the current prefix
  std::vector<std::vector<LogSumExp>> filt;
  std::vector<std::vector<LogSumExp>> smooth;
  std::vector<double> log_joint;

  void visit(int depth, double prefix) {
    const auto d = static_cast<std::size_t>(depth);
    for (int j = 0; j < J; ++j) {
      path[d] = j;
      double lp;
      if (depth == 0) {
        lp = model.log_pi(j);
        if (lp != kNegInf) {
          KalmanStep s = kalman_init(model, j, ys[0]);
          stats[0] = std::move(s.stat);
          lp += s.loglik;
        }
      } else {
        lp = prefix + model.log_Q(path[d - 1], j);
        if (lp != kNegInf) {
          KalmanStep s = kalman_predict_update(model, stats[d - 1], j, ys[d]);
          stats[d] = std::move(s.stat);
          lp += s.loglik;
        }
      }
      if (lp == kNegInf) {
        // Skip the whole subtree but keep the lexicographic indexing.
        log_joint.insert(log_joint.end(), static_cast<std::size_t>(std::pow(J, n - depth - 1) + 0.5), kNegInf);
        continue;
      }
      filt[d][static_cast<std::size_t>(j)].add(lp);
      if (depth + 1 == n) {
        log_joint.push_back(lp);
        for (int i = 0; i < n; ++i) smooth[static_cast<std::size_t>(i)][static_cast<std::size_t>(path[static_cast<std::size_t>(i)])].add(lp);
      } else {
        visit(depth + 1, lp);
      }
    }
  }
};

std::vector<double> normalize_row(const std::vector<LogSumExp>& row) {
  std::vector<double> lv(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) lv[j] = row[j].value();
  const double total = log_sum_exp(lv);
  for (double& v : lv) v = v == kNegInf ? 0.0 : std::exp(v - total);
  return lv;
}

}  // namespace

OracleResult enumerate_posterior(const RegimeModel& model, std::span<const Vec> ys, bool state_moments) {
  const int n = static_cast<int>(ys.size());
  const int J = model.num_regimes();
  if (n < 1) throw ValidationError("invalid-input", "at least one observation is required");
  const double count = std::pow(static_cast<double>(J), n);
  if (count > kOracleMaxSequences) {
    throw ValidationError("instance-too-large", "exact enumeration needs J^n = " + std::to_string(J) + "^" +
                                                    std::to_string(n) + " sequences (limit 1e6)");
  }
  const auto N = static_cast<std::size_t>(n);
  Enumerator en{model, ys, J, n, std::vector<int>(N), std::vector<KalmanStat>(N),
                std::vector<std::vector<LogSumExp>>(N, std::vector<LogSumExp>(static_cast<std::size_t>(J))),
                std::vector<std::vector<LogSumExp>>(N, std::vector<LogSumExp>(static_cast<std::size_t>(J))), {}};
  en.log_joint.reserve(static_cast<std::size_t>(count));
  en.visit(0, 0.0);

  OracleResult out;
  out.log_joint = std::move(en.log_joint);
  out.log_evidence = log_sum_exp(out.log_joint);
  if (!std::isfinite(out.log_evidence)) {
    throw NumericalError("degenerate-likelihood", "every regime sequence has zero probability");
  }
  for (int i = 0; i < n; ++i) {
    out.filtering.push_back(normalize_row(en.filt[static_cast<std::size_t>(i)]));
    out.smoothing.prob.push_back(normalize_row(en.smooth[static_cast<std::size_t>(i)]));
  }

  if (state_moments) {
    const int m = model.state_dim();
    std::vector<MomentAccumulator> acc(N, MomentAccumulator(m));
    std::vector<int> seq(N);
    for (std::size_t s = 0; s < out.log_joint.size(); ++s) {
      if (out.log_joint[s] == kNegInf) continue;
      std::size_t rem = s;
      for (int i = n - 1; i >= 0; --i) {
        seq[static_cast<std::size_t>(i)] = static_cast<int>(rem % static_cast<std::size_t>(J));
        rem /= static_cast<std::size_t>(J);
      }
      const RtsResult r = rts_given_regimes(model, seq, ys);
      for (std::size_t i = 0; i < N; ++i) acc[i].add(out.log_joint[s], r.mean[i], r.cov[i]);
    }
    for (std::size_t i = 0; i < N; ++i) {
      out.smoothing.state_mean.push_back(acc[i].mean());
      out.smoothing.state_cov.push_back(acc[i].cov());
    }
  }
  return out;
}

}  // namespace rbsmc
