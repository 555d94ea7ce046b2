#include "enl/stats.hpp"

#include <cmath>

namespace enl {

AutocorrEstimate estimate_autocorr(const Eigen::MatrixXd& series, long max_lag) {
  const long t = series.rows();
  const long m = series.cols();
  if (max_lag < 1) throw InvalidArgument("max_lag must be >= 1");
  if (t < 10 * max_lag) throw InvalidArgument("series too short: need length >= 10 * max_lag");

  Eigen::MatrixXd centered = series.rowwise() - series.colwise().mean();
  Eigen::VectorXd var = centered.colwise().squaredNorm() / static_cast<double>(t);
  for (long j = 0; j < m; ++j)
    if (var[j] <= 0.0) throw InvalidArgument("constant series in direction " + std::to_string(j));

  AutocorrEstimate out;
  out.values = Eigen::VectorXd::Zero(max_lag);
  out.lags.resize(max_lag);
  for (long h = 1; h <= max_lag; ++h) {
    out.lags[h - 1] = h;
    double acc = 0.0;
    for (long j = 0; j < m; ++j) {
      // biased normalization: divide by T, not T - h
      const double c = centered.col(j).head(t - h).dot(centered.col(j).tail(t - h)) /
                       static_cast<double>(t);
      acc += c / var[j];
    }
    out.values[h - 1] = acc / static_cast<double>(m);
  }
  const double t_eff = static_cast<double>(t - max_lag);
  out.band = 2.0 / std::sqrt(t_eff * static_cast<double>(m));
  return out;
}

namespace {

// Batched-means standard error of the variance estimate of one column.
double variance_se(const Eigen::VectorXd& centered, int num_batches) {
  const long t = centered.size();
  const long len = t / num_batches;
  if (len < 2) return 0.0;
  Eigen::VectorXd batch_vars(num_batches);
  for (int b = 0; b < num_batches; ++b) {
    const auto seg = centered.segment(b * len, len);
    const double mu = seg.mean();
    batch_vars[b] = (seg.array() - mu).square().sum() / static_cast<double>(len - 1);
  }
  const double mu = batch_vars.mean();
  const double var_of_vars =
      (batch_vars.array() - mu).square().sum() / static_cast<double>(num_batches - 1);
  return std::sqrt(var_of_vars / static_cast<double>(num_batches));
}

}  // namespace

std::vector<DirectionStationary> estimate_stationary(const Trajectory& trajectory,
                                                     long max_lag_tau) {
  if (!trajectory.has_shifted)
    throw InvalidArgument("estimate_stationary requires a drift-removed trajectory");
  const long t = trajectory.steps();
  const long m = trajectory.dims();
  if (max_lag_tau < 1 || max_lag_tau >= t) throw InvalidArgument("bad tau truncation lag");

  std::vector<DirectionStationary> out(static_cast<std::size_t>(m));
  constexpr int kBatches = 20;
  for (long j = 0; j < m; ++j) {
    Eigen::VectorXd th = trajectory.theta_shifted.col(j);
    Eigen::VectorXd v = trajectory.velocity_shifted.col(j);
    th.array() -= th.mean();
    v.array() -= v.mean();

    // Remove the residual least-squares trend of theta.  The endpoint-based
    // drift estimate v-bar leaves a spurious ramp of slope (theta_T -
    // theta_0)/T - slope_LS whose own variance does not vanish with T and
    // would bias the weight variance upward by ~sigma^2/6 on average.
    {
      double sxx = 0.0, sxy = 0.0;
      const double kbar = static_cast<double>(t - 1) / 2.0;
      for (long k = 0; k < t; ++k) {
        const double dk = static_cast<double>(k) - kbar;
        sxx += dk * dk;
        sxy += dk * th[k];
      }
      const double slope = sxy / sxx;
      for (long k = 0; k < t; ++k) th[k] -= slope * (static_cast<double>(k) - kbar);
    }

    DirectionStationary& row = out[static_cast<std::size_t>(j)];
    row.sigma_theta2 = th.squaredNorm() / static_cast<double>(t - 1);
    row.sigma_v2 = v.squaredNorm() / static_cast<double>(t - 1);
    row.tau_ratio = row.sigma_v2 > 0.0 ? 2.0 * row.sigma_theta2 / row.sigma_v2 : 0.0;
    row.se_theta2 = variance_se(th, kBatches);
    row.se_v2 = variance_se(v, kBatches);

    double num = 0.0, den = 0.0, den_var = 0.0;
    for (long n = 1; n <= max_lag_tau; ++n) {
      const double c =
          v.head(t - n).dot(v.tail(t - n)) / static_cast<double>(t - n);
      num += static_cast<double>(n) * c;
      den += c;
      den_var += 1.0 / static_cast<double>(t - n);
    }
    // crude standard error of the denominator, treating lag covariances as
    // independent with variance sigma_v^4 / (T - n)
    const double den_se = row.sigma_v2 * std::sqrt(den_var);
    row.tau_sum_ill_conditioned = std::abs(den) <= 2.0 * den_se;
    row.tau_sum = den != 0.0 ? num / den : 0.0;
  }
  return out;
}

PcaResult pca_basis(const Eigen::MatrixXd& theta) {
  const long t = theta.rows();
  if (t < 2) throw InvalidArgument("pca_basis needs at least two steps");
  const Eigen::MatrixXd centered = theta.rowwise() - theta.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(t - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  PcaResult out;
  // SelfAdjointEigenSolver sorts ascending; flip to descending.
  out.basis = es.eigenvectors().rowwise().reverse();
  out.explained = es.eigenvalues().reverse();
  return out;
}

PowerLawFit powerlaw_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double x_lo,
                         double x_hi) {
  if (x.size() != y.size()) throw InvalidArgument("x and y lengths differ");
  std::vector<double> lx, ly;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] < x_lo || x[i] > x_hi) continue;
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw InvalidArgument("power-law fit requires positive values");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const long n = static_cast<long>(lx.size());
  if (n < 3) throw InvalidArgument("power-law fit needs at least 3 points in region");

  double sx = 0, sy = 0;
  for (long i = 0; i < n; ++i) {
    sx += lx[static_cast<std::size_t>(i)];
    sy += ly[static_cast<std::size_t>(i)];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (long i = 0; i < n; ++i) {
    const double dx = lx[static_cast<std::size_t>(i)] - mx;
    sxx += dx * dx;
    sxy += dx * (ly[static_cast<std::size_t>(i)] - my);
  }
  PowerLawFit fit;
  fit.points = n;
  fit.exponent = sxy / sxx;
  fit.log_intercept = my - fit.exponent * mx;
  double ss_res = 0;
  for (long i = 0; i < n; ++i) {
    const double r = ly[static_cast<std::size_t>(i)] - fit.log_intercept -
                     fit.exponent * lx[static_cast<std::size_t>(i)];
    ss_res += r * r;
  }
  const double slope_var = n > 2 ? ss_res / static_cast<double>(n - 2) / sxx : 0.0;
  fit.two_sigma = 2.0 * std::sqrt(slope_var);
  return fit;
}

double cosine_similarity(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidArgument("matrix dimensions differ");
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw InvalidArgument("zero matrix has no direction");
  return a.cwiseProduct(b).sum() / (na * nb);
}

}  // namespace enl
