#pragma once

#include <vector>

#include <Eigen/Dense>

#include "enl/sim.hpp"

namespace enl {

/// Normalized noise autocorrelation averaged over directions, with a 2-sigma
/// sampling band.  Lag 0 is omitted (it is one by construction).
struct AutocorrEstimate {
  std::vector<long> lags;
  Eigen::VectorXd values;
  double band = 0.0;  // 2/sqrt(T_eff * m)
};

/// Per-direction biased-normalized autocorrelation of `series` (rows = steps,
/// columns = directions), averaged across directions, for lags 1..max_lag.
AutocorrEstimate estimate_autocorr(const Eigen::MatrixXd& series, long max_lag);

struct DirectionStationary {
  double sigma_theta2 = 0.0;
  double sigma_v2 = 0.0;
  double tau_ratio = 0.0;  // 2 sigma_theta^2 / sigma_v^2
  double tau_sum = 0.0;    // (sum n cov(v, v_{+n})) / (sum cov(v, v_{+n})), truncated
  double se_theta2 = 0.0;  // batched-means standard errors (20 batches)
  double se_v2 = 0.0;
  bool tau_sum_ill_conditioned = false;
};

/// Sample variances of the drift-removed series plus the two correlation-time
/// estimates.  `max_lag_tau` truncates the tau_sum covariance sums; callers
/// typically use min(5M, T/10).
std::vector<DirectionStationary> estimate_stationary(const Trajectory& trajectory,
                                                     long max_lag_tau);

struct PcaResult {
  Eigen::MatrixXd basis;        // columns, descending explained variance
  Eigen::VectorXd explained;    // eigenvalues of the empirical weight covariance
};

/// Eigendecomposition of the empirical covariance of the weight series over
/// the window (rows = steps).
PcaResult pca_basis(const Eigen::MatrixXd& theta);

struct PowerLawFit {
  double exponent = 0.0;
  double two_sigma = 0.0;
  double log_intercept = 0.0;
  long points = 0;
};

/// Least-squares slope on (log x, log y) restricted to x in [x_lo, x_hi],
/// with a 2-sigma slope error from the fit residuals.
PowerLawFit powerlaw_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double x_lo,
                         double x_hi);

/// tr(A^T B) / (|A|_F |B|_F)
double cosine_similarity(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace enl
