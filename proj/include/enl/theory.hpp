#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "enl/hyperparams.hpp"

namespace enl {

/// The 2x2 objects of the stacked weight recursion
/// x_k = D x_{k-1} - eta*dg_k e1 for one Hessian eigendirection, together
/// with the eigen-structure of D and the E/F matrices entering the exact
/// stationary variances.
struct TransferAlgebra {
  Eigen::Matrix2d D;
  Eigen::Matrix2d E;
  Eigen::Matrix2d F;
  std::complex<double> lambda_plus;
  std::complex<double> lambda_minus;
  std::complex<double> s;  // sqrt((1-b)^2 - eta*l*(2(1+b) - eta*l))

  static TransferAlgebra make(double lambda, const Hyperparams& hp);
};

// D^M by binary exponentiation in real arithmetic; robust through the
// underdamped (complex-eigenvalue) and critically damped regimes.
Eigen::Matrix2d matrix_power(const Eigen::Matrix2d& d, long exponent);

// D^M via the eigendecomposition of D; only well-conditioned when |s| is not
// small.  Used as a cross-check against matrix_power.
Eigen::Matrix2d matrix_power_eigen(const Eigen::Matrix2d& d, long exponent,
                                   std::complex<double> lambda_plus,
                                   std::complex<double> lambda_minus);

enum class Regime { large, near_crossover, small };

struct Stationary {
  double sigma_theta2 = 0.0;
  double sigma_v2 = 0.0;
  double tau = 0.0;
};

/// Exact stationary variances under epoch anti-correlated noise,
/// (s_theta^2, s_v^2)^T = eta^2 s_dg^2 F [e1 - (E + E^T) e1], tau = 2 s_theta^2/s_v^2.
Stationary exact_stationary(double lambda, double sigma_dg2, const Hyperparams& hp);

/// The E = 0 case; exact for i.i.d. (with-replacement) sampling.
Stationary exact_stationary_uncorrelated(double lambda, double sigma_dg2, const Hyperparams& hp);

/// Closed-form approximations valid for lambda > lambda_cross resp.
/// lambda < lambda_cross when M(1-beta) >> 1.
Stationary approx_large(double lambda, double sigma_dg2, const Hyperparams& hp);
Stationary approx_small(double lambda, double sigma_dg2, const Hyperparams& hp);

double lambda_cross(const Hyperparams& hp);  // 3(1-beta)/(eta*M)
double tau_sgd(const Hyperparams& hp);       // (M/3)(1+beta)/(1-beta)

// Advisory regime tag; the near-crossover band is [lambda_cross/2, 2*lambda_cross].
Regime regime(double lambda, const Hyperparams& hp);
const char* regime_name(Regime r);

// The stricter validity predicate M (eta*lambda)^2 >> 1 for the large-lambda
// approximation, alongside the weaker lambda >= lambda_cross one.
bool large_regime_strict(double lambda, const Hyperparams& hp, double threshold = 10.0);

enum class NoiseKernel { epoch_anticorrelated, white };

struct LyapunovResult {
  double sigma_theta2 = 0.0;
  double sigma_v2 = 0.0;
  double tail_bound = 0.0;    // relative truncation tail estimate
  bool tail_warning = false;  // set when tail_bound > 1e-10
};

/// Independent oracle for the stationary variances: truncated evaluation of
/// <y y^T> = sum_{i,j<=h} X^{h-i} <z_i z_j^T> (X^{h-j})^T on the stacked
/// (theta, v) system, with the noise kernel taken lag-by-lag from the epoch
/// autocorrelation weights (or a white kernel).  Does not use the E/F algebra.
/// horizon = 0 picks a horizon from the spectral radius of X.
LyapunovResult lyapunov_oracle(double lambda, double sigma_dg2, const Hyperparams& hp,
                               long horizon = 0,
                               NoiseKernel kernel = NoiseKernel::epoch_anticorrelated);

struct LossFluctuation {
  double total = 0.0;                 // sum_i (1/2) lambda_i sigma^2_{theta,i}
  double baseline = 0.0;              // same sum with the isotropic large-lambda variances
  double ratio_vs_isotropic = 0.0;    // total / baseline
};

/// Expected excess loss from stationary weight fluctuations, and its ratio
/// against the constant-weight-variance (uncorrelated large-lambda) baseline.
LossFluctuation loss_fluctuation(const Spectrum& spectrum,
                                 const Eigen::VectorXd& theta_variances,
                                 const Hyperparams& hp);

struct PredictionRow {
  double lambda = 0.0;
  double sigma_dg2 = 0.0;
  Stationary exact;
  Stationary large;
  Stationary small;
  Regime tag = Regime::large;
};

struct StationaryPrediction {
  std::vector<PredictionRow> rows;
  double lambda_cross = 0.0;
  double tau_sgd = 0.0;
};

StationaryPrediction predict_spectrum(const Spectrum& spectrum, const Hyperparams& hp);

}  // namespace enl
