#pragma once

#include <Eigen/Dense>

#include "enl/ensemble.hpp"
#include "enl/sampling.hpp"

namespace enl {

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Recorded series of an SGD run.  Rows are update steps, columns are
/// coordinates (or projected directions).  `noise` is present when the run
/// recorded dg_k = g_k - H theta_{k-1}.  Drift-corrected series are filled by
/// subtract_mean_velocity.
struct Trajectory {
  Eigen::MatrixXd theta;
  Eigen::MatrixXd velocity;
  Eigen::MatrixXd noise;  // 0x0 when not recorded
  long start_index = 0;
  bool has_shifted = false;
  Eigen::VectorXd mean_velocity;
  Eigen::MatrixXd theta_shifted;
  Eigen::MatrixXd velocity_shifted;

  long steps() const { return theta.rows(); }
  long dims() const { return theta.cols(); }
  bool has_noise() const { return noise.size() > 0; }
};

/// Iterates v_k = -eta g_k(theta_{k-1}) + beta v_{k-1}, theta_k = theta_{k-1} + v_k
/// with g_k = H theta_{k-1} + mean_{n in B_k} eps_n, recording the steps after
/// `burn_in`.  eta = 0 is the frozen-weight probe mode used to measure the
/// noise in the exact regime of the fixed-weight autocorrelation formula.
Trajectory run_sgd(const QuadraticEnsemble& ensemble, const Hyperparams& hp, long steps,
                   BatchSchedule& schedule, const Eigen::VectorXd& init_theta,
                   const Eigen::VectorXd& init_v, long burn_in, bool record_noise);

/// Component-wise projection of all recorded series onto orthonormal basis
/// columns.  Commutes with drift removal.
Trajectory project(const Trajectory& trajectory, const Eigen::MatrixXd& basis);

/// Fills theta^(s)_k = theta_k - vbar*k and v^(s)_k = v_k - vbar with vbar the
/// window mean of v.
Trajectory subtract_mean_velocity(const Trajectory& trajectory);

/// max(20 epochs, 10 * tau_sgd, 10 * max_i (1+beta)/(eta lambda_i)) steps.
long default_burn_in(const Hyperparams& hp, const Spectrum& spectrum);

}  // namespace enl
