#include "enl/sim.hpp"

#include <algorithm>
#include <cmath>

#include "enl/theory.hpp"

namespace enl {

Trajectory run_sgd(const QuadraticEnsemble& ensemble, const Hyperparams& hp, long steps,
                   BatchSchedule& schedule, const Eigen::VectorXd& init_theta,
                   const Eigen::VectorXd& init_v, long burn_in, bool record_noise) {
  const long d = ensemble.dim;
  if (init_theta.size() != d || init_v.size() != d)
    throw InvalidArgument("initial state dimension mismatch");
  if (steps < 1) throw InvalidArgument("steps must be >= 1");
  if (burn_in < 0) throw InvalidArgument("burn_in must be >= 0");

  Trajectory traj;
  traj.start_index = burn_in;
  traj.theta.resize(steps, d);
  traj.velocity.resize(steps, d);
  if (record_noise) traj.noise.resize(steps, d);

  const double scale0 = std::max(1.0, init_theta.norm());
  const double divergence_limit = 1e12 * scale0;

  Eigen::VectorXd theta = init_theta;
  Eigen::VectorXd v = init_v;
  Eigen::VectorXd dg(d);
  for (long k = 0; k < burn_in + steps; ++k) {
    const std::vector<long>& batch = schedule.next_batch();
    dg.setZero();
    for (long n : batch) dg += ensemble.example_noise.row(n);
    dg /= static_cast<double>(batch.size());
    // g_k = H theta + dg; dg is the recorded noise term (the full-gradient
    // noise part vanishes since sum_n eps_n = 0).
    v = -hp.eta * (ensemble.apply_hessian(theta) + dg) + hp.beta * v;
    theta += v;
    if (!(theta.norm() < divergence_limit))
      throw DivergenceError("|theta| exceeded 1e12 x initial scale at step " +
                            std::to_string(k));
    if (k >= burn_in) {
      const long row = k - burn_in;
      traj.theta.row(row) = theta;
      traj.velocity.row(row) = v;
      if (record_noise) traj.noise.row(row) = dg;
    }
  }
  return traj;
}

Trajectory project(const Trajectory& trajectory, const Eigen::MatrixXd& basis) {
  if (basis.rows() != trajectory.dims())
    throw InvalidArgument("basis row count must match trajectory dimension");
  const Eigen::MatrixXd gram = basis.transpose() * basis;
  if (!gram.isApprox(Eigen::MatrixXd::Identity(basis.cols(), basis.cols()), 1e-8))
    throw InvalidArgument("basis columns must be orthonormal");

  Trajectory out;
  out.start_index = trajectory.start_index;
  out.theta = trajectory.theta * basis;
  out.velocity = trajectory.velocity * basis;
  if (trajectory.has_noise()) out.noise = trajectory.noise * basis;
  if (trajectory.has_shifted) {
    out.has_shifted = true;
    out.mean_velocity = basis.transpose() * trajectory.mean_velocity;
    out.theta_shifted = trajectory.theta_shifted * basis;
    out.velocity_shifted = trajectory.velocity_shifted * basis;
  }
  return out;
}

Trajectory subtract_mean_velocity(const Trajectory& trajectory) {
  if (trajectory.steps() < 2) throw InvalidArgument("need at least two recorded steps");
  Trajectory out = trajectory;
  out.mean_velocity = trajectory.velocity.colwise().mean();
  out.theta_shifted = trajectory.theta;
  out.velocity_shifted = trajectory.velocity.rowwise() - out.mean_velocity.transpose();
  for (long k = 0; k < trajectory.steps(); ++k)
    out.theta_shifted.row(k) -=
        static_cast<double>(trajectory.start_index + k) * out.mean_velocity.transpose();
  out.has_shifted = true;
  return out;
}

long default_burn_in(const Hyperparams& hp, const Spectrum& spectrum) {
  double tau_max = tau_sgd(hp);
  for (Eigen::Index i = 0; i < spectrum.size(); ++i)
    tau_max = std::max(tau_max, (1.0 + hp.beta) / (hp.eta * spectrum.lambdas[i]));
  const double epochs = 20.0 * static_cast<double>(hp.batches_per_epoch);
  return static_cast<long>(std::ceil(std::max(epochs, 10.0 * tau_max)));
}

}  // namespace enl
