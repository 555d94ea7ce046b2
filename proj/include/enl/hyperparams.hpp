#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace enl {

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct StabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateEpochError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Learning rate, momentum, and the batching geometry of one training setup.
/// `batches_per_epoch` is N/S when S divides N; otherwise ceil(N/S) with
/// `integer_epoch == false` (the closed-form results assume an integer ratio,
/// the simulator handles the ragged last batch directly).
struct Hyperparams {
  double eta = 0.0;
  double beta = 0.0;
  long batch_size = 1;
  long num_examples = 1;
  long batches_per_epoch = 1;
  bool integer_epoch = true;

  static Hyperparams make(double eta, double beta, long batch_size, long num_examples);

  // Convenience for the closed-form side, where only (eta, beta, M) matter.
  static Hyperparams from_batches(double eta, double beta, long batches_per_epoch);

  // Throws StabilityError unless 0 < eta*lambda < 2(1+beta).
  void check_stability(double lambda) const;

  // Throws DegenerateEpochError unless batches_per_epoch >= 2.
  void require_epoch_structure() const;
};

/// Hessian eigenvalues (descending) paired with the per-direction noise
/// variances sigma^2_{dg,i}, i.e. the eigenvalues of C in the shared basis.
struct Spectrum {
  Eigen::VectorXd lambdas;
  Eigen::VectorXd noise_variances;

  static Spectrum make(Eigen::VectorXd lambdas, Eigen::VectorXd noise_variances);
  // noise_variances = c * lambdas (the C proportional-to-H case).
  static Spectrum proportional(Eigen::VectorXd lambdas, double c);
  // `count` eigenvalues log-spaced in [lambda_min, lambda_max], descending.
  static Eigen::VectorXd log_spaced(double lambda_min, double lambda_max, int count);

  Eigen::Index size() const { return lambdas.size(); }
  void check_stability(const Hyperparams& hp) const;
};

}  // namespace enl
