#include "enl/hyperparams.hpp"

#include <algorithm>
#include <cmath>

namespace enl {

Hyperparams Hyperparams::make(double eta, double beta, long batch_size, long num_examples) {
  if (!(eta > 0.0)) throw InvalidArgument("eta must be positive");
  if (!(beta >= 0.0 && beta < 1.0)) throw InvalidArgument("beta must be in [0, 1)");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (num_examples < batch_size) throw InvalidArgument("batch_size must not exceed num_examples");
  Hyperparams hp;
  hp.eta = eta;
  hp.beta = beta;
  hp.batch_size = batch_size;
  hp.num_examples = num_examples;
  hp.batches_per_epoch = (num_examples + batch_size - 1) / batch_size;
  hp.integer_epoch = (num_examples % batch_size == 0);
  return hp;
}

Hyperparams Hyperparams::from_batches(double eta, double beta, long batches_per_epoch) {
  if (batches_per_epoch < 1) throw InvalidArgument("batches_per_epoch must be >= 1");
  return make(eta, beta, 1, batches_per_epoch);
}

void Hyperparams::check_stability(double lambda) const {
  const double x = eta * lambda;
  if (!(x > 0.0 && x < 2.0 * (1.0 + beta)))
    throw StabilityError("eta*lambda = " + std::to_string(x) +
                         " outside stability region (0, " + std::to_string(2.0 * (1.0 + beta)) + ")");
}

void Hyperparams::require_epoch_structure() const {
  if (batches_per_epoch < 2)
    throw DegenerateEpochError("batches_per_epoch must be >= 2 (M = 1 is full-batch, zero noise)");
}

Spectrum Spectrum::make(Eigen::VectorXd lambdas, Eigen::VectorXd noise_variances) {
  if (lambdas.size() == 0) throw InvalidArgument("spectrum must be non-empty");
  if (lambdas.size() != noise_variances.size())
    throw InvalidArgument("lambdas and noise_variances must have equal length");
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0)) throw InvalidArgument("eigenvalues must be positive");
    if (noise_variances[i] < 0.0) throw InvalidArgument("noise variances must be non-negative");
    if (i > 0 && lambdas[i] > lambdas[i - 1])
      throw InvalidArgument("eigenvalues must be sorted descending");
  }
  Spectrum s;
  s.lambdas = std::move(lambdas);
  s.noise_variances = std::move(noise_variances);
  return s;
}

Spectrum Spectrum::proportional(Eigen::VectorXd lambdas, double c) {
  if (c < 0.0) throw InvalidArgument("proportionality constant must be non-negative");
  Eigen::VectorXd nv = c * lambdas;
  return make(std::move(lambdas), std::move(nv));
}

Eigen::VectorXd Spectrum::log_spaced(double lambda_min, double lambda_max, int count) {
  if (!(lambda_min > 0.0 && lambda_max >= lambda_min)) throw InvalidArgument("bad log-space range");
  if (count < 1) throw InvalidArgument("count must be >= 1");
  Eigen::VectorXd out(count);
  if (count == 1) {
    out[0] = lambda_max;
    return out;
  }
  const double lo = std::log(lambda_min), hi = std::log(lambda_max);
  for (int i = 0; i < count; ++i)
    out[i] = std::exp(hi + (lo - hi) * static_cast<double>(i) / (count - 1));
  return out;
}

void Spectrum::check_stability(const Hyperparams& hp) const {
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) hp.check_stability(lambdas[i]);
}

}  // namespace enl
