#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include <Eigen/Dense>

#include "enl/hyperparams.hpp"

namespace enl {

/// Synthetic quadratic ensemble: a Hessian H plus N per-example noise vectors
/// eps_n with sum_n eps_n = 0, so the minibatch noise is independent of the
/// weights and sums to zero over every epoch.  Immutable after construction;
/// safe for shared concurrent reads.
struct QuadraticEnsemble {
  long dim = 0;
  long num_examples = 0;
  bool diagonal_hessian = true;
  Eigen::VectorXd hessian_diag;   // used when diagonal_hessian
  Eigen::MatrixXd hessian;        // used otherwise
  Eigen::MatrixXd example_noise;  // N x d, row n = eps_n
  Eigen::MatrixXd basis;          // optional analysis directions (columns); 0x0 if absent
  double cos_similarity_c_h = 1.0;
  bool approximate_covariance = false;  // exact C0 matching was impossible (N-1 < d)

  Eigen::VectorXd apply_hessian(const Eigen::VectorXd& v) const {
    return diagonal_hessian ? Eigen::VectorXd(hessian_diag.cwiseProduct(v))
                            : Eigen::VectorXd(hessian * v);
  }
  bool has_basis() const { return basis.size() > 0; }
};

/// Gradient sample covariance C0 = (1/(N-1)) sum_n eps_n eps_n^T.
Eigen::MatrixXd sample_covariance(const QuadraticEnsemble& ensemble);

/// Minibatch noise covariance C = (1/S)(1 - S/N) C0.
Eigen::MatrixXd minibatch_covariance(const QuadraticEnsemble& ensemble, long batch_size);

/// Diagonal Hessian H = diag(lambda_i) with per-coordinate Gaussian noise
/// vectors, centered and rescaled per coordinate so the realized minibatch
/// covariance C has diagonal exactly (1/S)(1 - S/N) * C0 eigenvalues matching
/// the spectrum's sigma^2_{dg,i}.
QuadraticEnsemble build_commuting_ensemble(const Spectrum& spectrum, const Hyperparams& hp,
                                           std::uint64_t seed);

/// Dense ensemble whose realized sample covariance matches c0_target exactly
/// (Gaussian draw, centering, then a symmetric square-root transform); when
/// N - 1 < dim exact matching is impossible and `approximate_covariance` is
/// set.  Records the cosine similarity between the resulting C and H.
QuadraticEnsemble build_noncommuting_ensemble(const Eigen::MatrixXd& hessian,
                                              const Eigen::MatrixXd& c0_target,
                                              long num_examples, std::uint64_t seed);

// Replayable flat text artifact: header (dim, N, storage kind), then H, then
// eps_n row-major.
void save_ensemble(std::ostream& out, const QuadraticEnsemble& ensemble);
void save_ensemble(const std::string& path, const QuadraticEnsemble& ensemble);
QuadraticEnsemble load_ensemble(std::istream& in);
QuadraticEnsemble load_ensemble(const std::string& path);

}  // namespace enl
