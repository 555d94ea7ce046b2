#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "enl/ensemble.hpp"

using namespace enl;

namespace {

// All batches of size s from {0..n-1}; usable as an exact covariance oracle
// for small n.
void for_each_batch(long n, long s, const std::function<void(const std::vector<long>&)>& fn) {
  std::vector<long> idx(s);
  std::iota(idx.begin(), idx.end(), 0L);
  while (true) {
    fn(idx);
    long i = s - 1;
    while (i >= 0 && idx[i] == n - s + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (long j = i + 1; j < s; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace

TEST_CASE("zero-noise spectrum gives identically zero noise vectors") {
  Eigen::VectorXd l(1), v(1);
  l << 1.0;
  v << 0.0;
  const Hyperparams hp = Hyperparams::make(0.1, 0.0, 2, 4);
  const QuadraticEnsemble e = build_commuting_ensemble(Spectrum::make(l, v), hp, 5);
  CHECK(e.example_noise.norm() == 0.0);
  CHECK(sample_covariance(e).norm() == 0.0);
}

TEST_CASE("commuting builder realizes the requested minibatch covariance diagonal") {
  Eigen::VectorXd l(2);
  l << 2.0, 1.0;
  const Spectrum sp = Spectrum::proportional(l, 1.0);
  const Hyperparams hp = Hyperparams::make(0.01, 0.0, 10, 100);
  const QuadraticEnsemble e = build_commuting_ensemble(sp, hp, 11);

  // direct summation of C0 from the generated vectors, then (1/S)(1-S/N)
  Eigen::MatrixXd c0 = Eigen::MatrixXd::Zero(2, 2);
  for (long n = 0; n < 100; ++n)
    c0 += e.example_noise.row(n).transpose() * e.example_noise.row(n);
  c0 /= 99.0;
  const Eigen::MatrixXd c = (1.0 / 10.0) * (1.0 - 0.1) * c0;
  CHECK(c(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(c(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("noise vectors sum to zero after centering") {
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    const Spectrum sp =
        Spectrum::proportional(Spectrum::log_spaced(0.1, 5.0, 7), 2.0);
    const Hyperparams hp = Hyperparams::make(0.01, 0.5, 5, 35);
    const QuadraticEnsemble e = build_commuting_ensemble(sp, hp, seed);
    double max_norm = 0.0;
    for (long n = 0; n < e.num_examples; ++n)
      max_norm = std::max(max_norm, e.example_noise.row(n).norm());
    const Eigen::VectorXd sum = e.example_noise.colwise().sum();
    CHECK(sum.norm() <= 1e-12 * max_norm);
  }
}

TEST_CASE("sample covariance basics") {
  QuadraticEnsemble e;
  e.dim = 1;
  e.num_examples = 2;
  e.example_noise.resize(2, 1);
  e.example_noise << 1.0, -1.0;
  CHECK(sample_covariance(e)(0, 0) == doctest::Approx(2.0));  // (1+1)/(2-1)

  e.num_examples = 1;
  CHECK_THROWS_AS(sample_covariance(e), InvalidArgument);
}

TEST_CASE("sample covariance is symmetric PSD") {
  const Spectrum sp = Spectrum::proportional(Spectrum::log_spaced(0.5, 2.0, 4), 1.0);
  const Hyperparams hp = Hyperparams::make(0.01, 0.0, 4, 16);
  const QuadraticEnsemble e = build_commuting_ensemble(sp, hp, 3);
  const Eigen::MatrixXd c0 = sample_covariance(e);
  CHECK((c0 - c0.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c0);
  CHECK(es.eigenvalues().minCoeff() >= -1e-12);
}

TEST_CASE("C-C0 relation by enumerating all batches") {
  // empirical covariance of single-batch noise over all C(N,S) subsets
  const Spectrum sp = Spectrum::proportional(Spectrum::log_spaced(0.5, 2.0, 3), 1.0);
  const Hyperparams hp = Hyperparams::make(0.01, 0.0, 2, 6);
  const QuadraticEnsemble e = build_commuting_ensemble(sp, hp, 17);

  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(3, 3);
  long count = 0;
  for_each_batch(6, 2, [&](const std::vector<long>& batch) {
    Eigen::VectorXd dg = Eigen::VectorXd::Zero(3);
    for (long n : batch) dg += e.example_noise.row(n);
    dg /= 2.0;
    acc += dg * dg.transpose();
    ++count;
  });
  acc /= static_cast<double>(count);  // batch mean is zero over all subsets
  const Eigen::MatrixXd expected = minibatch_covariance(e, 2);
  CHECK((acc - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("epoch-sum property for random partitions") {
  const Spectrum sp = Spectrum::proportional(Spectrum::log_spaced(0.5, 2.0, 3), 1.0);
  const Hyperparams hp = Hyperparams::make(0.01, 0.0, 3, 12);
  const QuadraticEnsemble e = build_commuting_ensemble(sp, hp, 23);
  std::vector<long> order(12);
  std::iota(order.begin(), order.end(), 0L);
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    std::shuffle(order.begin(), order.end(), rng);
    Eigen::VectorXd epoch_sum = Eigen::VectorXd::Zero(3);
    for (int b = 0; b < 4; ++b) {
      Eigen::VectorXd dg = Eigen::VectorXd::Zero(3);
      for (int i = 0; i < 3; ++i) dg += e.example_noise.row(order[b * 3 + i]);
      epoch_sum += dg / 3.0;
    }
    CHECK(epoch_sum.norm() < 1e-12);
  }
}

TEST_CASE("noncommuting builder matches an explicit 2x2 target exactly") {
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd c0(2, 2);
  c0 << 1.0, 0.5, 0.5, 1.0;
  const QuadraticEnsemble e = build_noncommuting_ensemble(h, c0, 50, 7);
  CHECK_FALSE(e.approximate_covariance);
  // direct summation of eps_n eps_n^T
  Eigen::MatrixXd realized = Eigen::MatrixXd::Zero(2, 2);
  for (long n = 0; n < 50; ++n)
    realized += e.example_noise.row(n).transpose() * e.example_noise.row(n);
  realized /= 49.0;
  CHECK((realized - c0).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("noncommuting builder relative Frobenius error when N-1 >= d") {
  const long d = 12;
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(d, d);
  Eigen::MatrixXd target = x * x.transpose() / d + Eigen::MatrixXd::Identity(d, d);
  const QuadraticEnsemble e =
      build_noncommuting_ensemble(Eigen::MatrixXd::Identity(d, d), target, 40, 9);
  const Eigen::MatrixXd realized = sample_covariance(e);
  CHECK((realized - target).norm() / target.norm() <= 1e-8);
}

TEST_CASE("c0_target = H is the commuting case") {
  const long d = 8;
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(d, d);
  Eigen::MatrixXd h = x * x.transpose() / d + 0.1 * Eigen::MatrixXd::Identity(d, d);
  const QuadraticEnsemble e = build_noncommuting_ensemble(h, h, 40, 13);
  CHECK(e.cos_similarity_c_h == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("rank-deficient realized covariance sets the approximate flag") {
  const long d = 10;
  const QuadraticEnsemble e = build_noncommuting_ensemble(
      Eigen::MatrixXd::Identity(d, d), Eigen::MatrixXd::Identity(d, d), 5, 1);
  CHECK(e.approximate_covariance);
}

TEST_CASE("builder rejects invalid inputs") {
  Eigen::VectorXd l(1), v(1);
  l << 1.0;
  v << -0.5;
  CHECK_THROWS_AS(Spectrum::make(l, v), InvalidArgument);
  CHECK_THROWS_AS(Hyperparams::make(0.1, 0.0, 5, 4), InvalidArgument);
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.3, 0.0, 1.0;
  CHECK_THROWS_AS(build_noncommuting_ensemble(asym, Eigen::MatrixXd::Identity(2, 2), 10, 1),
                  InvalidArgument);
}

TEST_CASE("ensemble artifact round-trips") {
  const Spectrum sp = Spectrum::proportional(Spectrum::log_spaced(0.5, 2.0, 3), 1.0);
  const Hyperparams hp = Hyperparams::make(0.01, 0.0, 2, 8);
  const QuadraticEnsemble e = build_commuting_ensemble(sp, hp, 31);

  std::stringstream buf;
  save_ensemble(buf, e);
  const QuadraticEnsemble back = load_ensemble(buf);
  CHECK(back.dim == e.dim);
  CHECK(back.num_examples == e.num_examples);
  CHECK(back.diagonal_hessian);
  CHECK((back.hessian_diag - e.hessian_diag).norm() == 0.0);
  CHECK((back.example_noise - e.example_noise).norm() == 0.0);
}
