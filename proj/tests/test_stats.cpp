#include <doctest.h>

#include <cmath>
#include <random>

#include "enl/sampling.hpp"
#include "enl/stats.hpp"
#include "enl/theory.hpp"

using namespace enl;

TEST_CASE("white noise stays inside the band for most lags") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd series(4000, 20);
  for (long i = 0; i < series.rows(); ++i)
    for (long j = 0; j < series.cols(); ++j) series(i, j) = gauss(rng);
  const AutocorrEstimate est = estimate_autocorr(series, 100);
  long inside = 0;
  for (long h = 0; h < 100; ++h)
    if (std::abs(est.values[h]) <= est.band) ++inside;
  CHECK(inside >= 95);
}

TEST_CASE("alternating series has lag-1 autocorrelation near -1") {
  Eigen::MatrixXd series(1000, 1);
  for (long i = 0; i < 1000; ++i) series(i, 0) = (i % 2 == 0) ? 1.0 : -1.0;
  const AutocorrEstimate est = estimate_autocorr(series, 4);
  CHECK(est.values[0] == doctest::Approx(-1.0).epsilon(0.01));
}

TEST_CASE("constant series is rejected") {
  Eigen::MatrixXd series = Eigen::MatrixXd::Ones(100, 2);
  CHECK_THROWS_AS(estimate_autocorr(series, 5), InvalidArgument);
}

TEST_CASE("epoch noise tracks the theoretical weights") {
  // long probe-mode noise series, M = 20.  S is kept large relative to N so
  // that the schedule-shared sampling fluctuations (which the band formula
  // does not account for) stay well below the per-direction term.
  const Hyperparams hp = Hyperparams::make(0.01, 0.0, 20, 400);
  const Spectrum sp =
      Spectrum::proportional(Spectrum::log_spaced(0.5, 2.0, 30), 1.0);
  QuadraticEnsemble e = build_commuting_ensemble(sp, hp, 21);
  Hyperparams probe = hp;
  probe.eta = 0.0;
  BatchSchedule sched(SampleMode::epoch_without_replacement, 400, 20, 22);
  const Trajectory traj = run_sgd(e, probe, 40000, sched, Eigen::VectorXd::Zero(30),
                                  Eigen::VectorXd::Zero(30), 0, true);
  const AutocorrEstimate est = estimate_autocorr(traj.noise, 40);
  long inside = 0;
  for (long h = 1; h <= 40; ++h)
    if (std::abs(est.values[h - 1] - autocorr_weight(h, 20)) <= est.band) ++inside;
  CHECK(inside >= 36);
}

TEST_CASE("tau_sum matches a brute-force double sum") {
  // synthetic AR(1) velocities integrated into a position series
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  const long t = 1000;
  Trajectory traj;
  traj.theta.resize(t, 1);
  traj.velocity.resize(t, 1);
  double v = 0.0, th = 0.0;
  for (long k = 0; k < t; ++k) {
    v = 0.8 * v + gauss(rng);
    th += v;
    traj.theta(k, 0) = th;
    traj.velocity(k, 0) = v;
  }
  const long max_lag = 100;
  const auto est = estimate_stationary(subtract_mean_velocity(traj), max_lag);

  // O(T^2)-style direct evaluation of the truncated ratio
  Eigen::VectorXd vc = traj.velocity.col(0);
  vc.array() -= vc.mean();
  double num = 0.0, den = 0.0;
  for (long n = 1; n <= max_lag; ++n) {
    double c = 0.0;
    for (long k = 0; k + n < t; ++k) c += vc[k] * vc[k + n];
    c /= static_cast<double>(t - n);
    num += static_cast<double>(n) * c;
    den += c;
  }
  CHECK(est[0].tau_sum == doctest::Approx(num / den).epsilon(1e-10));
}

TEST_CASE("tau_ratio and tau_sum agree on a stationary SGD run") {
  const Hyperparams hp = Hyperparams::make(0.05, 0.5, 2, 20);  // M = 10
  Eigen::VectorXd l(1), nv(1);
  l << 1.0;
  nv << 1.0;
  const Spectrum sp = Spectrum::make(l, nv);
  QuadraticEnsemble e = build_commuting_ensemble(sp, hp, 31);
  BatchSchedule sched(SampleMode::epoch_without_replacement, 20, 2, 32);
  const Trajectory traj = run_sgd(e, hp, 120000, sched, Eigen::VectorXd::Zero(1),
                                  Eigen::VectorXd::Zero(1), 2000, false);
  const auto est = estimate_stationary(subtract_mean_velocity(traj), 50);
  CHECK(std::abs(est[0].tau_ratio - est[0].tau_sum) <= 0.15 * est[0].tau_ratio);
  // Theorem-2 identity against theory
  const Stationary ex = exact_stationary(1.0, 1.0, hp);
  CHECK(est[0].tau_ratio == doctest::Approx(ex.tau).epsilon(0.15));
}

TEST_CASE("deterministic trajectories give vanishing variances") {
  // pure linear drift: removed exactly, both variances collapse to zero
  Trajectory ramp;
  ramp.theta.resize(100, 1);
  ramp.velocity.resize(100, 1);
  for (long k = 0; k < 100; ++k) {
    ramp.theta(k, 0) = 0.3 * static_cast<double>(k + 1);
    ramp.velocity(k, 0) = 0.3;
  }
  const auto lin = estimate_stationary(subtract_mean_velocity(ramp), 10);
  CHECK(lin[0].sigma_theta2 <= 1e-24);
  CHECK(lin[0].sigma_v2 <= 1e-24);
  CHECK(lin[0].tau_sum_ill_conditioned);

  // geometric decay: the sample variance is dominated by the initial
  // transient and shrinks like 1/T with the window length
  Trajectory decay;
  const long t = 4000;
  decay.theta.resize(t, 1);
  decay.velocity.resize(t, 1);
  double th = 1.0;
  for (long k = 0; k < t; ++k) {
    const double next = 0.9 * th;
    decay.velocity(k, 0) = next - th;
    th = next;
    decay.theta(k, 0) = th;
  }
  const auto est = estimate_stationary(subtract_mean_velocity(decay), 10);
  CHECK(est[0].sigma_theta2 < 2e-3);
  CHECK(est[0].sigma_v2 < 2e-5);
}

TEST_CASE("pca identifies an embedded drift direction") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> gauss;
  const long d = 20, t = 500;
  Eigen::VectorXd dir = Eigen::VectorXd::Zero(d);
  dir[3] = 1.0;
  Eigen::MatrixXd theta(t, d);
  for (long k = 0; k < t; ++k) {
    for (long j = 0; j < d; ++j) theta(k, j) = 0.05 * gauss(rng);
    theta.row(k) += (0.1 * static_cast<double>(k)) * dir.transpose();
  }
  const PcaResult pca = pca_basis(theta);
  CHECK(std::abs(pca.basis.col(0).dot(dir)) >= 0.99);
  CHECK(pca.explained[0] > 10.0 * pca.explained[1]);
}

TEST_CASE("power-law fit recovers trivial exponents") {
  Eigen::VectorXd x(20), y0(20), y1(20);
  for (int i = 0; i < 20; ++i) {
    x[i] = std::pow(10.0, -2.0 + 0.2 * i);
    y1[i] = 3.0 * x[i];
    y0[i] = 5.0;
  }
  const PowerLawFit f1 = powerlaw_fit(x, y1, x.minCoeff(), x.maxCoeff());
  CHECK(f1.exponent == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f1.two_sigma < 1e-10);
  const PowerLawFit f0 = powerlaw_fit(x, y0, x.minCoeff(), x.maxCoeff());
  CHECK(f0.exponent == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(powerlaw_fit(x, -y1, x.minCoeff(), x.maxCoeff()), InvalidArgument);
  CHECK_THROWS_AS(powerlaw_fit(x, y1, x[0], x[1]), InvalidArgument);  // < 3 points
}

TEST_CASE("cosine similarity basics") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(4, 4);
  a = (a + a.transpose()).eval();
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0));
  CHECK(cosine_similarity(a, -a) == doctest::Approx(-1.0));
  Eigen::MatrixXd d1 = Eigen::Vector2d(1, 0).asDiagonal();
  Eigen::MatrixXd d2 = Eigen::Vector2d(0, 1).asDiagonal();
  CHECK(cosine_similarity(d1, d2) == 0.0);
  CHECK_THROWS_AS(cosine_similarity(Eigen::MatrixXd::Zero(2, 2), d1), InvalidArgument);
}
