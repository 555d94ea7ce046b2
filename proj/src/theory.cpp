#include "enl/theory.hpp"

#include <cmath>

#include "enl/sampling.hpp"

namespace enl {

namespace {

Eigen::Matrix2d make_d(double lambda, const Hyperparams& hp) {
  Eigen::Matrix2d d;
  d << 1.0 + hp.beta - hp.eta * lambda, -hp.beta, 1.0, 0.0;
  return d;
}

// F from the exact variance relation; the prefactor pole at eta*lambda ->
// 2(1+beta) is the stability edge.
Eigen::Matrix2d make_f(double lambda, const Hyperparams& hp) {
  const double el = hp.eta * lambda;
  const double b = hp.beta;
  Eigen::Matrix2d f;
  f << (1.0 + b) / el, 2.0 * b * (el - 1.0 - b) / el, 2.0, 2.0 * (el - 2.0);
  f /= (1.0 - b) * (2.0 * (1.0 + b) - el);
  return f;
}

// phi(L) = (L^M - 1 + M(1-L)) / (1-L)^2, the scalar kernel behind the
// epoch cross-term.  Evaluated directly this cancels catastrophically when
// M|1-L| is small (the O(1) terms annihilate and (1-L)^-2 amplifies the
// rounding), so switch to the binomial tail
//   phi = sum_{k=2}^{M} C(M,k) (-1)^k (1-L)^(k-2),
// whose terms decay geometrically once M|1-L| < 1.
std::complex<double> phi_kernel(std::complex<double> l, long m) {
  const std::complex<double> x = 1.0 - l;
  if (std::abs(x) * static_cast<double>(m) <= 0.5) {
    std::complex<double> term =
        0.5 * static_cast<double>(m) * static_cast<double>(m - 1);
    std::complex<double> sum = term;
    for (long k = 2; k < m; ++k) {
      term *= -x * static_cast<double>(m - k) / static_cast<double>(k + 1);
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  return (std::pow(l, static_cast<double>(m)) - 1.0 +
          static_cast<double>(m) * x) /
         (x * x);
}

// d(phi)/dL, needed for the confluent (near critical damping) branch.
std::complex<double> phi_kernel_deriv(std::complex<double> l, long m) {
  const std::complex<double> x = 1.0 - l;
  if (std::abs(x) * static_cast<double>(m) <= 0.5) {
    // d/dL of the binomial tail: sum_{k=3}^{M} C(M,k)(-1)^(k+1)(k-2)x^(k-3).
    std::complex<double> cmk =
        static_cast<double>(m) * static_cast<double>(m - 1) *
        static_cast<double>(m - 2) / 6.0;  // C(M,3)
    std::complex<double> xpow = 1.0;
    double sign = 1.0;
    std::complex<double> sum = 0.0;
    for (long k = 3; k <= m; ++k) {
      const std::complex<double> term =
          sign * cmk * static_cast<double>(k - 2) * xpow;
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum) && k > 3) break;
      cmk *= static_cast<double>(m - k) / static_cast<double>(k + 1);
      xpow *= x;
      sign = -sign;
    }
    return sum;
  }
  const std::complex<double> lm1 = std::pow(l, static_cast<double>(m - 1));
  return static_cast<double>(m) * (lm1 - 1.0) / (x * x) +
         2.0 * (lm1 * l - 1.0 + static_cast<double>(m) * x) / (x * x * x);
}

double spectral_radius(double lambda, const Hyperparams& hp) {
  const double el = hp.eta * lambda;
  const double tr = 1.0 + hp.beta - el;
  const double disc = tr * tr - 4.0 * hp.beta;
  if (disc < 0.0) return std::sqrt(hp.beta);  // complex pair, |L|^2 = det = beta
  const double r = std::sqrt(disc);
  return std::max(std::abs(0.5 * (tr + r)), std::abs(0.5 * (tr - r)));
}

Stationary from_vector(const Eigen::Vector2d& v, double scale) {
  Stationary out;
  out.sigma_theta2 = scale * v[0];
  out.sigma_v2 = scale * v[1];
  out.tau = v[1] != 0.0 ? 2.0 * v[0] / v[1] : 0.0;
  return out;
}

}  // namespace

Eigen::Matrix2d matrix_power(const Eigen::Matrix2d& d, long exponent) {
  Eigen::Matrix2d result = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d base = d;
  long e = exponent;
  while (e > 0) {
    if (e & 1) result = result * base;
    base = base * base;
    e >>= 1;
  }
  return result;
}

Eigen::Matrix2d matrix_power_eigen(const Eigen::Matrix2d& d, long exponent,
                                   std::complex<double> lambda_plus,
                                   std::complex<double> lambda_minus) {
  using C = std::complex<double>;
  Eigen::Matrix2cd q, qinv;
  q << lambda_plus, lambda_minus, C(1.0), C(1.0);
  const C det = lambda_plus - lambda_minus;
  qinv << C(1.0), -lambda_minus, C(-1.0), lambda_plus;
  qinv /= det;
  Eigen::Matrix2cd lam = Eigen::Matrix2cd::Zero();
  lam(0, 0) = std::pow(lambda_plus, static_cast<double>(exponent));
  lam(1, 1) = std::pow(lambda_minus, static_cast<double>(exponent));
  (void)d;
  return (q * lam * qinv).real();
}

TransferAlgebra TransferAlgebra::make(double lambda, const Hyperparams& hp) {
  hp.check_stability(lambda);
  hp.require_epoch_structure();
  if (lambda <= 1e-300) throw InvalidArgument("lambda underflows (eta*lambda)^-2");
  const double el = hp.eta * lambda;
  const double b = hp.beta;
  const long m = hp.batches_per_epoch;

  TransferAlgebra t;
  t.D = make_d(lambda, hp);
  t.F = make_f(lambda, hp);

  const std::complex<double> s2(
      (1.0 - b) * (1.0 - b) - el * (2.0 * (1.0 + b) - el), 0.0);
  t.s = std::sqrt(s2);
  t.lambda_plus = 0.5 * (std::complex<double>(1.0 + b - el) + t.s);
  t.lambda_minus = 0.5 * (std::complex<double>(1.0 + b - el) - t.s);

  // E = D (D^M + M(I-D) - I)(I-D)^-2 / (M(M-1)) e1 e1^T.  Assemble the
  // matrix function g(D) with g(L) = L phi(L) / (M(M-1)) from the two
  // eigenvalues via Sylvester interpolation; phi_kernel handles the small
  // eta*lambda cancellation that the direct adjugate form cannot.
  using C = std::complex<double>;
  const double mm1 = static_cast<double>(m) * static_cast<double>(m - 1);
  const auto g = [&](C l) { return l * phi_kernel(l, m) / mm1; };
  const Eigen::Matrix2cd dc = t.D.cast<C>();
  const Eigen::Matrix2cd identity = Eigen::Matrix2cd::Identity();
  Eigen::Matrix2cd gd;
  if (std::abs(t.s) > 1e-5 * (1.0 + std::abs(t.lambda_plus))) {
    gd = g(t.lambda_minus) * identity +
         (g(t.lambda_plus) - g(t.lambda_minus)) / t.s *
             (dc - t.lambda_minus * identity);
  } else {
    // Confluent pair: first-order expansion about the midpoint.
    const C mid = 0.5 * (t.lambda_plus + t.lambda_minus);
    const C gp =
        (phi_kernel(mid, m) + mid * phi_kernel_deriv(mid, m)) / mm1;
    gd = g(mid) * identity + gp * (dc - mid * identity);
  }
  const Eigen::Vector2d e1(1.0, 0.0);
  t.E = gd.real() * e1 * e1.transpose();
  return t;
}

Stationary exact_stationary(double lambda, double sigma_dg2, const Hyperparams& hp) {
  if (sigma_dg2 < 0.0) throw InvalidArgument("sigma_dg2 must be non-negative");
  const TransferAlgebra t = TransferAlgebra::make(lambda, hp);
  const Eigen::Vector2d e1(1.0, 0.0);
  const Eigen::Vector2d v = t.F * (e1 - (t.E + t.E.transpose()) * e1);
  return from_vector(v, hp.eta * hp.eta * sigma_dg2);
}

Stationary exact_stationary_uncorrelated(double lambda, double sigma_dg2,
                                         const Hyperparams& hp) {
  if (sigma_dg2 < 0.0) throw InvalidArgument("sigma_dg2 must be non-negative");
  hp.check_stability(lambda);
  const Eigen::Vector2d e1(1.0, 0.0);
  const Eigen::Vector2d v = make_f(lambda, hp) * e1;
  Stationary out = from_vector(v, hp.eta * hp.eta * sigma_dg2);
  out.tau = (1.0 + hp.beta) / (hp.eta * lambda);  // exact when E = 0
  return out;
}

Stationary approx_large(double lambda, double sigma_dg2, const Hyperparams& hp) {
  hp.check_stability(lambda);
  const double el = hp.eta * lambda;
  const double pref =
      hp.eta * hp.eta * sigma_dg2 / ((1.0 - hp.beta) * (2.0 * (1.0 + hp.beta) - el));
  Stationary out;
  out.sigma_theta2 = pref * (1.0 + hp.beta) / el;
  out.sigma_v2 = pref * 2.0;
  out.tau = (1.0 + hp.beta) / el;
  return out;
}

Stationary approx_small(double lambda, double sigma_dg2, const Hyperparams& hp) {
  hp.check_stability(lambda);
  hp.require_epoch_structure();
  const double pref =
      hp.eta * hp.eta * sigma_dg2 / (2.0 * (1.0 - hp.beta) * (1.0 + hp.beta));
  Stationary out;
  out.sigma_theta2 = pref * tau_sgd(hp);
  out.sigma_v2 = pref * 2.0;
  out.tau = tau_sgd(hp);
  return out;
}

double lambda_cross(const Hyperparams& hp) {
  hp.require_epoch_structure();
  return 3.0 * (1.0 - hp.beta) / (hp.eta * static_cast<double>(hp.batches_per_epoch));
}

double tau_sgd(const Hyperparams& hp) {
  hp.require_epoch_structure();
  return static_cast<double>(hp.batches_per_epoch) / 3.0 * (1.0 + hp.beta) /
         (1.0 - hp.beta);
}

Regime regime(double lambda, const Hyperparams& hp) {
  const double lc = lambda_cross(hp);
  if (lambda < 0.5 * lc) return Regime::small;
  if (lambda > 2.0 * lc) return Regime::large;
  return Regime::near_crossover;
}

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::large: return "large";
    case Regime::near_crossover: return "near-crossover";
    case Regime::small: return "small";
  }
  return "?";
}

bool large_regime_strict(double lambda, const Hyperparams& hp, double threshold) {
  const double el = hp.eta * lambda;
  return static_cast<double>(hp.batches_per_epoch) * el * el > threshold;
}

LyapunovResult lyapunov_oracle(double lambda, double sigma_dg2, const Hyperparams& hp,
                               long horizon, NoiseKernel kernel) {
  hp.check_stability(lambda);
  hp.require_epoch_structure();
  const long m = hp.batches_per_epoch;
  const double rho = spectral_radius(lambda, hp);
  if (horizon <= 0) {
    // |rho|^{2(h - M)} <= ~1e-15
    const double decay = -std::log(rho);
    horizon = m + static_cast<long>(std::ceil(17.5 / decay)) + 64;
    horizon = std::max(horizon, 20 * m);
  }

  // Stacked (theta, v) one-step map and the noise injection direction.
  Eigen::Matrix2d x;
  x << 1.0 - hp.eta * lambda, hp.beta, -hp.eta * lambda, hp.beta;
  const Eigen::Vector2d u(1.0, 1.0);

  // <y y^T> = eta^2 s^2 sum_{p,q=0}^{h-1} w(|p-q|) (X^p u)(X^q u)^T.  The
  // diagonal band is accumulated as prefix sums P_t = sum_{p<=t} a_p a_p^T
  // with a_p = X^p u; the lag-g band equals P_{h-1-g} (X^g)^T plus its
  // transpose image.
  const long band = kernel == NoiseKernel::epoch_anticorrelated ? std::min(m, horizon - 1) : 0;
  std::vector<Eigen::Matrix2d> last(band + 1, Eigen::Matrix2d::Zero());
  Eigen::Matrix2d prefix = Eigen::Matrix2d::Zero();
  Eigen::Vector2d a = u;
  for (long p = 0; p < horizon; ++p) {
    prefix += a * a.transpose();
    const long from_end = horizon - 1 - p;
    if (from_end <= band) last[from_end] = prefix;
    a = x * a;
  }

  Eigen::Matrix2d total = last[0];
  Eigen::Matrix2d xg = Eigen::Matrix2d::Identity();
  for (long g = 1; g <= band; ++g) {
    xg = xg * x;
    const double w = autocorr_weight(g, m);
    if (w == 0.0) continue;
    const Eigen::Matrix2d cross = last[g] * xg.transpose();
    total += w * (cross + cross.transpose());
  }
  total *= hp.eta * hp.eta * sigma_dg2;

  LyapunovResult out;
  out.sigma_theta2 = total(0, 0);
  out.sigma_v2 = total(1, 1);
  out.tail_bound = std::pow(rho, 2.0 * static_cast<double>(horizon - band));
  out.tail_warning = out.tail_bound > 1e-10;
  return out;
}

LossFluctuation loss_fluctuation(const Spectrum& spectrum,
                                 const Eigen::VectorXd& theta_variances,
                                 const Hyperparams& hp) {
  if (spectrum.size() != theta_variances.size())
    throw InvalidArgument("spectrum and variance lengths differ");
  LossFluctuation out;
  for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
    out.total += 0.5 * spectrum.lambdas[i] * theta_variances[i];
    out.baseline += 0.5 * spectrum.lambdas[i] *
                    approx_large(spectrum.lambdas[i], spectrum.noise_variances[i], hp)
                        .sigma_theta2;
  }
  out.ratio_vs_isotropic = out.baseline != 0.0 ? out.total / out.baseline : 0.0;
  return out;
}

StationaryPrediction predict_spectrum(const Spectrum& spectrum, const Hyperparams& hp) {
  spectrum.check_stability(hp);
  StationaryPrediction pred;
  pred.lambda_cross = lambda_cross(hp);
  pred.tau_sgd = tau_sgd(hp);
  pred.rows.reserve(static_cast<std::size_t>(spectrum.size()));
  for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
    PredictionRow row;
    row.lambda = spectrum.lambdas[i];
    row.sigma_dg2 = spectrum.noise_variances[i];
    row.exact = exact_stationary(row.lambda, row.sigma_dg2, hp);
    row.large = approx_large(row.lambda, row.sigma_dg2, hp);
    row.small = approx_small(row.lambda, row.sigma_dg2, hp);
    row.tag = regime(row.lambda, hp);
    pred.rows.push_back(row);
  }
  return pred;
}

}  // namespace enl
