#include "enl/ensemble.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "enl/rng.hpp"

namespace enl {

namespace {

void center_columns(Eigen::MatrixXd& m) {
  m.rowwise() -= m.colwise().mean();
}

// tr(A^T B) / (|A|_F |B|_F)
double frobenius_cosine(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double na = a.norm(), nb = b.norm();
  return a.cwiseProduct(b).sum() / (na * nb);
}

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& m, bool invert) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const double floor = 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  Eigen::VectorXd vals = es.eigenvalues();
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    double v = std::max(vals[i], 0.0);
    if (invert)
      vals[i] = v > floor ? 1.0 / std::sqrt(v) : 0.0;
    else
      vals[i] = std::sqrt(v);
  }
  return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

Eigen::MatrixXd sample_covariance(const QuadraticEnsemble& ensemble) {
  if (ensemble.num_examples < 2) throw InvalidArgument("sample covariance needs N >= 2");
  return ensemble.example_noise.transpose() * ensemble.example_noise /
         static_cast<double>(ensemble.num_examples - 1);
}

Eigen::MatrixXd minibatch_covariance(const QuadraticEnsemble& ensemble, long batch_size) {
  const double n = static_cast<double>(ensemble.num_examples);
  const double s = static_cast<double>(batch_size);
  return (1.0 / s) * (1.0 - s / n) * sample_covariance(ensemble);
}

QuadraticEnsemble build_commuting_ensemble(const Spectrum& spectrum, const Hyperparams& hp,
                                           std::uint64_t seed) {
  const long d = spectrum.size();
  const long n = hp.num_examples;
  if (n < 2) throw InvalidArgument("need at least two examples");
  if (hp.batch_size > n) throw InvalidArgument("batch size exceeds example count");

  QuadraticEnsemble e;
  e.dim = d;
  e.num_examples = n;
  e.diagonal_hessian = true;
  e.hessian_diag = spectrum.lambdas;

  // Target per-coordinate C0 variance so that C = (1/S)(1 - S/N) C0 has the
  // requested sigma^2_{dg,i} on the diagonal.
  const double s = static_cast<double>(hp.batch_size);
  const double c0_factor = s * static_cast<double>(n) / (static_cast<double>(n) - s);

  std::mt19937_64 rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  e.example_noise.resize(n, d);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < d; ++j) e.example_noise(i, j) = gauss(rng);
  center_columns(e.example_noise);

  // Exact whitening per coordinate: rescale each column so its realized
  // sample variance equals the target.
  for (long j = 0; j < d; ++j) {
    const double target = spectrum.noise_variances[j] * c0_factor;
    const double realized = e.example_noise.col(j).squaredNorm() / static_cast<double>(n - 1);
    e.example_noise.col(j) *= realized > 0.0 ? std::sqrt(target / realized) : 0.0;
  }
  return e;
}

QuadraticEnsemble build_noncommuting_ensemble(const Eigen::MatrixXd& hessian,
                                              const Eigen::MatrixXd& c0_target,
                                              long num_examples, std::uint64_t seed) {
  const long d = hessian.rows();
  if (hessian.cols() != d || c0_target.rows() != d || c0_target.cols() != d)
    throw InvalidArgument("hessian and c0_target must be square matrices of equal dimension");
  if (!hessian.isApprox(hessian.transpose(), 1e-10) ||
      !c0_target.isApprox(c0_target.transpose(), 1e-10))
    throw InvalidArgument("hessian and c0_target must be symmetric");
  if (num_examples < 2) throw InvalidArgument("need at least two examples");

  QuadraticEnsemble e;
  e.dim = d;
  e.num_examples = num_examples;
  e.diagonal_hessian = false;
  e.hessian = hessian;
  e.approximate_covariance = num_examples - 1 < d;

  std::mt19937_64 rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  e.example_noise.resize(num_examples, d);
  for (long i = 0; i < num_examples; ++i)
    for (long j = 0; j < d; ++j) e.example_noise(i, j) = gauss(rng);
  center_columns(e.example_noise);

  const Eigen::MatrixXd realized =
      e.example_noise.transpose() * e.example_noise / static_cast<double>(num_examples - 1);
  // eps_n -> L eps_n with L = c0_target^{1/2} realized^{-1/2}, exact on the
  // span of the realized covariance.
  const Eigen::MatrixXd transform =
      symmetric_sqrt(c0_target, false) * symmetric_sqrt(realized, true);
  e.example_noise = e.example_noise * transform.transpose();

  e.cos_similarity_c_h = frobenius_cosine(sample_covariance(e), hessian);
  return e;
}

namespace {
constexpr const char* kMagic = "enl-ensemble";
constexpr int kVersion = 1;

void write_row(std::ostream& out, const double* data, long count) {
  for (long j = 0; j < count; ++j) out << (j ? " " : "") << data[j];
  out << '\n';
}
}  // namespace

void save_ensemble(std::ostream& out, const QuadraticEnsemble& e) {
  out << std::setprecision(17);
  out << kMagic << ' ' << kVersion << '\n';
  out << e.dim << ' ' << e.num_examples << ' '
      << (e.diagonal_hessian ? "diagonal" : "dense") << '\n';
  if (e.diagonal_hessian) {
    write_row(out, e.hessian_diag.data(), e.dim);
  } else {
    for (long i = 0; i < e.dim; ++i) {
      Eigen::VectorXd row = e.hessian.row(i);
      write_row(out, row.data(), e.dim);
    }
  }
  for (long i = 0; i < e.num_examples; ++i) {
    Eigen::VectorXd row = e.example_noise.row(i);
    write_row(out, row.data(), e.dim);
  }
}

void save_ensemble(const std::string& path, const QuadraticEnsemble& e) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save_ensemble(out, e);
}

QuadraticEnsemble load_ensemble(std::istream& in) {
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kMagic || version != kVersion)
    throw std::runtime_error("not an ensemble artifact (bad header)");
  QuadraticEnsemble e;
  std::string kind;
  in >> e.dim >> e.num_examples >> kind;
  if (e.dim < 1 || e.num_examples < 1) throw std::runtime_error("corrupt ensemble header");
  e.diagonal_hessian = kind == "diagonal";
  if (!e.diagonal_hessian && kind != "dense")
    throw std::runtime_error("unknown storage kind: " + kind);
  if (e.diagonal_hessian) {
    e.hessian_diag.resize(e.dim);
    for (long j = 0; j < e.dim; ++j) in >> e.hessian_diag[j];
  } else {
    e.hessian.resize(e.dim, e.dim);
    for (long i = 0; i < e.dim; ++i)
      for (long j = 0; j < e.dim; ++j) in >> e.hessian(i, j);
  }
  e.example_noise.resize(e.num_examples, e.dim);
  for (long i = 0; i < e.num_examples; ++i)
    for (long j = 0; j < e.dim; ++j) in >> e.example_noise(i, j);
  if (!in) throw std::runtime_error("truncated ensemble artifact");
  return e;
}

QuadraticEnsemble load_ensemble(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_ensemble(in);
}

}  // namespace enl
