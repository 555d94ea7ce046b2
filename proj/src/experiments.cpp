#include "enl/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "enl/ensemble.hpp"
#include "enl/rng.hpp"
#include "enl/sampling.hpp"
#include "enl/sim.hpp"
#include "enl/stats.hpp"
#include "enl/theory.hpp"

namespace enl {
namespace {

const std::set<std::string> kKinds = {
    "theory-table",         "fig1-autocorr",     "fig2-variances",
    "appendix-f-pca",       "appendix-h-replacement", "appendix-i-sweep",
    "appendix-n-noncommuting", "oracle-check",   "loss-fluct"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// Simple deterministic work pool: results land at their own index.
void parallel_for(long n, const std::function<void(long)>& fn) {
  const long hw = static_cast<long>(std::max(1u, std::thread::hardware_concurrency()));
  const long workers = std::min(n, hw);
  if (workers <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (long w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (long i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// Named RNG stream ids; replica r of purpose p uses derive_stream_seed with
// stream p*1000 + r.
enum Stream : std::uint64_t {
  kEnsembleStream = 1,
  kScheduleStream = 2,
  kAuxStream = 3,
};

struct Runner {
  const ExperimentConfig& cfg;
  RunManifest man;
  std::filesystem::path dir;

  explicit Runner(const ExperimentConfig& c) : cfg(c), dir(c.out_dir) {
    std::filesystem::create_directories(dir);
    man.resolved = c.to_config();
  }

  std::uint64_t stream(std::uint64_t purpose, long replica, const std::string& label) {
    const std::uint64_t s = derive_stream_seed(cfg.seed, purpose * 1000 + static_cast<std::uint64_t>(replica));
    man.rng_streams.push_back(label + " " + std::to_string(s));
    return s;
  }

  void emit(const std::string& name, const std::string& body) {
    const std::filesystem::path path = dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    out << body;
    man.outputs.emplace_back(name, fnv1a(body));
  }
};

Spectrum make_spectrum(const ExperimentConfig& cfg) {
  return Spectrum::proportional(
      Spectrum::log_spaced(cfg.lambda_min, cfg.lambda_max,
                           static_cast<int>(cfg.num_directions)),
      cfg.noise_scale);
}

long resolve_burn_in(const ExperimentConfig& cfg, const Spectrum& sp) {
  return cfg.burn_in >= 0 ? cfg.burn_in : default_burn_in(cfg.hp, sp);
}

// ---------------------------------------------------------------------------
// shared pipelines

// One replica of a commuting-ensemble stationary run, simulated in direction
// blocks under the memory budget.  The schedule seed is fixed per replica, so
// the blocks see the same batch sequence and together form one trajectory.
std::vector<DirectionStationary> stationary_replica(Runner& r, const Spectrum& sp,
                                                    long steps, long burn_in,
                                                    long replica) {
  const Hyperparams& hp = r.cfg.hp;
  const long d = sp.lambdas.size();
  const std::uint64_t ens_seed = r.stream(kEnsembleStream, replica, "ensemble");
  const std::uint64_t sched_seed = r.stream(kScheduleStream, replica, "schedule");
  const QuadraticEnsemble full = build_commuting_ensemble(sp, hp, ens_seed);

  const long bytes_per_dir = steps * 8 * 4;  // theta, v, and shifted copies
  long block = std::max<long>(1, r.cfg.memory_budget_mb * 1024 * 1024 / std::max<long>(1, bytes_per_dir));
  block = std::min(block, d);
  const long max_lag_tau = std::min(5 * hp.batches_per_epoch, steps / 10);

  std::vector<DirectionStationary> out(static_cast<std::size_t>(d));
  std::vector<long> starts;
  for (long s = 0; s < d; s += block) starts.push_back(s);
  parallel_for(static_cast<long>(starts.size()), [&](long bi) {
    const long lo = starts[static_cast<std::size_t>(bi)];
    const long w = std::min(block, d - lo);
    QuadraticEnsemble sub;
    sub.dim = w;
    sub.num_examples = full.num_examples;
    sub.diagonal_hessian = true;
    sub.hessian_diag = full.hessian_diag.segment(lo, w);
    sub.example_noise = full.example_noise.middleCols(lo, w);
    BatchSchedule sched(SampleMode::epoch_without_replacement, hp.num_examples,
                        hp.batch_size, sched_seed);
    Trajectory traj = run_sgd(sub, hp, steps, sched, Eigen::VectorXd::Zero(w),
                              Eigen::VectorXd::Zero(w), burn_in, false);
    const auto est = estimate_stationary(subtract_mean_velocity(traj), max_lag_tau);
    for (long j = 0; j < w; ++j) out[static_cast<std::size_t>(lo + j)] = est[static_cast<std::size_t>(j)];
  });
  return out;
}

// Replica-averaged stationary estimates; standard errors combine the
// batched-means errors across replicas.
std::vector<DirectionStationary> stationary_estimates(Runner& r, const Spectrum& sp,
                                                      long steps, long burn_in) {
  const long reps = r.cfg.replicas;
  std::vector<std::vector<DirectionStationary>> all(static_cast<std::size_t>(reps));
  for (long k = 0; k < reps; ++k) all[static_cast<std::size_t>(k)] = stationary_replica(r, sp, steps, burn_in, k);
  if (reps == 1) return all[0];
  const long d = sp.lambdas.size();
  std::vector<DirectionStationary> out(static_cast<std::size_t>(d));
  for (long j = 0; j < d; ++j) {
    DirectionStationary& o = out[static_cast<std::size_t>(j)];
    double se_t2 = 0.0, se_v2 = 0.0;
    for (long k = 0; k < reps; ++k) {
      const DirectionStationary& e = all[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
      o.sigma_theta2 += e.sigma_theta2;
      o.sigma_v2 += e.sigma_v2;
      o.tau_sum += e.tau_sum;
      se_t2 += e.se_theta2 * e.se_theta2;
      se_v2 += e.se_v2 * e.se_v2;
      o.tau_sum_ill_conditioned = o.tau_sum_ill_conditioned || e.tau_sum_ill_conditioned;
    }
    const double n = static_cast<double>(reps);
    o.sigma_theta2 /= n;
    o.sigma_v2 /= n;
    o.tau_sum /= n;
    o.tau_ratio = o.sigma_v2 > 0.0 ? 2.0 * o.sigma_theta2 / o.sigma_v2 : 0.0;
    o.se_theta2 = std::sqrt(se_t2) / n;
    o.se_v2 = std::sqrt(se_v2) / n;
  }
  return out;
}

// Probe-mode (eta = 0) noise autocorrelation under both sampling modes,
// averaged over replicas.
struct AutocorrPair {
  AutocorrEstimate epoch;
  AutocorrEstimate replacement;
  long max_lag = 0;
};

AutocorrPair autocorr_pipeline(Runner& r, const Spectrum& sp, long steps) {
  const Hyperparams& hp = r.cfg.hp;
  const long m = sp.lambdas.size();
  const long max_lag = 2 * hp.batches_per_epoch;
  AutocorrPair out;
  out.max_lag = max_lag;
  const long reps = r.cfg.replicas;
  for (long k = 0; k < reps; ++k) {
    const QuadraticEnsemble e =
        build_commuting_ensemble(sp, hp, r.stream(kEnsembleStream, k, "ensemble"));
    const std::uint64_t sched_seed = r.stream(kScheduleStream, k, "schedule");
    Hyperparams frozen = hp;
    frozen.eta = 0.0;
    AutocorrEstimate est[2];
    const SampleMode modes[2] = {SampleMode::epoch_without_replacement,
                                 SampleMode::iid_with_replacement};
    for (int s = 0; s < 2; ++s) {
      BatchSchedule sched(modes[s], hp.num_examples, hp.batch_size, sched_seed + static_cast<std::uint64_t>(s));
      const Trajectory traj = run_sgd(e, frozen, steps, sched, Eigen::VectorXd::Zero(m),
                                      Eigen::VectorXd::Zero(m), 0, true);
      est[s] = estimate_autocorr(traj.noise, max_lag);
    }
    if (k == 0) {
      out.epoch = est[0];
      out.replacement = est[1];
    } else {
      out.epoch.values += est[0].values;
      out.replacement.values += est[1].values;
    }
  }
  const double n = static_cast<double>(reps);
  out.epoch.values /= n;
  out.replacement.values /= n;
  out.epoch.band /= std::sqrt(n);
  out.replacement.band /= std::sqrt(n);
  return out;
}

// ---------------------------------------------------------------------------
// experiment kinds

void run_theory_table(Runner& r) {
  const Spectrum sp = make_spectrum(r.cfg);
  sp.check_stability(r.cfg.hp);
  const StationaryPrediction pred = predict_spectrum(sp, r.cfg.hp);
  std::ostringstream csv;
  csv << "lambda,sigma_dg2,eta,beta,M,sigma_theta2_exact,sigma_v2_exact,tau_exact,"
         "sigma_theta2_large,sigma_theta2_small,regime\n";
  for (const PredictionRow& row : pred.rows)
    csv << fmt(row.lambda) << ',' << fmt(row.sigma_dg2) << ',' << fmt(r.cfg.hp.eta) << ','
        << fmt(r.cfg.hp.beta) << ',' << r.cfg.hp.batches_per_epoch << ','
        << fmt(row.exact.sigma_theta2) << ',' << fmt(row.exact.sigma_v2) << ','
        << fmt(row.exact.tau) << ',' << fmt(row.large.sigma_theta2) << ','
        << fmt(row.small.sigma_theta2) << ',' << regime_name(row.tag) << '\n';
  r.emit("theory_table.csv", csv.str());
}

void run_autocorr_kind(Runner& r, const std::string& file) {
  r.cfg.hp.require_epoch_structure();
  const Spectrum sp = make_spectrum(r.cfg);
  const long steps = r.cfg.steps > 0 ? r.cfg.steps : 20 * r.cfg.hp.batches_per_epoch;
  const AutocorrPair pair = autocorr_pipeline(r, sp, steps);
  std::ostringstream csv;
  csv << "lag,value,band,theory,replacement_value,replacement_band\n";
  for (long h = 1; h <= pair.max_lag; ++h)
    csv << h << ',' << fmt(pair.epoch.values[h - 1]) << ',' << fmt(pair.epoch.band) << ','
        << fmt(autocorr_weight(h, r.cfg.hp.batches_per_epoch)) << ','
        << fmt(pair.replacement.values[h - 1]) << ',' << fmt(pair.replacement.band) << '\n';
  r.emit(file, csv.str());
}

void run_fig2(Runner& r) {
  const Hyperparams& hp = r.cfg.hp;
  hp.require_epoch_structure();
  const Spectrum sp = make_spectrum(r.cfg);
  sp.check_stability(hp);
  const long default_steps = static_cast<long>(std::ceil(300.0 * tau_sgd(hp)));
  const long steps = r.cfg.steps > 0 ? r.cfg.steps : default_steps;
  const long burn = resolve_burn_in(r.cfg, sp);

  const auto est = stationary_estimates(r, sp, steps, burn);
  const StationaryPrediction pred = predict_spectrum(sp, hp);

  std::ostringstream csv;
  csv << "direction,lambda,sigma_dg2,sigma_theta2,se_theta2,sigma_v2,se_v2,tau_ratio,"
         "tau_sum,theory_sigma_theta2,theory_sigma_v2,theory_tau,regime\n";
  Eigen::VectorXd lam(sp.lambdas.size()), th2(sp.lambdas.size()), v2(sp.lambdas.size());
  for (long j = 0; j < sp.lambdas.size(); ++j) {
    const auto& e = est[static_cast<std::size_t>(j)];
    const auto& p = pred.rows[static_cast<std::size_t>(j)];
    lam[j] = p.lambda;
    th2[j] = e.sigma_theta2;
    v2[j] = e.sigma_v2;
    csv << j << ',' << fmt(p.lambda) << ',' << fmt(p.sigma_dg2) << ','
        << fmt(e.sigma_theta2) << ',' << fmt(e.se_theta2) << ',' << fmt(e.sigma_v2) << ','
        << fmt(e.se_v2) << ',' << fmt(e.tau_ratio) << ',' << fmt(e.tau_sum) << ','
        << fmt(p.exact.sigma_theta2) << ',' << fmt(p.exact.sigma_v2) << ','
        << fmt(p.exact.tau) << ',' << regime_name(p.tag) << '\n';
  }
  r.emit("fig2_variances.csv", csv.str());

  // Power-law fits over the two regimes (the fit regions keep a factor-3
  // margin away from the crossover).
  const double lc = pred.lambda_cross;
  std::ostringstream fits;
  fits << "series,region,x_lo,x_hi,exponent,two_sigma,points\n";
  const struct {
    const char* series;
    const char* region;
    const Eigen::VectorXd* y;
    double lo, hi;
  } jobs[] = {
      {"sigma_theta2", "small", &th2, lam.minCoeff(), lc / 3.0},
      {"sigma_v2", "small", &v2, lam.minCoeff(), lc / 3.0},
      {"sigma_theta2", "large", &th2, 3.0 * lc, lam.maxCoeff()},
      {"sigma_v2", "large", &v2, 3.0 * lc, lam.maxCoeff()},
  };
  for (const auto& job : jobs) {
    const PowerLawFit fit = powerlaw_fit(lam, *job.y, job.lo, job.hi);
    fits << job.series << ',' << job.region << ',' << fmt(job.lo) << ',' << fmt(job.hi)
         << ',' << fmt(fit.exponent) << ',' << fmt(fit.two_sigma) << ',' << fit.points
         << '\n';
  }
  r.emit("fig2_fits.csv", fits.str());
}

void run_appendix_f(Runner& r) {
  const Hyperparams& hp = r.cfg.hp;
  hp.require_epoch_structure();
  // isotropic spectrum: every direction gets lambda_max
  const Spectrum sp = Spectrum::proportional(
      Eigen::VectorXd::Constant(r.cfg.num_directions, r.cfg.lambda_max), r.cfg.noise_scale);
  sp.check_stability(hp);
  const long steps = r.cfg.steps > 0 ? r.cfg.steps : 1200;
  const long burn = resolve_burn_in(r.cfg, sp);
  const long d = r.cfg.num_directions;

  const QuadraticEnsemble e =
      build_commuting_ensemble(sp, hp, r.stream(kEnsembleStream, 0, "ensemble"));
  BatchSchedule sched(SampleMode::epoch_without_replacement, hp.num_examples, hp.batch_size,
                      r.stream(kScheduleStream, 0, "schedule"));
  const Trajectory traj = run_sgd(e, hp, steps, sched, Eigen::VectorXd::Zero(d),
                                  Eigen::VectorXd::Zero(d), burn, false);

  // original (true) basis: per-coordinate variances
  Eigen::VectorXd orig_var(d);
  for (long j = 0; j < d; ++j) {
    const auto col = traj.theta.col(j);
    const double mu = col.mean();
    orig_var[j] = (col.array() - mu).square().sum() / static_cast<double>(steps - 1);
  }
  const PcaResult pca = pca_basis(traj.theta);

  // same data with an injected drift along a random direction; the drift is
  // sized to dominate the fluctuations over the window
  std::mt19937_64 aux = make_rng(r.stream(kAuxStream, 0, "drift-direction"));
  std::normal_distribution<double> gauss;
  Eigen::VectorXd drift_dir(d);
  for (long j = 0; j < d; ++j) drift_dir[j] = gauss(aux);
  drift_dir.normalize();
  // total displacement of 20 sigma over the window: the drift ramp must beat
  // the largest finite-sample PCA eigenvalue, not just the typical variance
  const double drift_rate =
      20.0 * std::sqrt(orig_var.maxCoeff()) / static_cast<double>(steps);
  Eigen::MatrixXd drifted = traj.theta;
  for (long k = 0; k < steps; ++k)
    drifted.row(k) += (drift_rate * static_cast<double>(k)) * drift_dir.transpose();
  const PcaResult pca_drift = pca_basis(drifted);

  std::ostringstream csv;
  csv << "rank,explained_variance,original_variance,cos_to_drift\n";
  Eigen::VectorXd sorted_orig = orig_var;
  std::sort(sorted_orig.data(), sorted_orig.data() + d, std::greater<double>());
  for (long j = 0; j < d; ++j)
    csv << j << ',' << fmt(pca.explained[j]) << ',' << fmt(sorted_orig[j]) << ','
        << fmt(std::abs(pca_drift.basis.col(j).dot(drift_dir))) << '\n';
  r.emit("appendix_f_pca.csv", csv.str());

  std::ostringstream sum;
  sum << "original_ratio,pca_ratio,first_pc_drift_cos\n";
  sum << fmt(orig_var.maxCoeff() / orig_var.minCoeff()) << ','
      << fmt(pca.explained[0] / pca.explained[d - 1]) << ','
      << fmt(std::abs(pca_drift.basis.col(0).dot(drift_dir))) << '\n';
  r.emit("appendix_f_summary.csv", sum.str());
}

void run_appendix_i(Runner& r) {
  const Hyperparams& hp = r.cfg.hp;
  hp.require_epoch_structure();
  const Spectrum sp = make_spectrum(r.cfg);
  sp.check_stability(hp);
  const long steps = r.cfg.steps > 0 ? r.cfg.steps
                                     : static_cast<long>(std::ceil(300.0 * tau_sgd(hp)));
  const long burn = resolve_burn_in(r.cfg, sp);
  const auto est = stationary_estimates(r, sp, steps, burn);
  const StationaryPrediction pred = predict_spectrum(sp, hp);

  std::ostringstream csv;
  csv << "lambda,tau_ratio,tau_sum,theory_tau\n";
  for (long j = 0; j < sp.lambdas.size(); ++j)
    csv << fmt(sp.lambdas[j]) << ',' << fmt(est[static_cast<std::size_t>(j)].tau_ratio) << ','
        << fmt(est[static_cast<std::size_t>(j)].tau_sum) << ','
        << fmt(pred.rows[static_cast<std::size_t>(j)].exact.tau) << '\n';
  r.emit("appendix_i.csv", csv.str());

  // tau_SGD: average of the correlation times deep inside the plateau.  The
  // exact tau(lambda) still sags a few percent at lambda_cross/3 (it only
  // reaches its limit as lambda -> 0), so use lambda <= lambda_cross/50 when
  // the spectrum extends that low and fall back to the whole sub-crossover
  // region otherwise.
  const double lc = pred.lambda_cross;
  double plateau_max = lc / 50.0;
  if (sp.lambdas.minCoeff() > plateau_max) plateau_max = lc / 3.0;
  double plateau = 0.0;
  long count = 0;
  for (long j = 0; j < sp.lambdas.size(); ++j)
    if (sp.lambdas[j] <= plateau_max) {
      plateau += est[static_cast<std::size_t>(j)].tau_ratio;
      ++count;
    }
  if (count == 0) throw InvalidArgument("appendix-i-sweep: no eigenvalues below lambda_cross");
  plateau /= static_cast<double>(count);

  // lambda_cross: intersect a log-log line fitted through the asymptotic
  // tail with the plateau.  tau approaches (1+beta)/(eta*lambda) slowly
  // (the deficit decays like lambda_cross/lambda), so the fit starts at
  // 8*lambda_cross; closer in, the crossover dip drags the intercept down.
  std::vector<double> fit_l, fit_t;
  for (long j = 0; j < sp.lambdas.size(); ++j)
    if (sp.lambdas[j] >= 8.0 * lc) {
      fit_l.push_back(sp.lambdas[j]);
      fit_t.push_back(est[static_cast<std::size_t>(j)].tau_ratio);
    }
  if (static_cast<long>(fit_l.size()) < 4) {  // spectrum stops short: use the top 20
    fit_l.clear();
    fit_t.clear();
    const long n_fit = std::min<long>(20, sp.lambdas.size());
    for (long j = 0; j < n_fit; ++j) {  // spectrum is descending: head = largest
      fit_l.push_back(sp.lambdas[j]);
      fit_t.push_back(est[static_cast<std::size_t>(j)].tau_ratio);
    }
  }
  Eigen::Map<Eigen::VectorXd> lx(fit_l.data(), static_cast<long>(fit_l.size()));
  Eigen::Map<Eigen::VectorXd> tx(fit_t.data(), static_cast<long>(fit_t.size()));
  const PowerLawFit line = powerlaw_fit(lx, tx, lx.minCoeff(), lx.maxCoeff());
  // solve exponent*log(lambda) + intercept = log(plateau)
  const double lambda_cross_emp =
      std::exp((std::log(plateau) - line.log_intercept) / line.exponent);

  std::ostringstream sum;
  sum << "beta,M,tau_sgd_emp,tau_sgd_theory,lambda_cross_emp,lambda_cross_theory,"
         "fit_exponent,fit_two_sigma\n";
  sum << fmt(hp.beta) << ',' << hp.batches_per_epoch << ',' << fmt(plateau) << ','
      << fmt(pred.tau_sgd) << ',' << fmt(lambda_cross_emp) << ',' << fmt(lc) << ','
      << fmt(line.exponent) << ',' << fmt(line.two_sigma) << '\n';
  r.emit("appendix_i_summary.csv", sum.str());
}

// Dense-ensemble stationary run in the (diagonal) Hessian eigenbasis.
std::vector<DirectionStationary> dense_stationary(Runner& r, const QuadraticEnsemble& e,
                                                  long steps, long burn, long replica) {
  const Hyperparams& hp = r.cfg.hp;
  BatchSchedule sched(SampleMode::epoch_without_replacement, hp.num_examples, hp.batch_size,
                      r.stream(kScheduleStream, replica, "schedule"));
  Trajectory traj = run_sgd(e, hp, steps, sched, Eigen::VectorXd::Zero(e.dim),
                            Eigen::VectorXd::Zero(e.dim), burn, false);
  const long max_lag_tau = std::min(5 * hp.batches_per_epoch, steps / 10);
  return estimate_stationary(subtract_mean_velocity(traj), max_lag_tau);
}

void run_appendix_n(Runner& r) {
  const Hyperparams& hp = r.cfg.hp;
  hp.require_epoch_structure();
  const Spectrum sp = make_spectrum(r.cfg);
  sp.check_stability(hp);
  const long d = r.cfg.num_directions;
  const long n = hp.num_examples;
  const long steps = r.cfg.steps > 0 ? r.cfg.steps
                                     : static_cast<long>(std::ceil(200.0 * tau_sgd(hp)));
  const long burn = resolve_burn_in(r.cfg, sp);

  const Eigen::MatrixXd hess = Eigen::MatrixXd(sp.lambdas.asDiagonal());
  const double c0f = static_cast<double>(hp.batch_size) * static_cast<double>(n) /
                     (static_cast<double>(n) - static_cast<double>(hp.batch_size));
  const Eigen::MatrixXd c0_aligned = Eigen::MatrixXd((c0f * sp.noise_variances).asDiagonal());

  // Similarities are measured on the traceless parts: every PSD matrix has a
  // large positive plain cosine against a PSD Hessian through the shared
  // identity component, so "similarity ~ 0" for a random C0 is only
  // meaningful after removing it.
  const auto centered_cos = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const long dd = a.rows();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(dd, dd);
    return cosine_similarity(a - (a.trace() / static_cast<double>(dd)) * id,
                             b - (b.trace() / static_cast<double>(dd)) * id);
  };

  // rank-d/2 random perturbation P = (1/d) X X^T, scaled by bisection on
  // alpha so that cos(C0_aligned + alpha P, H) hits the requested similarity
  std::mt19937_64 aux = make_rng(r.stream(kAuxStream, 0, "perturbation"));
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd x(d, d);
  for (long i = 0; i < d; ++i)
    for (long j = 0; j < d; ++j) x(i, j) = gauss(aux);
  const Eigen::MatrixXd pert = x * x.transpose() / static_cast<double>(d) *
                               (c0_aligned.trace() / static_cast<double>(d));

  const double target_cos = 0.96;
  double alo = 0.0, ahi = 1.0;
  while (centered_cos(c0_aligned + ahi * pert, hess) > target_cos) ahi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double amid = 0.5 * (alo + ahi);
    (centered_cos(c0_aligned + amid * pert, hess) > target_cos ? alo : ahi) = amid;
  }
  const double alpha = 0.5 * (alo + ahi);
  const Eigen::MatrixXd c0_mixed = c0_aligned + alpha * pert;

  // fully random control: Wishart C0 with matching trace
  Eigen::MatrixXd y(d, d);
  for (long i = 0; i < d; ++i)
    for (long j = 0; j < d; ++j) y(i, j) = gauss(aux);
  Eigen::MatrixXd c0_rand = y * y.transpose() / static_cast<double>(d);
  c0_rand *= c0_aligned.trace() / c0_rand.trace();

  const QuadraticEnsemble e_mixed = build_noncommuting_ensemble(
      hess, c0_mixed, n, r.stream(kEnsembleStream, 0, "ensemble-mixed"));
  const QuadraticEnsemble e_rand = build_noncommuting_ensemble(
      hess, c0_rand, n, r.stream(kEnsembleStream, 1, "ensemble-random"));

  const auto est_mixed = dense_stationary(r, e_mixed, steps, burn, 0);
  const auto est_rand = dense_stationary(r, e_rand, steps, burn, 1);
  const StationaryPrediction pred = predict_spectrum(sp, hp);

  std::ostringstream csv;
  csv << "lambda,tau_ratio,sigma_theta2,rand_tau_ratio,rand_sigma_theta2,"
         "rand_tau_sum,theory_tau\n";
  for (long j = 0; j < d; ++j)
    csv << fmt(sp.lambdas[j]) << ',' << fmt(est_mixed[static_cast<std::size_t>(j)].tau_ratio)
        << ',' << fmt(est_mixed[static_cast<std::size_t>(j)].sigma_theta2) << ','
        << fmt(est_rand[static_cast<std::size_t>(j)].tau_ratio) << ','
        << fmt(est_rand[static_cast<std::size_t>(j)].sigma_theta2) << ','
        << fmt(est_rand[static_cast<std::size_t>(j)].tau_sum) << ','
        << fmt(pred.rows[static_cast<std::size_t>(j)].exact.tau) << '\n';
  r.emit("appendix_n.csv", csv.str());

  std::ostringstream sum;
  sum << "cos_mixed,cos_random,alpha,approximate_covariance\n";
  sum << fmt(centered_cos(c0_mixed, hess)) << ',' << fmt(centered_cos(c0_rand, hess)) << ','
      << fmt(alpha) << ',' << (e_mixed.approximate_covariance ? 1 : 0) << '\n';
  r.emit("appendix_n_summary.csv", sum.str());
}

void run_oracle_check(Runner& r) {
  const double betas[] = {0.0, 0.5, 0.9, 0.99};
  const long ms[] = {5, 50, 500};
  std::ostringstream csv;
  csv << "beta,eta_lambda,M,sigma_theta2_exact,sigma_theta2_oracle,rel_err_theta,"
         "sigma_v2_exact,sigma_v2_oracle,rel_err_v\n";
  double max_err = 0.0;
  for (const double beta : betas)
    for (const long m : ms) {
      const double grid[] = {1e-4, 0.01, 0.1, 0.5, 1.0, 0.9 * 2.0 * (1.0 + beta)};
      for (const double el : grid) {
        const Hyperparams hp = Hyperparams::from_batches(r.cfg.hp.eta, beta, m);
        const double lambda = el / hp.eta;
        const Stationary ex = exact_stationary(lambda, 1.0, hp);
        const LyapunovResult or_ = lyapunov_oracle(lambda, 1.0, hp);
        const double et = std::abs(ex.sigma_theta2 - or_.sigma_theta2) / ex.sigma_theta2;
        const double ev = std::abs(ex.sigma_v2 - or_.sigma_v2) / ex.sigma_v2;
        max_err = std::max({max_err, et, ev});
        csv << fmt(beta) << ',' << fmt(el) << ',' << m << ',' << fmt(ex.sigma_theta2)
            << ',' << fmt(or_.sigma_theta2) << ',' << fmt(et) << ',' << fmt(ex.sigma_v2)
            << ',' << fmt(or_.sigma_v2) << ',' << fmt(ev) << '\n';
      }
    }
  r.emit("oracle_check.csv", csv.str());
  std::ostringstream sum;
  sum << "max_rel_err\n" << fmt(max_err) << '\n';
  r.emit("oracle_check_summary.csv", sum.str());
}

void run_loss_fluct(Runner& r) {
  const Hyperparams& hp = r.cfg.hp;
  const Spectrum sp = make_spectrum(r.cfg);
  sp.check_stability(hp);
  const StationaryPrediction pred = predict_spectrum(sp, hp);
  Eigen::VectorXd anti(sp.lambdas.size());
  long below = 0;
  for (long j = 0; j < sp.lambdas.size(); ++j) {
    anti[j] = pred.rows[static_cast<std::size_t>(j)].exact.sigma_theta2;
    if (sp.lambdas[j] < pred.lambda_cross) ++below;
  }
  const LossFluctuation lf = loss_fluctuation(sp, anti, hp);

  std::ostringstream csv;
  csv << "lambda,sigma_dg2,sigma_theta2_anti,sigma_theta2_flat,contribution_anti,"
         "contribution_flat\n";
  for (long j = 0; j < sp.lambdas.size(); ++j) {
    const auto& row = pred.rows[static_cast<std::size_t>(j)];
    csv << fmt(row.lambda) << ',' << fmt(row.sigma_dg2) << ',' << fmt(anti[j]) << ','
        << fmt(row.large.sigma_theta2) << ',' << fmt(0.5 * row.lambda * anti[j]) << ','
        << fmt(0.5 * row.lambda * row.large.sigma_theta2) << '\n';
  }
  r.emit("loss_fluct.csv", csv.str());

  std::ostringstream sum;
  sum << "total_anti,total_flat,ratio,fraction_below_cross,lambda_cross\n";
  sum << fmt(lf.total) << ',' << fmt(lf.baseline) << ',' << fmt(lf.ratio_vs_isotropic)
      << ',' << fmt(static_cast<double>(below) / static_cast<double>(sp.lambdas.size()))
      << ',' << fmt(pred.lambda_cross) << '\n';
  r.emit("loss_fluct_summary.csv", sum.str());
}

}  // namespace

// ---------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_config(const Config& cfg) {
  ExperimentConfig out;
  out.kind = cfg.get_string("kind");
  if (!kKinds.count(out.kind)) throw InvalidArgument("unknown experiment kind: " + out.kind);
  out.hp = Hyperparams::make(cfg.get_double("eta"), cfg.get_double("beta"),
                             cfg.get_long("batch_size"), cfg.get_long("num_examples"));
  out.num_directions = cfg.get_long("directions");
  out.lambda_min = cfg.get_double("lambda_min");
  out.lambda_max = cfg.get_double("lambda_max");
  out.noise_scale = cfg.get_double("noise_scale", 1.0);
  out.steps = cfg.get_long("steps", 0);
  out.burn_in = cfg.get_long("burn_in", -1);
  out.replicas = cfg.get_long("replicas", 1);
  out.seed = static_cast<std::uint64_t>(cfg.get_long("seed", 0));
  out.out_dir = cfg.get_string("out_dir", ".");
  out.memory_budget_mb = cfg.get_long("memory_budget_mb", 512);
  out.validate();
  return out;
}

Config ExperimentConfig::to_config() const {
  Config cfg;
  cfg.set("kind", kind);
  cfg.set("eta", fmt(hp.eta));
  cfg.set("beta", fmt(hp.beta));
  cfg.set("batch_size", std::to_string(hp.batch_size));
  cfg.set("num_examples", std::to_string(hp.num_examples));
  cfg.set("directions", std::to_string(num_directions));
  cfg.set("lambda_min", fmt(lambda_min));
  cfg.set("lambda_max", fmt(lambda_max));
  cfg.set("noise_scale", fmt(noise_scale));
  cfg.set("steps", std::to_string(steps));
  cfg.set("burn_in", std::to_string(burn_in));
  cfg.set("replicas", std::to_string(replicas));
  cfg.set("seed", std::to_string(seed));
  cfg.set("out_dir", out_dir);
  cfg.set("memory_budget_mb", std::to_string(memory_budget_mb));
  return cfg;
}

void ExperimentConfig::validate() const {
  if (!kKinds.count(kind)) throw InvalidArgument("unknown experiment kind: " + kind);
  if (num_directions < 1) throw InvalidArgument("directions must be >= 1");
  if (!(lambda_min > 0.0 && lambda_max >= lambda_min))
    throw InvalidArgument("need 0 < lambda_min <= lambda_max");
  if (noise_scale < 0.0) throw InvalidArgument("noise_scale must be non-negative");
  if (steps < 0) throw InvalidArgument("steps must be non-negative");
  if (replicas < 1) throw InvalidArgument("replicas must be >= 1");
  if (memory_budget_mb < 1) throw InvalidArgument("memory_budget_mb must be >= 1");
  if (out_dir.empty()) throw InvalidArgument("out_dir must be non-empty");
}

std::string RunManifest::serialize() const {
  std::ostringstream out;
  out << "enl-manifest 1\n";
  out << "wall_seconds=" << fmt(wall_seconds) << "\n";
  for (const auto& s : rng_streams) out << "stream " << s << "\n";
  for (const auto& [file, hash] : outputs) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    out << "output " << file << " " << buf << "\n";
  }
  out << "[config]\n" << resolved.serialize();
  return out.str();
}

void RunManifest::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write manifest: " + path);
  out << serialize();
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return fnv1a(buf.str());
}

RunManifest run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  Runner runner(cfg);
  if (cfg.kind == "theory-table")
    run_theory_table(runner);
  else if (cfg.kind == "fig1-autocorr")
    run_autocorr_kind(runner, "fig1_autocorr.csv");
  else if (cfg.kind == "appendix-h-replacement")
    run_autocorr_kind(runner, "appendix_h.csv");
  else if (cfg.kind == "fig2-variances")
    run_fig2(runner);
  else if (cfg.kind == "appendix-f-pca")
    run_appendix_f(runner);
  else if (cfg.kind == "appendix-i-sweep")
    run_appendix_i(runner);
  else if (cfg.kind == "appendix-n-noncommuting")
    run_appendix_n(runner);
  else if (cfg.kind == "oracle-check")
    run_oracle_check(runner);
  else if (cfg.kind == "loss-fluct")
    run_loss_fluct(runner);
  const auto t1 = std::chrono::steady_clock::now();
  runner.man.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  runner.man.write((runner.dir / "manifest.txt").string());
  return runner.man;
}

}  // namespace enl
