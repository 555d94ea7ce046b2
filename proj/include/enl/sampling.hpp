#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <boost/rational.hpp>

#include "enl/hyperparams.hpp"

namespace enl {

enum class SampleMode {
  epoch_without_replacement,
  iid_with_replacement,
};

/// Stateful batch-index generator.  In epoch mode every index in {0..N-1}
/// appears exactly once per epoch (a uniform permutation, reshuffled at every
/// epoch boundary); when S does not divide N the last batch of each epoch is
/// smaller.  In iid mode each batch is S independent uniform draws, duplicates
/// allowed.  Single-consumer; independent schedules may run on independent
/// threads.
class BatchSchedule {
 public:
  BatchSchedule(SampleMode mode, long num_examples, long batch_size, std::uint64_t seed);

  const std::vector<long>& next_batch();

  SampleMode mode() const { return mode_; }
  long num_examples() const { return num_examples_; }
  long batch_size() const { return batch_size_; }
  std::uint64_t seed() const { return seed_; }

 private:
  SampleMode mode_;
  long num_examples_;
  long batch_size_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::vector<long> permutation_;
  long cursor_ = 0;
  std::vector<long> batch_;
};

/// Lag-h weight of the epoch-noise autocorrelation:
/// delta_{h,0} - 1_{{1..M}}(|h|) (M-|h|)/(M(M-1)).
double autocorr_weight(long h, long batches_per_epoch);

using Rational = boost::rational<long long>;

/// E[s_k^n s_{k+h}^n'] under the stationary epoch-shuffled schedule, computed
/// by enumerating all equally likely epoch permutations (two independent
/// epochs when the lag spans an epoch boundary).  Exact; requires S | N and
/// N <= 12.
Rational pair_probability_oracle(int num_examples, int batch_size, int lag, bool same_example);

/// Same expectation conditioned on both batches lying in the same epoch
/// (0 <= lag < M), by enumeration of one epoch permutation.
Rational pair_probability_same_epoch(int num_examples, int batch_size, int lag,
                                     bool same_example);

/// Same expectation conditioned on the batches lying in different epochs;
/// the two indicators are then independent.
Rational pair_probability_cross_epoch(int num_examples, int batch_size);

}  // namespace enl
