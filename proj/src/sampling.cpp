#include "enl/sampling.hpp"

#include <algorithm>
#include <numeric>

#include "enl/rng.hpp"

namespace enl {

BatchSchedule::BatchSchedule(SampleMode mode, long num_examples, long batch_size,
                             std::uint64_t seed)
    : mode_(mode),
      num_examples_(num_examples),
      batch_size_(batch_size),
      seed_(seed),
      rng_(make_rng(seed)) {
  if (num_examples < 1) throw InvalidArgument("num_examples must be >= 1");
  if (batch_size < 1 || batch_size > num_examples)
    throw InvalidArgument("batch_size must be in [1, num_examples]");
  if (mode_ == SampleMode::epoch_without_replacement) {
    permutation_.resize(num_examples_);
    std::iota(permutation_.begin(), permutation_.end(), 0L);
    cursor_ = num_examples_;  // forces a shuffle on first use
  }
}

const std::vector<long>& BatchSchedule::next_batch() {
  batch_.clear();
  if (mode_ == SampleMode::iid_with_replacement) {
    std::uniform_int_distribution<long> pick(0, num_examples_ - 1);
    for (long i = 0; i < batch_size_; ++i) batch_.push_back(pick(rng_));
    return batch_;
  }
  if (cursor_ >= num_examples_) {
    std::shuffle(permutation_.begin(), permutation_.end(), rng_);
    cursor_ = 0;
  }
  const long take = std::min(batch_size_, num_examples_ - cursor_);
  for (long i = 0; i < take; ++i) batch_.push_back(permutation_[cursor_ + i]);
  cursor_ += take;
  return batch_;
}

double autocorr_weight(long h, long batches_per_epoch) {
  const long m = batches_per_epoch;
  if (m < 2) throw DegenerateEpochError("autocorr_weight requires M >= 2");
  const long a = h < 0 ? -h : h;
  if (a == 0) return 1.0;
  if (a > m) return 0.0;
  return -static_cast<double>(m - a) / (static_cast<double>(m) * static_cast<double>(m - 1));
}

namespace {

// Counts permutations of {0..N-1} for which `first` lies in the batch at
// position 0 and `second` lies in the batch at position `lag`.
Rational enumerate_epoch(int n, int s, int lag, int first, int second) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  long long hits = 0, total = 0;
  do {
    ++total;
    bool first_in = false, second_in = false;
    for (int i = 0; i < s; ++i) {
      if (perm[i] == first) first_in = true;
      if (perm[lag * s + i] == second) second_in = true;
    }
    if (first_in && second_in) ++hits;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return Rational(hits, total);
}

void validate(int n, int s) {
  if (n < 2 || s < 1 || n % s != 0) throw InvalidArgument("need S | N and N >= 2");
  if (n > 12) throw InvalidArgument("enumeration oracle limited to N <= 12");
}

}  // namespace

Rational pair_probability_same_epoch(int num_examples, int batch_size, int lag,
                                     bool same_example) {
  validate(num_examples, batch_size);
  const int m = num_examples / batch_size;
  if (lag < 0 || lag >= m) throw InvalidArgument("same-epoch lag must be in [0, M)");
  return enumerate_epoch(num_examples, batch_size, lag, 0, same_example ? 0 : 1);
}

Rational pair_probability_cross_epoch(int num_examples, int batch_size) {
  validate(num_examples, batch_size);
  // Independent epochs: the joint expectation factorizes into two marginals,
  // each enumerated as P(example in the batch at a fixed position).
  const Rational marginal = enumerate_epoch(num_examples, batch_size, 0, 0, 0);
  return marginal * marginal;
}

Rational pair_probability_oracle(int num_examples, int batch_size, int lag, bool same_example) {
  validate(num_examples, batch_size);
  const int m = num_examples / batch_size;
  if (lag < 0) lag = -lag;
  if (lag == 0) return pair_probability_same_epoch(num_examples, batch_size, 0, same_example);
  const Rational cross = pair_probability_cross_epoch(num_examples, batch_size);
  if (lag >= m) return cross;
  // Stationary mixture: batches k and k+lag share an epoch with probability
  // (M - lag)/M.
  const Rational p_same(m - lag, m);
  return p_same * pair_probability_same_epoch(num_examples, batch_size, lag, same_example) +
         (Rational(1) - p_same) * cross;
}

}  // namespace enl
