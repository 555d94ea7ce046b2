#include <doctest.h>

#include <cmath>
#include <set>

#include "enl/sampling.hpp"

using namespace enl;

TEST_CASE("epoch mode partitions the example set") {
  BatchSchedule sched(SampleMode::epoch_without_replacement, 4, 2, 7);
  for (int epoch = 0; epoch < 5; ++epoch) {
    std::set<long> seen;
    for (int b = 0; b < 2; ++b) {
      const auto& batch = sched.next_batch();
      REQUIRE(batch.size() == 2);
      seen.insert(batch.begin(), batch.end());
    }
    CHECK(seen == std::set<long>{0, 1, 2, 3});
  }
}

TEST_CASE("ragged epochs use a smaller last batch") {
  BatchSchedule sched(SampleMode::epoch_without_replacement, 5, 2, 1);
  std::set<long> seen;
  CHECK(sched.next_batch().size() == 2);
  const auto b1 = sched.next_batch();
  CHECK(b1.size() == 2);
  const auto b2 = sched.next_batch();
  CHECK(b2.size() == 1);
}

TEST_CASE("epoch mode: empirical membership probability is S/N") {
  const long epochs = 100000;
  BatchSchedule sched(SampleMode::epoch_without_replacement, 4, 2, 42);
  long hits = 0;
  for (long e = 0; e < epochs; ++e) {
    const auto& batch = sched.next_batch();  // first batch of each epoch
    for (long n : batch)
      if (n == 0) ++hits;
    sched.next_batch();
  }
  const double p = static_cast<double>(hits) / epochs;
  const double sigma = std::sqrt(0.5 * 0.5 / epochs);
  CHECK(std::abs(p - 0.5) < 3.0 * sigma);
}

TEST_CASE("iid mode: duplicate probability within a batch") {
  const long draws = 100000;
  BatchSchedule sched(SampleMode::iid_with_replacement, 4, 2, 3);
  long dups = 0;
  for (long k = 0; k < draws; ++k) {
    const auto& batch = sched.next_batch();
    if (batch[0] == batch[1]) ++dups;
  }
  // brute force over the 16 equally likely ordered pairs: 4/16 = 1/4
  const double p = static_cast<double>(dups) / draws;
  const double sigma = std::sqrt(0.25 * 0.75 / draws);
  CHECK(std::abs(p - 0.25) < 3.0 * sigma);
}

TEST_CASE("autocorr_weight values") {
  CHECK(autocorr_weight(0, 2) == 1.0);
  CHECK(autocorr_weight(0, 17) == 1.0);
  CHECK(autocorr_weight(1, 2) == doctest::Approx(-0.5));
  CHECK(autocorr_weight(2, 2) == 0.0);
  CHECK(autocorr_weight(1, 3) == doctest::Approx(-1.0 / 3.0));
  CHECK(autocorr_weight(2, 3) == doctest::Approx(-1.0 / 6.0));
  CHECK(autocorr_weight(3, 3) == 0.0);
  CHECK(autocorr_weight(-1, 3) == autocorr_weight(1, 3));
  CHECK_THROWS_AS(autocorr_weight(0, 1), DegenerateEpochError);
}

TEST_CASE("weights sum to zero over an epoch") {
  for (long m = 2; m <= 64; ++m) {
    double sum = 0.0;
    for (long h = -m; h <= m; ++h) sum += autocorr_weight(h, m);
    CHECK(std::abs(sum) < 1e-14);
  }
}

TEST_CASE("enumeration oracle: hand-checked values for N=4, S=2") {
  CHECK(pair_probability_oracle(4, 2, 0, true) == Rational(1, 2));
  CHECK(pair_probability_same_epoch(4, 2, 1, true) == Rational(0));
  CHECK(pair_probability_same_epoch(4, 2, 1, false) == Rational(1, 3));
  CHECK(pair_probability_cross_epoch(4, 2) == Rational(1, 4));
  // stationary mixtures
  CHECK(pair_probability_oracle(4, 2, 1, true) == Rational(1, 2) * Rational(0) + Rational(1, 2) * Rational(1, 4));
  CHECK(pair_probability_oracle(4, 2, 3, true) == Rational(1, 4));
}

TEST_CASE("enumeration oracle reproduces the theoretical weights exactly") {
  // cov weight(h) = (E[ss](h,same) - E[ss](h,diff)) / (same expression at h=0)
  for (int n : {4, 6, 8}) {
    for (int s = 1; s <= n / 2; ++s) {
      if (n % s != 0) continue;
      const int m = n / s;
      if (m < 2) continue;
      const Rational denom = pair_probability_oracle(n, s, 0, true) -
                             pair_probability_oracle(n, s, 0, false);
      for (int h = 0; h <= 2 * m; ++h) {
        const Rational w = (pair_probability_oracle(n, s, h, true) -
                            pair_probability_oracle(n, s, h, false)) /
                           denom;
        Rational expected(0);
        if (h == 0)
          expected = Rational(1);
        else if (h <= m)
          expected = Rational(-(m - h), m * (m - 1));
        CHECK(w == expected);
      }
    }
  }
}

TEST_CASE("oracle rejects non-divisible and oversized inputs") {
  CHECK_THROWS_AS(pair_probability_oracle(5, 2, 0, true), InvalidArgument);
  CHECK_THROWS_AS(pair_probability_oracle(14, 2, 0, true), InvalidArgument);
}
