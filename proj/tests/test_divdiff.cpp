#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "qim/divdiff.hpp"
#include "support/oracles.hpp"

using qim::divdiff_exp;

TEST(Divdiff, Examples) {
  EXPECT_DOUBLE_EQ(divdiff_exp({0.0}), 1.0);
  EXPECT_NEAR(divdiff_exp({std::log(2.0), 0.0}), 1.0 / std::log(2.0), 1e-15);
  EXPECT_NEAR(divdiff_exp({std::log(2.0), 0.0}), 1.442695, 1e-6);
  EXPECT_NEAR(divdiff_exp({-1.0, -1.0}), std::exp(-1.0), 1e-16);
  EXPECT_NEAR(divdiff_exp({-1.0, -1.0}), 0.367879, 1e-6);
  // n coincident nodes: e^x / (n-1)!
  EXPECT_NEAR(divdiff_exp({0.5, 0.5, 0.5, 0.5}), std::exp(0.5) / 6.0, 1e-16);
}

TEST(Divdiff, MatchesOpitzOracle) {
  std::mt19937_64 rng(3);
  for (int n = 1; n <= 8; ++n) {
    for (double width : {1e-9, 1e-4, 0.5, 3.0, 20.0}) {
      std::uniform_real_distribution<double> u(-width, 0.0);
      std::vector<double> x(n);
      for (auto& v : x) v = u(rng) - 1.0;
      const double ref = oracle::divdiff_opitz(x);
      EXPECT_NEAR(divdiff_exp(x), ref, 1e-12 * std::abs(ref)) << "n=" << n << " width=" << width;
    }
  }
}

TEST(Divdiff, MixedClustersMatchOracle) {
  const std::vector<double> x = {-30.0, -30.0 + 1e-7, -12.0, -1.0, -1.0 + 1e-10, -0.5};
  const double ref = oracle::divdiff_opitz(x);
  EXPECT_NEAR(divdiff_exp(x), ref, 1e-11 * std::abs(ref));
}

TEST(Divdiff, PermutationSymmetry) {
  std::vector<double> x = {-4.1, -0.3, -2.2, -0.3000001, -3.7};
  const double ref = divdiff_exp(x);
  std::sort(x.begin(), x.end());
  do {
    EXPECT_NEAR(divdiff_exp(x), ref, 1e-12 * ref);
  } while (std::next_permutation(x.begin(), x.end()));
}

TEST(Divdiff, ConfluentContinuity) {
  const double x = -2.0;
  const double limit = divdiff_exp({x, x, x});
  double prev = 1.0;
  for (double h = 1e-1; h > 1e-14; h /= 10) {
    const double err = std::abs(divdiff_exp({x, x + h, x + 2 * h}) - limit);
    EXPECT_LE(err, 1.1 * prev);
    prev = err;
  }
  EXPECT_LE(prev, 1e-15);
}

TEST(Divdiff, MonteCarloOracle) {
  const std::vector<double> x = {-4.6, -0.2, -2.9, -1.3};
  const auto mc = oracle::divdiff_mc(x, 2'000'000, 17);
  EXPECT_NEAR(divdiff_exp(x), mc.value, 5 * mc.stderr_value);
}

TEST(Divdiff, ShiftCovariance) {
  const std::vector<double> x = {-3.0, -1.0, 2.0};
  std::vector<double> y = x;
  for (auto& v : y) v += 5.0;
  EXPECT_NEAR(divdiff_exp(y), std::exp(5.0) * divdiff_exp(x), 1e-12 * divdiff_exp(y));
}

TEST(Divdiff, Errors) {
  EXPECT_THROW(divdiff_exp(std::vector<double>{}), qim::InputError);
  EXPECT_THROW(divdiff_exp({0.0, std::numeric_limits<double>::infinity()}), qim::InputError);
}
