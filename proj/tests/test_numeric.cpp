#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "methcp/numeric.hpp"

using namespace methcp;

TEST(Numeric, LogSumExpIsStable) {
  std::vector<double> xs{1000.0, 1000.0};
  EXPECT_NEAR(log_sum_exp(xs), 1000.0 + std::log(2.0), 1e-12);
  std::vector<double> none{kNegInf, kNegInf};
  EXPECT_EQ(log_sum_exp(none), kNegInf);
}

TEST(Numeric, LogisticAndLogitAreInverse) {
  for (double x : {-30.0, -2.0, 0.0, 0.7, 10.0}) EXPECT_NEAR(logit(logistic(x)), x, 1e-9 * std::max(1.0, std::abs(x)));
  EXPECT_DOUBLE_EQ(logistic(0.0), 0.5);
}

TEST(Numeric, NormalizeReturnsTotal) {
  std::vector<double> w{1.0, 3.0};
  EXPECT_DOUBLE_EQ(normalize_in_place(w), 4.0);
  EXPECT_DOUBLE_EQ(w[0], 0.25);
  std::vector<double> z{0.0, 0.0};
  EXPECT_EQ(normalize_in_place(z), 0.0);
  EXPECT_EQ(z[1], 0.0);
}

TEST(Numeric, SafeLogOfZero) { EXPECT_EQ(safe_log(0.0), kNegInf); }
