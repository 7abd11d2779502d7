#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "neuromax/errors.hpp"
#include "neuromax/quantizer.hpp"

using namespace neuromax;

namespace {

// Nearest point of the full epsilon lattice, ties away from zero.
double lattice_oracle(double x, int m, int n) {
  const double eps = std::ldexp(1.0, -n);
  const int lo = -(1 << (m + n - 1));
  const int hi = (1 << (m + n - 1)) - 1;
  double best = 0.0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = lo; i <= hi; ++i) {
    const double v = i * eps;
    const double d = std::abs(v - x);
    if (d < best_d || (d == best_d && std::abs(v) > std::abs(best))) {
      best = v;
      best_d = d;
    }
  }
  return best;
}

// Exhaustive nearest exponent in half-log2 units for base sqrt(2).
int nearest_code_oracle(double x) {
  const double l = std::log2(std::abs(x));
  int best = -32;
  double best_d = std::numeric_limits<double>::infinity();
  for (int k = -32; k <= 31; ++k) {
    const double d = std::abs(l - 0.5 * k);
    if (d < best_d) {
      best = k;
      best_d = d;
    }
  }
  return best;
}

const QuantParams kAcc{};

}  // namespace

TEST(QuantParams, AcceleratorDefaults) {
  EXPECT_EQ(kAcc.int_bits, 5);
  EXPECT_EQ(kAcc.frac_bits, 1);
  EXPECT_DOUBLE_EQ(kAcc.step(), 0.5);
  EXPECT_EQ(kAcc.min_exponent(), -32);
  EXPECT_EQ(kAcc.max_exponent(), 31);
  EXPECT_TRUE(kAcc.shift_compatible());
}

TEST(QuantParams, RejectsInvalid) {
  EXPECT_THROW((QuantParams{0, 1}).validate(), ConfigError);
  EXPECT_THROW((QuantParams{5, -1}).validate(), ConfigError);
  EXPECT_THROW((QuantParams{5, 1, 1.0}).validate(), ConfigError);
  EXPECT_FALSE((QuantParams{5, 1, 2.0}).shift_compatible());
  EXPECT_TRUE((QuantParams{5, 0, 2.0}).shift_compatible());
}

TEST(LinearQuantize, Examples) {
  const QuantParams p{2, 1};
  EXPECT_DOUBLE_EQ(linear_quantize(0.30, p).value(), 0.5);
  EXPECT_DOUBLE_EQ(linear_quantize(0.0, p).value(), 0.0);
  EXPECT_DOUBLE_EQ(linear_quantize(100.0, p).value(), 1.5);
  EXPECT_DOUBLE_EQ(linear_quantize(-100.0, p).value(), -2.0);
  EXPECT_THROW(linear_quantize(std::nan(""), p), std::invalid_argument);
}

TEST(LinearQuantize, MatchesLatticeEnumeration) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int m = 1; m <= 4; ++m) {
    for (int n = 0; n <= 3; ++n) {
      const QuantParams p{m, n};
      for (int i = 0; i < 500; ++i) {
        const double x = u(rng);
        ASSERT_DOUBLE_EQ(linear_quantize(x, p).value(), lattice_oracle(x, m, n)) << x;
      }
      // Exact ties round away from zero.
      const double eps = std::ldexp(1.0, -n);
      EXPECT_DOUBLE_EQ(linear_quantize(eps / 2, p).value(), lattice_oracle(eps / 2, m, n));
      EXPECT_DOUBLE_EQ(linear_quantize(-eps / 2, p).value(), lattice_oracle(-eps / 2, m, n));
    }
  }
}

TEST(LogQuantize, Examples) {
  const LogCode one = log_quantize(1.0, kAcc);
  EXPECT_FALSE(one.zero);
  EXPECT_FALSE(one.negative);
  EXPECT_EQ(one.exponent, 0);

  const LogCode m2 = log_quantize(-2.0, kAcc);
  EXPECT_TRUE(m2.negative);
  EXPECT_EQ(m2.exponent, 2);
  EXPECT_DOUBLE_EQ(m2.field_value(kAcc), 1.0);  // log2 of the magnitude
  EXPECT_DOUBLE_EQ(dequantize(m2, kAcc), -2.0);

  EXPECT_TRUE(log_quantize(0.0, kAcc).zero);

  const LogCode q = log_quantize(0.75, kAcc);
  EXPECT_EQ(q.exponent, -1);
  EXPECT_NEAR(dequantize(q, kAcc), 0.70710678, 1e-8);
}

TEST(LogQuantize, RejectsNonFinite) {
  EXPECT_THROW(log_quantize(std::nan(""), kAcc), std::invalid_argument);
  EXPECT_THROW(log_quantize(std::numeric_limits<double>::infinity(), kAcc), std::invalid_argument);
}

TEST(LogQuantize, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> e(-15.0, 15.0);
  for (int i = 0; i < 20000; ++i) {
    const double x = std::exp2(e(rng)) * (i % 2 ? -1.0 : 1.0);
    const LogCode c = log_quantize(x, kAcc);
    ASSERT_EQ(c.exponent, nearest_code_oracle(x)) << x;
    ASSERT_EQ(c.negative, x < 0);
  }
}

TEST(LogQuantize, RoundTripEveryCode) {
  for (int k = kAcc.min_exponent(); k <= kAcc.max_exponent(); ++k) {
    for (bool neg : {false, true}) {
      const LogCode c = LogCode::of(k, neg);
      EXPECT_EQ(log_quantize(dequantize(c, kAcc), kAcc), c) << k;
    }
  }
  EXPECT_EQ(log_quantize(dequantize(LogCode::zero_code(), kAcc), kAcc), LogCode::zero_code());
}

TEST(LogQuantize, Monotone) {
  int prev = std::numeric_limits<int>::min();
  for (double x = 1e-6; x < 7e4; x *= 1.001) {
    const int k = log_quantize(x, kAcc).exponent;
    ASSERT_GE(k, prev) << x;
    prev = k;
  }
}

TEST(LogQuantize, ClipsInsteadOfZeroing) {
  // Below the smallest code the relative error grows without bound.
  EXPECT_GT(std::abs(dequantize(log_quantize(1e-6, kAcc), kAcc) - 1e-6) / 1e-6, 1.0);
  EXPECT_EQ(log_quantize(1e30, kAcc).exponent, 31);
  const LogCode tiny = log_quantize(1e-30, kAcc);
  EXPECT_FALSE(tiny.zero);
  EXPECT_EQ(tiny.exponent, -32);
}

TEST(Dequantize, Examples) {
  EXPECT_DOUBLE_EQ(dequantize(LogCode::of(0), kAcc), 1.0);
  EXPECT_DOUBLE_EQ(dequantize(LogCode::of(2, true), kAcc), -2.0);
  EXPECT_DOUBLE_EQ(dequantize(LogCode::zero_code(), kAcc), 0.0);
}

TEST(LogCode, ZeroEqualityIgnoresFields) {
  EXPECT_EQ((LogCode{true, true, 7}), LogCode::zero_code());
  EXPECT_NE(LogCode::of(1), LogCode::of(1, true));
}

TEST(LogTable, Examples) {
  const LogTable t = build_log_table(kAcc, FixedFormat{16, 8});
  EXPECT_EQ(t.size(), 32768u);
  EXPECT_EQ(t.lookup(256), LogCode::of(0));
  EXPECT_EQ(t.lookup(181), LogCode::of(-1));  // 0.7071 in Q8.8
  EXPECT_EQ(t.lookup(154), LogCode::of(-1));  // 0.6
  EXPECT_TRUE(t.lookup(0).zero);
  EXPECT_EQ(t.lookup(1 << 20), t.lookup(32767));  // clamped
}

TEST(LogTable, EveryEntryIsNearestCode) {
  const LogTable t = build_log_table(kAcc, FixedFormat{16, 8});
  int prev = -100;
  for (int raw = 1; raw <= 32767; ++raw) {
    const LogCode c = t.lookup(raw);
    ASSERT_EQ(c.exponent, nearest_code_oracle(raw / 256.0)) << raw;
    ASSERT_GE(c.exponent, prev);
    prev = c.exponent;
  }
}

TEST(LogTable, CapIsEnforced) {
  EXPECT_THROW(build_log_table(kAcc, FixedFormat{16, 8}, 1000), ConfigError);
  EXPECT_NO_THROW(build_log_table(kAcc, FixedFormat{12, 4}, 4096));
}

TEST(QuantErrorStats, Examples) {
  const std::vector<double> lattice{1.0, std::sqrt(2.0), 2.0, 0.5, -4.0};
  EXPECT_NEAR(quant_error_stats(lattice, kAcc).max_rel_err, 0.0, 1e-15);

  const std::vector<double> single{0.75};
  EXPECT_NEAR(quant_error_stats(single, kAcc).max_rel_err, 0.0572, 1e-4);

  EXPECT_THROW(quant_error_stats({}, kAcc), std::invalid_argument);
  const std::vector<double> with_zero{1.0, 0.0};
  EXPECT_THROW(quant_error_stats(with_zero, kAcc), std::invalid_argument);
}

TEST(QuantErrorStats, DenseSweepWithinBound) {
  // Everything from the smallest code's rounding range up to 8.
  std::vector<double> xs;
  for (int i = 1; i <= 200000; ++i) xs.push_back(8.0 * i / 200000.0);
  for (double x = std::exp2(-16.2); x < 4e-5; x *= 1.0001) xs.push_back(x);
  const auto s = quant_error_stats(xs, kAcc);
  EXPECT_LE(s.max_rel_err, std::pow(2.0, 0.25) - 1.0 + 1e-12);
  EXPECT_GT(s.max_rel_err, 0.18);  // the bound is nearly attained
  EXPECT_GT(s.mean_rel_err, 0.0);
}
