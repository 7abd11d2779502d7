#include <gtest/gtest.h>

#include <sstream>

#include "neuromax/verify.hpp"

using namespace neuromax;

TEST(Verify, HundredTrialsPass) {
  VerifyOptions opt;
  const auto rep = run_verify(opt);
  EXPECT_TRUE(rep.ok()) << rep.failure->property << ": " << rep.failure->detail;
  EXPECT_EQ(rep.trials, 100);
  EXPECT_EQ(rep.passed, 100);
}

TEST(Verify, RandomLayersAreDeterministic) {
  std::mt19937_64 a(42), b(42);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(random_layer(a, {}), random_layer(b, {}));
}

TEST(Verify, RandomLayersStayInLimits) {
  std::mt19937_64 rng(7);
  const VerifyLimits lim{};
  for (int i = 0; i < 500; ++i) {
    const LayerConfig cfg = random_layer(rng, lim);
    EXPECT_NO_THROW(cfg.validate()) << describe(cfg);
    EXPECT_LE(cfg.in_w, lim.max_spatial);
    EXPECT_LE(cfg.in_h, lim.max_spatial);
    EXPECT_LE(cfg.in_c, lim.max_channels);
  }
}

TEST(Verify, InjectedFaultIsCaught) {
  VerifyOptions opt;
  opt.trials = 5;
  opt.inject_fault = true;
  std::ostringstream log;
  const auto rep = run_verify(opt, &log);
  ASSERT_FALSE(rep.ok());
  EXPECT_FALSE(rep.failure->property.empty());
  EXPECT_EQ(rep.passed, 0);
}

TEST(Verify, ZeroTrialsPassVacuously) {
  VerifyOptions opt;
  opt.trials = 0;
  std::ostringstream log;
  const auto rep = run_verify(opt, &log);
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.trials, 0);
  EXPECT_NE(log.str().find("warning"), std::string::npos);
}

TEST(Verify, FirstMismatch) {
  Tensor<PsumWord> a(Shape{1, 2, 2, 2}), b(Shape{1, 2, 2, 2});
  EXPECT_FALSE(first_mismatch(a, b));
  b.at(1, 0, 1) = 5;
  const auto mm = first_mismatch(a, b);
  ASSERT_TRUE(mm);
  EXPECT_EQ(mm->f, 1);
  EXPECT_EQ(mm->y, 0);
  EXPECT_EQ(mm->x, 1);
  EXPECT_EQ(mm->want, 5);
}
