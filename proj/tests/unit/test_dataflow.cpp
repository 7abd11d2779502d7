#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "neuromax/dataflow.hpp"
#include "neuromax/errors.hpp"
#include "neuromax/grid.hpp"
#include "neuromax/reference.hpp"
#include "neuromax/verify.hpp"

using namespace neuromax;

namespace {

// 12 rows by 6 columns, one channel, one filter.
const LayerConfig kExample3x3{3, 1, 6, 12, 1, 1};
const LayerConfig kExample1x1{1, 1, 6, 3, 6, 6, ConvType::pointwise};

std::vector<int> sorted(std::vector<std::uint8_t> v) {
  std::vector<int> r(v.begin(), v.end());
  std::sort(r.begin(), r.end());
  return r;
}

void expect_matches_oracle(const LayerConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto in = random_codes(rng, cfg.input_shape(), false, -12, 6);
  const auto w = random_codes(rng, cfg.weight_shape(), true, -14, 3);
  const ConvCore core;
  const auto got = core.run_layer(cfg, in, w).psums;
  const auto want = conv2d_quant_oracle(in, w, cfg);
  const auto mm = first_mismatch(got, want);
  EXPECT_FALSE(mm) << describe(cfg) << " at f" << mm->f << " y" << mm->y << " x" << mm->x
                   << " got " << mm->got << " want " << mm->want;
}

}  // namespace

TEST(Schedule3x3, WorkedExampleCounts) {
  const Schedule s = plan_layer(kExample3x3);
  EXPECT_EQ(s.kind(), ScheduleKind::conv3x3);
  EXPECT_EQ(s.cycle_count(), 8u);
  EXPECT_EQ(s.useful_ops(), 360u);
  EXPECT_EQ(s.active_matrices(), 1);
  EXPECT_DOUBLE_EQ(static_cast<double>(s.useful_ops()) / s.cycle_count(), 45.0);
  EXPECT_NEAR(45.0 / kThreadsPerMatrix, 0.8333, 1e-4);
  EXPECT_EQ(s.useful_ops(), kExample3x3.macs());
}

TEST(Schedule3x3, WorkedExampleBoundaryPsums) {
  const Schedule s = plan_layer(kExample3x3);
  ASSERT_EQ(s.templates().size(), 2u);
  const MatrixTile& first = s.templates()[0].matrices[0];
  const MatrixTile& last = s.templates()[1].matrices[0];
  // 1-based o13, o16, o17 leave the first sector; o2, o3, o6 pick them up.
  EXPECT_EQ(sorted(first.defer_set()), (std::vector<int>{12, 15, 16}));
  EXPECT_TRUE(first.consume_set().empty());
  EXPECT_EQ(sorted(last.consume_set()), (std::vector<int>{1, 2, 5}));
  EXPECT_TRUE(last.defer_set().empty());
  EXPECT_EQ(s.max_deferred_psums(), 3);
  EXPECT_EQ(s.max_deferred_words(), 2);
  EXPECT_EQ(s.boundary_lanes(), 2);
}

TEST(Schedule3x3, RegisterHoldsOneWordPerLanePerColumn) {
  // Replay the boundary traffic of the example: after the first sector each
  // lane holds out_w words, and the second sector drains them in order.
  const Schedule s = plan_layer(kExample3x3);
  BoundaryRegister reg(s.boundary_lanes(), s.lane_capacity());
  MatrixPsums o{};
  for (int i = 0; i < kPsumsPerMatrix; ++i) o[i] = i + 1;
  std::size_t at_switch = 0;
  s.for_each_cycle([&](const TileCycle& c) {
    const auto& outs = c.tile->matrices[0].adder_net1;
    if (c.segment->first_template == 1 && at_switch == 0) {
      at_switch = reg.size(0) + reg.size(1);
    }
    boundary_consume(reg, outs);
    boundary_defer(reg, o, outs);
  });
  EXPECT_EQ(at_switch, 8u);
  EXPECT_EQ(reg.peak(), 8u);
  EXPECT_TRUE(reg.empty());
}

TEST(Schedule3x3, Stride2) {
  const LayerConfig padded{3, 2, 7, 13, 1, 1};
  EXPECT_EQ(padded.output_shape(), (Shape{1, 1, 6, 3}));
  const Schedule s = plan_layer(padded);
  EXPECT_EQ(s.useful_ops(), padded.macs());
  EXPECT_EQ(s.useful_ops(), 162u);
  EXPECT_LE(s.max_deferred_psums(), 3);
  const LayerConfig unpadded{3, 2, 6, 12, 1, 1};
  EXPECT_EQ(unpadded.output_shape(), (Shape{1, 1, 5, 2}));
}

TEST(Schedule3x3, Stride2UsesAtMostHalfTheThreads) {
  for (int h : {8, 10, 12, 16, 30}) {
    const LayerConfig cfg{3, 2, 9, h, 1, 1};
    const Schedule s = plan_layer(cfg);
    // ops / (cycles * 54) <= 1/2 without floating point.
    EXPECT_LE(2 * s.useful_ops(), s.cycle_count() * kThreadsPerMatrix) << h;
  }
}

TEST(Schedule3x3, DeferralNeverExceedsThreePsums) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 60; ++t) {
    const LayerConfig cfg{3, 1 + t % 2, 3 + static_cast<int>(rng() % 30), 3 + static_cast<int>(rng() % 30),
                          1 + static_cast<int>(rng() % 20), 1 + static_cast<int>(rng() % 8)};
    const Schedule s = plan_layer(cfg);
    EXPECT_LE(s.max_deferred_psums(), 3) << describe(cfg);
    EXPECT_EQ(s.useful_ops(), cfg.macs()) << describe(cfg);
  }
}

TEST(Schedule3x3, MatchesOracle) {
  expect_matches_oracle(kExample3x3, 1);
  expect_matches_oracle({3, 1, 14, 17, 7, 4}, 2);
  expect_matches_oracle({3, 2, 15, 9, 5, 3}, 3);
  expect_matches_oracle({3, 1, 9, 11, 13, 13, ConvType::depthwise}, 4);
  expect_matches_oracle({3, 2, 10, 10, 8, 8, ConvType::depthwise}, 5);
}

TEST(Schedule1x1, WorkedExample) {
  const Schedule s = plan_layer(kExample1x1);
  EXPECT_EQ(s.kind(), ScheduleKind::pointwise);
  EXPECT_TRUE(s.flattened());
  EXPECT_EQ(s.cycle_count(), 6u);
  EXPECT_EQ(s.active_matrices(), 2);
  EXPECT_EQ(s.useful_ops(), 648u);
  EXPECT_EQ(s.useful_ops(), s.cycle_count() * s.active_matrices() * kThreadsPerMatrix);
  EXPECT_EQ(s.max_deferred_psums(), 0);
}

TEST(Schedule1x1, FewChannelsUseOneMatrix) {
  const Schedule s = plan_layer({1, 1, 6, 3, 3, 1, ConvType::pointwise});
  EXPECT_EQ(s.active_matrices(), 1);
  EXPECT_EQ(s.cycle_count(), 3u);
}

TEST(Schedule1x1, WideLayersTakeSeveralPasses) {
  const LayerConfig cfg{1, 1, 6, 3, 36, 6, ConvType::pointwise};
  const Schedule s = plan_layer(cfg);
  EXPECT_EQ(s.active_matrices(), 6);
  int passes = 0;
  for (const auto& seg : s.segments()) passes += seg.pass_start;
  EXPECT_EQ(passes, 4);  // 2 channel groups x 2 filter groups
  EXPECT_EQ(s.cycle_count(), 12u);
  EXPECT_EQ(s.useful_ops(), cfg.macs());
}

TEST(Schedule1x1, MatchesOracle) {
  expect_matches_oracle(kExample1x1, 6);
  expect_matches_oracle({1, 1, 7, 5, 40, 9, ConvType::pointwise}, 7);
  expect_matches_oracle({1, 2, 9, 8, 6, 5, ConvType::pointwise}, 8);
}

TEST(TwoPhase, FiveByFiveWiring) {
  const Schedule s = plan_layer({5, 1, 9, 9, 1, 1});
  EXPECT_EQ(s.kind(), ScheduleKind::two_phase);
  const auto& outs = s.templates()[0].matrices[0].adder_net1;
  ASSERT_EQ(outs.size(), 2u);
  EXPECT_EQ(sorted(outs[0].psums), (std::vector<int>{0, 4, 8, 9, 13}));
  EXPECT_EQ(sorted(outs[1].psums), (std::vector<int>{3, 7, 11, 12, 16}));
  EXPECT_EQ(s.max_deferred_psums(), 0);
}

TEST(TwoPhase, MatchesOracle) {
  expect_matches_oracle({5, 1, 9, 9, 1, 1}, 10);
  expect_matches_oracle({5, 2, 13, 11, 4, 3}, 11);
  expect_matches_oracle({4, 1, 8, 10, 3, 2}, 12);
  expect_matches_oracle({4, 2, 12, 9, 2, 5}, 13);
}

TEST(TwoPhase, ReducedShapesEqualTheirSmallerKernel) {
  // A 5x5 input under a 5x5 kernel behaves like a 3x3 at its centre once the
  // border weights are zero.
  std::mt19937_64 rng(15);
  const LayerConfig k5{5, 1, 7, 7, 2, 1};
  const auto in = random_codes(rng, k5.input_shape(), false, -8, 4);
  auto w5 = random_codes(rng, k5.weight_shape(), true, -8, 2);
  Tensor<LogCode> w3(LayerConfig{3, 1, 5, 5, 2, 1}.weight_shape());
  for (int c = 0; c < 2; ++c) {
    for (int ky = 0; ky < 5; ++ky) {
      for (int kx = 0; kx < 5; ++kx) {
        const bool inner = ky >= 1 && ky <= 3 && kx >= 1 && kx <= 3;
        if (!inner) w5.at(0, c, ky, kx) = LogCode::zero_code();
        if (inner) w3.at(0, c, ky - 1, kx - 1) = w5.at(0, c, ky, kx);
      }
    }
  }
  Tensor<LogCode> in3(Shape{1, 2, 5, 5});
  for (int c = 0; c < 2; ++c) {
    for (int y = 0; y < 5; ++y) {
      for (int x = 0; x < 5; ++x) in3.at(c, y, x) = in.at(c, y + 1, x + 1);
    }
  }
  const ConvCore core;
  const auto a = core.run_layer(k5, in, w5).psums;
  const auto b = core.run_layer({3, 1, 5, 5, 2, 1}, in3, w3).psums;
  EXPECT_EQ(a, b);
}

TEST(PlanLayer, RejectsUnsupportedKernels) {
  EXPECT_THROW(plan_layer({7, 1, 10, 10, 1, 1}), ConfigError);
  EXPECT_THROW(plan_layer({3, 3, 10, 10, 1, 1}), ConfigError);
  EXPECT_THROW(plan_layer({3, 1, 2, 10, 1, 1}), ConfigError);
  EXPECT_THROW(plan_layer({3, 1, 10, 10, 2, 3, ConvType::depthwise}), ConfigError);
}

TEST(BoundaryRegister, FifoPerLane) {
  BoundaryRegister r(2, 3);
  r.defer(0, 1);
  r.defer(0, 2);
  r.defer(1, 9);
  EXPECT_EQ(r.size(0), 2u);
  EXPECT_EQ(r.consume(0), 1);
  EXPECT_EQ(r.consume(1), 9);
  EXPECT_EQ(r.consume(0), 2);
  EXPECT_TRUE(r.empty());
  EXPECT_EQ(r.peak(), 3u);
}

TEST(BoundaryRegister, OverflowAndUnderflow) {
  BoundaryRegister r(1, 2);
  EXPECT_THROW(r.consume(0), ScheduleError);
  r.defer(0, 1);
  r.defer(0, 2);
  EXPECT_THROW(r.defer(0, 3), ScheduleError);
}

TEST(ChannelAccumulator, AddResetMerge) {
  ChannelAccumulator a(Shape{1, 2, 2, 2});
  a.add(0, 1, 1, 5);
  a.add(0, 1, 1, 7);
  a.add(1, 0, 0, -3);
  EXPECT_EQ(a.value(0, 1, 1), 12);
  ChannelAccumulator b(Shape{1, 2, 2, 2});
  b.add(0, 1, 1, 1);
  a.merge(b);
  EXPECT_EQ(a.value(0, 1, 1), 13);
  a.reset_filter(0);
  EXPECT_EQ(a.value(0, 1, 1), 0);
  EXPECT_EQ(a.value(1, 0, 0), -3);
  a.reset();
  EXPECT_EQ(a.value(1, 0, 0), 0);
}

TEST(Trace, WorkedExampleGolden) {
  std::ostringstream os;
  write_trace(os, plan_layer(kExample3x3), "example");
  const std::string want =
      "# neuromax-trace 1\n"
      "# layer=example type=standard kernel=3 stride=1 in=6x12x1 out_c=1 dataflow=conv3x3 cycles=8 "
      "useful_ops=360\n"
      "# cycle tile filter channel in_y in_x out_y out_x matrices ops defer consume\n"
      "0 s1-first 0 0 0 0 0 0 100000 45 13+17,16 -\n"
      "1 s1-first 0 0 0 1 0 1 100000 45 13+17,16 -\n"
      "2 s1-first 0 0 0 2 0 2 100000 45 13+17,16 -\n"
      "3 s1-first 0 0 0 3 0 3 100000 45 13+17,16 -\n"
      "4 s1-last 0 0 6 0 6 0 100000 45 - 3,2+6\n"
      "5 s1-last 0 0 6 1 6 1 100000 45 - 3,2+6\n"
      "6 s1-last 0 0 6 2 6 2 100000 45 - 3,2+6\n"
      "7 s1-last 0 0 6 3 6 3 100000 45 - 3,2+6\n";
  EXPECT_EQ(os.str(), want);
}

TEST(Coverage, PlannedSchedulesAreComplete) {
  for (const LayerConfig& cfg :
       {kExample3x3, kExample1x1, LayerConfig{3, 2, 11, 9, 4, 5}, LayerConfig{5, 2, 9, 9, 3, 2},
        LayerConfig{4, 1, 6, 7, 2, 2}, LayerConfig{3, 1, 8, 8, 7, 7, ConvType::depthwise}}) {
    EXPECT_EQ(check_coverage(plan_layer(cfg)), "") << describe(cfg);
  }
}

TEST(FaultInjection, BreaksCoverageAndOutput) {
  Schedule s = plan_layer(kExample3x3);
  ASSERT_TRUE(s.inject_wiring_fault());
  EXPECT_NE(check_coverage(s), "");

  std::mt19937_64 rng(21);
  const auto in = random_codes(rng, kExample3x3.input_shape(), false, -4, 4, 0.0);
  const auto w = random_codes(rng, kExample3x3.weight_shape(), true, -4, 2, 0.0);
  const ConvCore core;
  const auto got = core.run_schedule(s, in, w).psums;
  EXPECT_TRUE(first_mismatch(got, conv2d_quant_oracle(in, w, kExample3x3)));
}
