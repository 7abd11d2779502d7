#include <gtest/gtest.h>

#include <random>

#include "neuromax/errors.hpp"
#include "neuromax/grid.hpp"
#include "neuromax/reference.hpp"
#include "neuromax/verify.hpp"

using namespace neuromax;

TEST(ConvCore, WorkedExampleLayer) {
  const LayerConfig cfg{3, 1, 6, 12, 1, 1};
  Tensor<LogCode> in(cfg.input_shape(), LogCode::of(0));
  Tensor<LogCode> w(cfg.weight_shape(), LogCode::of(0));
  const ConvCore core;
  const LayerResult r = core.run_layer(cfg, in, w);
  EXPECT_EQ(r.psums.shape(), (Shape{1, 1, 10, 4}));
  for (auto v : r.psums.data()) EXPECT_EQ(v, 9 * 256);
  EXPECT_EQ(r.metrics.cycles, 8u);
  EXPECT_EQ(r.metrics.useful_ops, 360u);
  EXPECT_EQ(r.stats.threads.saturations, 0u);
  // 9.0 is 2^3.17; the nearest code is sqrt(2)^6 = 8.
  for (const auto& c : r.output.data()) EXPECT_EQ(c, LogCode::of(6));
}

TEST(ConvCore, PointwiseIdentity) {
  const LayerConfig cfg{1, 1, 5, 4, 6, 6, ConvType::pointwise};
  std::mt19937_64 rng(4);
  const auto in = random_codes(rng, cfg.input_shape(), false, -6, 14, 0.0);
  Tensor<LogCode> w(cfg.weight_shape());
  for (int f = 0; f < 6; ++f) w.at(f, f, 0, 0) = LogCode::of(0);
  const ConvCore core;
  const auto r = core.run_layer(cfg, in, w);
  // Exponents up to 14 are exact in Q8.8; the requantized output is the input.
  EXPECT_EQ(r.output, in);
}

TEST(ConvCore, RandomStride2AgainstOracle) {
  const LayerConfig cfg{3, 2, 8, 8, 6, 4};
  std::mt19937_64 rng(5);
  const auto in = random_codes(rng, cfg.input_shape(), false, -12, 6);
  const auto w = random_codes(rng, cfg.weight_shape(), true, -14, 3);
  const ConvCore core;
  const auto r = core.run_layer(cfg, in, w);
  const auto want = conv2d_quant_oracle(in, w, cfg);
  EXPECT_EQ(r.psums, want);
  EXPECT_EQ(r.output, relu_requantize_oracle(want));
}

TEST(ConvCore, ShapeMismatch) {
  const LayerConfig cfg{3, 1, 6, 12, 1, 1};
  const ConvCore core;
  EXPECT_THROW(core.run_layer(cfg, Tensor<LogCode>(Shape{1, 1, 12, 7}), Tensor<LogCode>(cfg.weight_shape())),
               ShapeError);
  EXPECT_THROW(core.run_layer(cfg, Tensor<LogCode>(cfg.input_shape()), Tensor<LogCode>(Shape{2, 1, 3, 3})),
               ShapeError);
}

TEST(ConvCore, ParallelMatchesSerial) {
  std::mt19937_64 rng(6);
  CoreConfig pc;
  pc.parallel = true;
  const ConvCore serial, parallel(pc);
  for (const LayerConfig& cfg : {LayerConfig{3, 1, 12, 14, 20, 5}, LayerConfig{1, 1, 6, 6, 40, 7, ConvType::pointwise},
                                 LayerConfig{5, 2, 11, 11, 7, 4}}) {
    const auto in = random_codes(rng, cfg.input_shape(), false, -12, 6);
    const auto w = random_codes(rng, cfg.weight_shape(), true, -14, 3);
    const auto a = serial.run_layer(cfg, in, w);
    const auto b = parallel.run_layer(cfg, in, w);
    EXPECT_EQ(a.psums, b.psums) << describe(cfg);
    EXPECT_EQ(a.stats.threads.products, b.stats.threads.products);
  }
}

TEST(PostProcess, ReluThenNearestCode) {
  const ConvCore core;
  Tensor<PsumWord> p(Shape{1, 1, 1, 5});
  p.data() = {-896, 0, 256, 154, 32767};
  const auto out = post_process(p, core.log_table());
  EXPECT_TRUE(out.data()[0].zero);
  EXPECT_TRUE(out.data()[1].zero);
  EXPECT_EQ(out.data()[2], LogCode::of(0));
  EXPECT_EQ(out.data()[3], LogCode::of(-1));
  EXPECT_EQ(out, relu_requantize_oracle(p));
}

TEST(SramTiling, SmallLayerIsOneTile) {
  const SramPlan p = tile_for_sram({3, 1, 6, 12, 1, 1}, SramModel::split());
  EXPECT_EQ(p.tiles.size(), 1u);
  EXPECT_EQ(p.ddr_psum_bytes, 0u);
  EXPECT_EQ(p.ddr_input_bytes, 72u);
  EXPECT_EQ(p.ddr_weight_bytes, 9u);
  EXPECT_EQ(p.ddr_output_bytes, 40u);
}

TEST(SramTiling, LargeLayerSplitsWithoutSpillingPsums) {
  const SramModel m = SramModel::split();
  const LayerConfig conv1_2{3, 1, 226, 226, 64, 64};
  const SramPlan p = tile_for_sram(conv1_2, m);
  EXPECT_GT(p.tiles.size(), 1u);
  EXPECT_EQ(p.ddr_psum_bytes, 0u);
  EXPECT_LE(p.peak_input, m.input_bytes);
  EXPECT_LE(p.peak_weight, m.weight_bytes);
  EXPECT_LE(p.peak_output, m.output_bytes);
  EXPECT_LE(p.peak_accum, m.accum_bytes);
  int rows = 0;
  for (const auto& t : p.tiles) {
    if (t.filter == 0) rows += t.out_rows;
  }
  EXPECT_EQ(rows, conv1_2.out_h());
}

TEST(SramTiling, MoreMemoryNeverMeansMoreTiles) {
  const LayerConfig cfg{3, 1, 58, 58, 128, 256};
  std::size_t prev = SIZE_MAX;
  for (std::uint64_t kb = 128; kb <= 4096; kb *= 2) {
    const SramPlan p = tile_for_sram(cfg, SramModel::split(kb * 1024));
    EXPECT_LE(p.tiles.size(), prev) << kb;
    prev = p.tiles.size();
  }
}

TEST(SramTiling, TooSmallIsAConfigError) {
  EXPECT_THROW(tile_for_sram({3, 1, 226, 226, 64, 64}, SramModel::split(600)), ConfigError);
}

TEST(SramModel, Split) {
  const SramModel m = SramModel::split(900);
  EXPECT_EQ(m.weight_bytes, 300u);
  EXPECT_EQ(m.input_bytes, 300u);
  EXPECT_EQ(m.total(), 900u);
}

TEST(AvgPool, AveragesThroughDepthwise) {
  const PoolLayer pool = avg_pool_3x3(5, 5, 2, 1);
  EXPECT_EQ(pool.cfg.type, ConvType::depthwise);
  const Tensor<LogCode> in(pool.cfg.input_shape(), LogCode::of(6));  // 8.0
  const ConvCore core;
  const auto r = core.run_layer(pool.cfg, in, pool.weights);
  // 1/9 is coded as 2^-3 = 0.125, so the average of 8s comes out as 9.
  for (auto v : r.psums.data()) EXPECT_EQ(v, 9 * 256);
}
