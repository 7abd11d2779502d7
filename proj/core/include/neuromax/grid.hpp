// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>

#include "neuromax/dataflow.hpp"
#include "neuromax/metrics.hpp"
#include "neuromax/pe_core.hpp"
#include "neuromax/quantizer.hpp"
#include "neuromax/sram.hpp"
#include "neuromax/tensor.hpp"

namespace neuromax {

struct CoreConfig {
  double clock_hz = kDefaultClockHz;
  SramModel sram = SramModel::split();
  QuantParams quant{};
  FixedFormat psum_format = kDefaultPsumFormat;
  std::size_t log_table_cap = std::size_t{1} << 20;
  /// Evaluate the six matrices on separate threads with private
  /// accumulators merged in matrix order.
  bool parallel = false;
};

struct ExecStats {
  ThreadCounters threads;
  std::size_t boundary_peak = 0;  // largest boundary-register occupancy of any matrix
};

struct LayerResult {
  Tensor<LogCode> output;
  Tensor<PsumWord> psums;  // pre-ReLU, clamped to the psum format
  LayerMetrics metrics;
  SramPlan sram;
  ExecStats stats;
};

/// ReLU, then nearest log code through the table.
Tensor<LogCode> post_process(const Tensor<PsumWord>& psums, const LogTable& table);

/// Run a schedule through the PE matrices and adder stages. Returns the
/// channel-accumulator contents clamped to the psum format, in the layer's
/// output shape. Throws ShapeError on tensor mismatch and ScheduleError when
/// the schedule breaks a boundary-register invariant.
Tensor<PsumWord> execute_schedule(const Schedule& s, const Tensor<LogCode>& input,
                                  const Tensor<LogCode>& weights, const ThreadLut& lut,
                                  const FixedFormat& psum_format, bool parallel = false,
                                  ExecStats* stats = nullptr);

class ConvCore {
 public:
  explicit ConvCore(CoreConfig cfg = {});

  const CoreConfig& config() const { return cfg_; }
  const LogTable& log_table() const { return table_; }
  const ThreadLut& lut() const { return lut_; }

  LayerResult run_layer(const LayerConfig& cfg, const Tensor<LogCode>& input,
                        const Tensor<LogCode>& weights) const;
  /// Same, with an already planned (possibly modified) schedule.
  LayerResult run_schedule(const Schedule& s, const Tensor<LogCode>& input,
                           const Tensor<LogCode>& weights) const;

 private:
  CoreConfig cfg_;
  ThreadLut lut_;
  LogTable table_;
};

/// 3x3 average pooling as a depthwise convolution with every weight set to
/// the log code nearest 1/9.
struct PoolLayer {
  LayerConfig cfg;
  Tensor<LogCode> weights;
};
PoolLayer avg_pool_3x3(int in_w, int in_h, int channels, int stride, const QuantParams& p = {});

}  // namespace neuromax
