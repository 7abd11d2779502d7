// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "neuromax/layer_config.hpp"

namespace neuromax {

/// On-chip buffer capacities in bytes. Log codes (weights and activations)
/// take one byte each; accumulator words take four.
struct SramModel {
  static constexpr std::uint64_t kDefaultTotalBytes = 3'800'000 / 8;  // 3.8 Mb

  std::uint64_t weight_bytes = 0;
  std::uint64_t input_bytes = 0;
  std::uint64_t output_bytes = 0;
  std::uint64_t accum_bytes = 0;

  /// 1/3 weights, 1/3 input, the remaining third split evenly between the
  /// output buffer and the channel accumulators.
  static SramModel split(std::uint64_t total_bytes = kDefaultTotalBytes);
  std::uint64_t total() const { return weight_bytes + input_bytes + output_bytes + accum_bytes; }
};

inline constexpr std::uint64_t kAccumWordBytes = 4;

/// One sub-run of a layer: a band of output rows for a chunk of filters
/// (of channels, for depthwise layers).
struct SramTile {
  int out_y = 0;
  int out_rows = 0;
  int filter = 0;
  int filters = 0;
  LayerConfig sub;  // the sub-layer as the core sees it
};

struct SramPlan {
  std::vector<SramTile> tiles;
  int row_bands = 0;
  int filter_chunks = 0;
  std::uint64_t ddr_input_bytes = 0;
  std::uint64_t ddr_weight_bytes = 0;
  std::uint64_t ddr_output_bytes = 0;
  std::uint64_t ddr_psum_bytes = 0;  // always zero: psums never leave the core
  std::uint64_t peak_input = 0;
  std::uint64_t peak_weight = 0;
  std::uint64_t peak_output = 0;
  std::uint64_t peak_accum = 0;

  std::uint64_t ddr_bytes() const {
    return ddr_input_bytes + ddr_weight_bytes + ddr_output_bytes + ddr_psum_bytes;
  }
};

/// Smallest number of (row band x filter chunk) sub-runs whose working sets
/// fit every buffer; ties go to the plan with less DDR traffic. Throws
/// ConfigError when even one 6x3 tile with a single weight broadcast does
/// not fit.
SramPlan tile_for_sram(const LayerConfig& cfg, const SramModel& sram);

}  // namespace neuromax
