// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neuromax/dataflow.hpp"
#include "neuromax/layer_config.hpp"
#include "neuromax/sram.hpp"

namespace neuromax {

inline constexpr double kDefaultClockHz = 200e6;

struct LayerMetrics {
  std::string name;
  LayerConfig cfg;
  std::uint64_t cycles = 0;
  std::uint64_t useful_ops = 0;  // one op per MAC
  double ops_per_cycle = 0.0;
  /// Against the thread slots of the active matrices (54 each).
  double utilization = 0.0;
  /// Against the whole 324-thread grid.
  double grid_utilization = 0.0;
  double latency_s = 0.0;
  std::uint64_t ddr_bytes = 0;
  int active_matrices = 0;
  int deferred_psums = 0;  // most psums sent to the boundary register in one cycle, per matrix
  int deferred_words = 0;
};

/// Metrics of a planned schedule. `ddr_bytes` comes from the SRAM plan.
LayerMetrics measure(const Schedule& s, double clock_hz = kDefaultClockHz, std::string name = {},
                     std::uint64_t ddr_bytes = 0);

/// ops_per_cycle / (54 * active_matrices). Throws std::domain_error on zero cycles.
double utilization(const LayerMetrics& m);

/// Seconds for the layer's schedule at `clock_hz`.
double layer_latency(const LayerConfig& cfg, double clock_hz = kDefaultClockHz);
/// MACs / 324 / clock: the bound for a fully used grid.
double analytic_latency(const LayerConfig& cfg, double clock_hz = kDefaultClockHz);

struct NamedLayer {
  std::string name;
  LayerConfig cfg;
};

struct NetworkReport {
  std::vector<LayerMetrics> layers;
  double clock_hz = kDefaultClockHz;
  std::uint64_t total_cycles = 0;
  std::uint64_t total_ops = 0;
  std::uint64_t total_ddr_bytes = 0;
  double total_latency_s = 0.0;
  double mean_utilization = 0.0;      // unweighted mean of grid_utilization
  double weighted_utilization = 0.0;  // total ops / (324 * total cycles)
};

/// Totals and averages over already measured layers.
NetworkReport summarize(std::vector<LayerMetrics> layers, double clock_hz = kDefaultClockHz);

/// Throws std::invalid_argument on an empty list. DDR traffic is filled in
/// when `sram` is given.
NetworkReport network_report(std::span<const NamedLayer> layers, double clock_hz = kDefaultClockHz,
                             const std::optional<SramModel>& sram = std::nullopt);

/// CSV with a version comment line and one row per layer.
void write_csv(std::ostream& os, const NetworkReport& r);
void write_summary(std::ostream& os, const NetworkReport& r);

}  // namespace neuromax
