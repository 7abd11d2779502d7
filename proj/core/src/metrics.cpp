// SPDX-License-Identifier: Apache-2.0
#include "neuromax/metrics.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <ostream>
#include <stdexcept>

namespace neuromax {

LayerMetrics measure(const Schedule& s, double clock_hz, std::string name, std::uint64_t ddr_bytes) {
  if (!(clock_hz > 0.0)) throw std::invalid_argument("clock frequency must be positive");
  LayerMetrics m;
  m.name = std::move(name);
  m.cfg = s.config();
  m.cycles = s.cycle_count();
  m.useful_ops = s.useful_ops();
  m.active_matrices = s.active_matrices();
  m.ddr_bytes = ddr_bytes;
  m.deferred_psums = s.max_deferred_psums();
  m.deferred_words = s.max_deferred_words();
  m.latency_s = static_cast<double>(m.cycles) / clock_hz;
  if (m.cycles > 0) {
    m.ops_per_cycle = static_cast<double>(m.useful_ops) / static_cast<double>(m.cycles);
    m.utilization = utilization(m);
    m.grid_utilization = m.ops_per_cycle / kThreadsPerGrid;
  }
  return m;
}

double utilization(const LayerMetrics& m) {
  if (m.cycles == 0) throw std::domain_error("utilization of a layer with zero cycles");
  if (m.active_matrices == 0) return 0.0;
  const double opc = static_cast<double>(m.useful_ops) / static_cast<double>(m.cycles);
  return opc / (kThreadsPerMatrix * m.active_matrices);
}

double layer_latency(const LayerConfig& cfg, double clock_hz) {
  if (!(clock_hz > 0.0)) throw std::invalid_argument("clock frequency must be positive");
  return static_cast<double>(plan_layer(cfg).cycle_count()) / clock_hz;
}

double analytic_latency(const LayerConfig& cfg, double clock_hz) {
  if (!(clock_hz > 0.0)) throw std::invalid_argument("clock frequency must be positive");
  return static_cast<double>(cfg.macs()) / kThreadsPerGrid / clock_hz;
}

NetworkReport summarize(std::vector<LayerMetrics> layers, double clock_hz) {
  NetworkReport r;
  r.clock_hz = clock_hz;
  r.layers = std::move(layers);
  double util_sum = 0.0;
  for (const auto& m : r.layers) {
    r.total_cycles += m.cycles;
    r.total_ops += m.useful_ops;
    r.total_ddr_bytes += m.ddr_bytes;
    r.total_latency_s += m.latency_s;
    util_sum += m.grid_utilization;
  }
  if (!r.layers.empty()) r.mean_utilization = util_sum / static_cast<double>(r.layers.size());
  if (r.total_cycles > 0) {
    r.weighted_utilization = static_cast<double>(r.total_ops) /
                             (static_cast<double>(r.total_cycles) * kThreadsPerGrid);
  }
  return r;
}

NetworkReport network_report(std::span<const NamedLayer> layers, double clock_hz,
                             const std::optional<SramModel>& sram) {
  if (layers.empty()) throw std::invalid_argument("network report: no layers");
  std::vector<LayerMetrics> ms;
  ms.reserve(layers.size());
  for (const auto& l : layers) {
    const std::uint64_t ddr = sram ? tile_for_sram(l.cfg, *sram).ddr_bytes() : 0;
    ms.push_back(measure(plan_layer(l.cfg), clock_hz, l.name, ddr));
  }
  return summarize(std::move(ms), clock_hz);
}

void write_csv(std::ostream& os, const NetworkReport& r) {
  fmt::print(os, "# neuromax-report 1 clock_mhz={:g}\n", r.clock_hz / 1e6);
  fmt::print(os,
             "layer,type,kernel,stride,in_w,in_h,in_c,out_c,cycles,useful_ops,ops_per_cycle,"
             "utilization,grid_utilization,latency_ms,ddr_bytes,active_matrices\n");
  for (const auto& m : r.layers) {
    const auto& c = m.cfg;
    fmt::print(os, "{},{},{},{},{},{},{},{},{},{},{:.4f},{:.6f},{:.6f},{:.6f},{},{}\n", m.name,
               to_string(c.type), c.kernel, c.stride, c.in_w, c.in_h, c.in_c, c.out_c, m.cycles,
               m.useful_ops, m.ops_per_cycle, m.utilization, m.grid_utilization,
               m.latency_s * 1e3, m.ddr_bytes, m.active_matrices);
  }
}

void write_summary(std::ostream& os, const NetworkReport& r) {
  const double mhz = r.clock_hz / 1e6;
  fmt::print(os, "{:<12} {:>10} {:>14} {:>9} {:>8} {:>8} {:>11}\n", "layer", "cycles", "ops",
             "ops/cyc", "util%", "grid%", "latency_ms");
  for (const auto& m : r.layers) {
    fmt::print(os, "{:<12} {:>10} {:>14} {:>9.2f} {:>8.2f} {:>8.2f} {:>11.4f}\n", m.name, m.cycles,
               m.useful_ops, m.ops_per_cycle, 100.0 * m.utilization, 100.0 * m.grid_utilization,
               m.latency_s * 1e3);
  }
  const double opc = r.total_cycles ? static_cast<double>(r.total_ops) / r.total_cycles : 0.0;
  fmt::print(os, "total: {} cycles, {} ops, {:.3f} ms at {:g} MHz\n", r.total_cycles, r.total_ops,
             r.total_latency_s * 1e3, mhz);
  fmt::print(os, "average grid utilization: {:.2f}% (per-layer mean), {:.2f}% (ops-weighted)\n",
             100.0 * r.mean_utilization, 100.0 * r.weighted_utilization);
  // One op is one MAC; a thread does one MAC per cycle.
  fmt::print(os, "throughput: {:.2f} ops/cycle = {:.2f} G-ops/s (peak {} ops/cycle = {:.2f} G-ops/s)\n",
             opc, opc * r.clock_hz / 1e9, kThreadsPerGrid, kThreadsPerGrid * r.clock_hz / 1e9);
  if (r.total_ddr_bytes) fmt::print(os, "DDR traffic: {} bytes (partial sums: 0)\n", r.total_ddr_bytes);
}

}  // namespace neuromax
