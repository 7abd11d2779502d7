// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neuromax/layer_config.hpp"
#include "neuromax/pe_core.hpp"
#include "neuromax/tensor.hpp"

namespace neuromax {

// A Schedule is the state controller's plan for one layer. It is stored as a
// small set of tile templates (one per distinct PE-matrix configuration) and
// a run-length list of segments that place those templates on the layer. A
// TileCycle is one model cycle: one template instantiated at one position.
//
// All references inside a template are relative:
//   input  (channel_base + dc, in_y + dy, in_x + dx)
//   weight (filter_base + df, weight_channel_base + dc, ky, kx)
//   output (filter_base + df, out_y + dy, out_x + dx)
// so the same template serves every sector or position group with the same
// edge conditions.

enum class ScheduleKind {
  conv3x3,    // row-sector dataflow with boundary registers (3x3, stride 1/2)
  pointwise,  // channel-parallel 1x1 dataflow
  two_phase,  // 4x4 and 5x5: columns 1-3, then the remaining columns
};

std::string_view to_string(ScheduleKind k);

struct InputRef {
  int dc = 0;
  int dy = 0;
  int dx = 0;
};

struct WeightRef {
  int df = 0;
  int dc = 0;
  int ky = 0;
  int kx = 0;
};

struct OutputRef {
  int df = 0;
  int dy = 0;
  int dx = 0;
};

/// One adder-net-1 output: the sum of the listed psums (0-based o-indices),
/// plus one word popped from `consume_lane` if set. The result is either
/// pushed to `defer_lane` or added into the channel accumulator at `target`.
struct AdderOutput {
  std::vector<std::uint8_t> psums;
  int consume_lane = -1;
  int defer_lane = -1;
  OutputRef target{};

  bool deferred() const { return defer_lane >= 0; }
};

/// Configuration of one PE matrix for one cycle.
struct MatrixTile {
  bool active = false;
  std::array<std::optional<InputRef>, kPesPerMatrix> inputs{};        // PE r*3+c
  std::array<std::optional<WeightRef>, kThreadsPerMatrix> weights{};  // (r*3+c)*3+j
  std::vector<AdderOutput> adder_net1;
  std::uint32_t useful_ops = 0;

  /// psum indices written to the boundary register this cycle.
  std::vector<std::uint8_t> defer_set() const;
  /// psum indices combined with words read from the boundary register.
  std::vector<std::uint8_t> consume_set() const;
};

struct TileTemplate {
  std::string label;
  std::array<MatrixTile, kMatrixCount> matrices{};
  std::uint32_t useful_ops = 0;
  int active_matrices = 0;
  int deferred_psums = 0;  // per active matrix
  int deferred_words = 0;  // per active matrix
};

struct Segment {
  std::uint32_t first_template = 0;
  std::uint32_t phases = 1;  // templates first_template .. +phases-1, one cycle each
  std::uint32_t repeat = 0;  // consecutive steps along x
  int filter_base = 0;
  int channel_base = 0;
  int weight_channel_base = 0;
  int in_y = 0;
  int in_x = 0;
  int in_step = 1;
  int out_y = 0;
  int out_x = 0;
  int out_step = 1;
  bool pass_start = false;  // first segment of a (filter, channel-group) pass

  std::uint64_t cycles() const { return std::uint64_t{repeat} * phases; }
};

struct TileCycle {
  std::uint64_t index = 0;
  const Segment* segment = nullptr;
  const TileTemplate* tile = nullptr;
  std::uint32_t step = 0;
  std::uint32_t phase = 0;

  int in_x() const { return segment->in_x + static_cast<int>(step) * segment->in_step; }
  int out_x() const { return segment->out_x + static_cast<int>(step) * segment->out_step; }
};

class Schedule {
 public:
  Schedule(LayerConfig cfg, ScheduleKind kind);

  const LayerConfig& config() const { return cfg_; }
  ScheduleKind kind() const { return kind_; }

  /// Pointwise schedules address the (stride-gathered) input as a single row
  /// of out_h * out_w positions.
  bool flattened() const { return kind_ == ScheduleKind::pointwise; }

  std::span<const TileTemplate> templates() const { return templates_; }
  std::span<const Segment> segments() const { return segments_; }

  std::uint64_t cycle_count() const { return cycles_; }
  std::uint64_t useful_ops() const { return useful_ops_; }
  int active_matrices() const { return active_matrices_; }
  int boundary_lanes() const { return lanes_; }
  /// Maximum FIFO length per boundary lane (the input width).
  std::size_t lane_capacity() const { return static_cast<std::size_t>(cfg_.in_w); }
  int max_deferred_psums() const { return max_deferred_psums_; }
  int max_deferred_words() const { return max_deferred_words_; }

  template <typename Fn>
  void for_each_cycle(Fn&& fn) const {
    std::uint64_t t = 0;
    for (const Segment& seg : segments_) {
      for (std::uint32_t step = 0; step < seg.repeat; ++step) {
        for (std::uint32_t ph = 0; ph < seg.phases; ++ph) {
          fn(TileCycle{t++, &seg, &templates_[seg.first_template + ph], step, ph});
        }
      }
    }
  }

  std::uint32_t add_template(TileTemplate t);
  void add_segment(const Segment& s);

  /// Test hook: corrupt one adder-net-1 wiring entry so that oracle
  /// comparison must fail. Returns false if there was nothing to corrupt.
  bool inject_wiring_fault();

 private:
  LayerConfig cfg_;
  ScheduleKind kind_;
  std::vector<TileTemplate> templates_;
  std::vector<Segment> segments_;
  std::uint64_t cycles_ = 0;
  std::uint64_t useful_ops_ = 0;
  int active_matrices_ = 0;
  int lanes_ = 0;
  int max_deferred_psums_ = 0;
  int max_deferred_words_ = 0;
};

/// Dispatch on kernel size. Throws ConfigError for unsupported layers.
Schedule plan_layer(const LayerConfig& cfg);

Schedule schedule_3x3(const LayerConfig& cfg);
Schedule schedule_1x1(const LayerConfig& cfg);
Schedule schedule_4x4(const LayerConfig& cfg);
Schedule schedule_5x5(const LayerConfig& cfg);

/// Variable-length shift registers holding boundary psums between column
/// sectors, one FIFO lane per boundary output row.
class BoundaryRegister {
 public:
  BoundaryRegister() = default;
  BoundaryRegister(int lanes, std::size_t max_length);

  /// Throws ScheduleError when the lane is full.
  void defer(int lane, PsumWord value);
  /// Throws ScheduleError when the lane is empty.
  PsumWord consume(int lane);

  bool empty() const;
  int lanes() const { return static_cast<int>(lanes_.size()); }
  std::size_t size(int lane) const { return lanes_.at(static_cast<std::size_t>(lane)).size(); }
  std::size_t max_length() const { return max_length_; }
  /// Largest total occupancy seen so far.
  std::size_t peak() const { return peak_; }

 private:
  std::vector<std::deque<PsumWord>> lanes_;
  std::size_t max_length_ = 0;
  std::size_t occupancy_ = 0;
  std::size_t peak_ = 0;
};

/// Push every deferred output of `outputs` (summed from `o`) to its lane.
void boundary_defer(BoundaryRegister& reg, const MatrixPsums& o,
                    std::span<const AdderOutput> outputs);
/// Pop the boundary word for every consuming output, in wiring order.
std::vector<PsumWord> boundary_consume(BoundaryRegister& reg, std::span<const AdderOutput> outputs);

/// Second-stage adder: running sums per output position, accumulated across
/// PE matrices and channel groups.
class ChannelAccumulator {
 public:
  explicit ChannelAccumulator(Shape output);

  void reset();
  void reset_filter(int f);
  void add(int f, int y, int x, PsumWord v);
  PsumWord value(int f, int y, int x) const { return sums_.at(f, y, x); }
  /// Element-wise saturating merge, used to combine per-matrix accumulators.
  void merge(const ChannelAccumulator& other);
  const Tensor<PsumWord>& values() const { return sums_; }

 private:
  Tensor<PsumWord> sums_;
};

/// Human-readable trace, one line per TileCycle. See README for the format.
void write_trace(std::ostream& os, const Schedule& s, std::string_view layer_name = "layer");

}  // namespace neuromax
