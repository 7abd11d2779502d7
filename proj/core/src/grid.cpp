// SPDX-License-Identifier: Apache-2.0
#include "neuromax/grid.hpp"

#include <algorithm>
#include <future>
#include <string>
#include <vector>

#include "neuromax/errors.hpp"

namespace neuromax {

SramModel SramModel::split(std::uint64_t total_bytes) {
  SramModel m;
  m.weight_bytes = total_bytes / 3;
  m.input_bytes = total_bytes / 3;
  const std::uint64_t rest = total_bytes - m.weight_bytes - m.input_bytes;
  m.output_bytes = rest / 2;
  m.accum_bytes = rest - m.output_bytes;
  return m;
}

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

struct WorkingSet {
  std::uint64_t input, weight, output, accum;
};

WorkingSet working_set(const LayerConfig& cfg, std::uint64_t band_rows, std::uint64_t chunk) {
  const bool dw = cfg.type == ConvType::depthwise;
  const std::uint64_t k = static_cast<std::uint64_t>(cfg.kernel);
  const std::uint64_t in_rows = (band_rows - 1) * static_cast<std::uint64_t>(cfg.stride) + k;
  const std::uint64_t in_ch = dw ? chunk : static_cast<std::uint64_t>(cfg.in_c);
  const std::uint64_t ow = static_cast<std::uint64_t>(cfg.out_w());
  // Filters whose accumulators are live at once.
  const std::uint64_t live = dw ? std::min<std::uint64_t>(chunk, kMatrixCount)
                                : (cfg.kernel == 1 ? std::min<std::uint64_t>(chunk, kThreadsPerPe) : 1);
  return {in_ch * in_rows * static_cast<std::uint64_t>(cfg.in_w),
          chunk * (dw ? 1 : static_cast<std::uint64_t>(cfg.in_c)) * k * k, chunk * band_rows * ow,
          live * band_rows * ow * kAccumWordBytes};
}

bool fits(const WorkingSet& w, const SramModel& s) {
  return w.input <= s.input_bytes && w.weight <= s.weight_bytes && w.output <= s.output_bytes &&
         w.accum <= s.accum_bytes;
}

}  // namespace

SramPlan tile_for_sram(const LayerConfig& cfg, const SramModel& sram) {
  cfg.validate();
  const bool dw = cfg.type == ConvType::depthwise;
  const std::uint64_t oh = static_cast<std::uint64_t>(cfg.out_h());
  const std::uint64_t chunked = static_cast<std::uint64_t>(dw ? cfg.in_c : cfg.out_c);
  const std::uint64_t k2 = static_cast<std::uint64_t>(cfg.kernel) * cfg.kernel;
  const std::uint64_t total_weights = cfg.weight_shape().count();
  const std::uint64_t total_output = cfg.output_shape().count();

  {
    // One 6x3 input tile per active matrix plus one weight broadcast.
    const std::uint64_t tile_in = std::uint64_t{kPesPerMatrix} * kMatrixCount;
    const std::uint64_t tile_w = k2 * kMatrixCount;
    if (tile_in > sram.input_bytes || tile_w > sram.weight_bytes || sram.output_bytes == 0 ||
        sram.accum_bytes < kAccumWordBytes) {
      throw ConfigError("SRAM too small for a single tile and weight broadcast");
    }
  }

  SramPlan best;
  bool found = false;
  std::uint64_t best_tiles = 0;
  const std::uint64_t chunk_limit = std::max<std::uint64_t>(chunked, 1);
  std::uint64_t prev_chunk = 0;
  for (std::uint64_t nc = 1; nc <= chunk_limit; ++nc) {
    const std::uint64_t chunk = ceil_div(chunk_limit, nc);
    if (chunk == prev_chunk) continue;
    prev_chunk = chunk;
    const std::uint64_t chunks = ceil_div(chunk_limit, chunk);
    if (!fits(working_set(cfg, 1, chunk), sram)) continue;
    std::uint64_t lo = 1, hi = oh;  // largest band that fits
    while (lo < hi) {
      const std::uint64_t mid = (lo + hi + 1) / 2;
      if (fits(working_set(cfg, mid, chunk), sram)) lo = mid; else hi = mid - 1;
    }
    const std::uint64_t band = lo;
    const std::uint64_t bands = ceil_div(oh, band);
    const std::uint64_t tiles = bands * chunks;

    SramPlan plan;
    plan.row_bands = static_cast<int>(bands);
    plan.filter_chunks = static_cast<int>(chunks);
    for (std::uint64_t b = 0; b < bands; ++b) {
      const std::uint64_t rows = std::min(band, oh - b * band);
      const std::uint64_t in_rows = (rows - 1) * static_cast<std::uint64_t>(cfg.stride) + cfg.kernel;
      plan.ddr_input_bytes += in_rows * static_cast<std::uint64_t>(cfg.in_w) * cfg.in_c;
    }
    plan.ddr_weight_bytes = (chunks == 1 ? 1 : bands) * total_weights;
    plan.ddr_output_bytes = total_output;
    const WorkingSet ws = working_set(cfg, band, chunk);
    plan.peak_input = ws.input;
    plan.peak_weight = ws.weight;
    plan.peak_output = ws.output;
    plan.peak_accum = ws.accum;

    if (!found || tiles < best_tiles ||
        (tiles == best_tiles && plan.ddr_bytes() < best.ddr_bytes())) {
      best = std::move(plan);
      best_tiles = tiles;
      found = true;
      // Tiles listed lazily below for the winner only.
      best.tiles.clear();
      best.tiles.reserve(static_cast<std::size_t>(tiles));
      for (std::uint64_t b = 0; b < bands; ++b) {
        const int y0 = static_cast<int>(b * band);
        const int rows = static_cast<int>(std::min(band, oh - b * band));
        for (std::uint64_t c = 0; c < chunks; ++c) {
          SramTile t;
          t.out_y = y0;
          t.out_rows = rows;
          t.filter = static_cast<int>(c * chunk);
          t.filters = static_cast<int>(std::min(chunk, chunk_limit - c * chunk));
          t.sub = cfg;
          t.sub.in_h = (rows - 1) * cfg.stride + cfg.kernel;
          if (dw) {
            t.sub.in_c = t.sub.out_c = t.filters;
          } else {
            t.sub.out_c = t.filters;
          }
          best.tiles.push_back(t);
        }
      }
    }
    if (chunks == 1 && bands == 1) break;  // cannot do better
  }
  if (!found) {
    throw ConfigError("layer does not fit the SRAM even as one output row of one filter");
  }
  return best;
}

Tensor<LogCode> post_process(const Tensor<PsumWord>& psums, const LogTable& table) {
  Tensor<LogCode> out(psums.shape());
  for (std::size_t i = 0; i < psums.size(); ++i) {
    const PsumWord v = psums.data()[i];
    out.data()[i] = v <= 0 ? LogCode::zero_code() : table.lookup(v);
  }
  return out;
}

namespace {

// Pointwise schedules address the input as one row of stride-gathered positions.
Tensor<LogCode> gather_positions(const Tensor<LogCode>& in, const LayerConfig& cfg) {
  const int oh = cfg.out_h();
  const int ow = cfg.out_w();
  Tensor<LogCode> g(Shape{1, cfg.in_c, 1, oh * ow});
  for (int c = 0; c < cfg.in_c; ++c) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) g.at(c, 0, y * ow + x) = in.at(c, y * cfg.stride, x * cfg.stride);
    }
  }
  return g;
}

struct MatrixRunner {
  const Tensor<LogCode>& input;
  const Tensor<LogCode>& weights;
  const ThreadLut& lut;
  ChannelAccumulator& acc;
  BoundaryRegister& reg;
  ThreadCounters& counters;

  void operator()(const MatrixTile& mt, const TileCycle& t) {
    const Segment& seg = *t.segment;
    const Shape& is = input.shape();
    const Shape& ws = weights.shape();
    const Shape& os = acc.values().shape();
    const int in_x = t.in_x();
    const int out_x = t.out_x();

    MatrixInputs ins{};
    MatrixWeights wts{};
    for (int pe = 0; pe < kPesPerMatrix; ++pe) {
      if (const auto& r = mt.inputs[pe]) {
        const int c = seg.channel_base + r->dc;
        const int y = seg.in_y + r->dy;
        const int x = in_x + r->dx;
        if (c >= is.c || y >= is.h || x >= is.w || c < 0 || y < 0 || x < 0) {
          throw ScheduleError("tile reads outside the input at cycle " + std::to_string(t.index));
        }
        ins[pe] = input.at(c, y, x);
      }
      for (int j = 0; j < kThreadsPerPe; ++j) {
        if (const auto& w = mt.weights[pe * kThreadsPerPe + j]) {
          const int f = seg.filter_base + w->df;
          const int c = seg.weight_channel_base + w->dc;
          if (f >= ws.n || c >= ws.c || f < 0 || c < 0) {
            throw ScheduleError("weight broadcast outside the weight tensor at cycle " +
                                std::to_string(t.index));
          }
          wts[pe][j] = weights.at(f, c, w->ky, w->kx);
        }
      }
    }
    const MatrixPsums o = adder_net0(matrix_compute(ins, wts, lut, &counters));
    const std::vector<PsumWord> carried = boundary_consume(reg, mt.adder_net1);
    std::size_t next = 0;
    for (const AdderOutput& a : mt.adder_net1) {
      if (a.deferred()) continue;
      PsumWord sum = 0;
      for (auto p : a.psums) sum = saturating_add(sum, o[p]);
      if (a.consume_lane >= 0) sum = saturating_add(sum, carried[next++]);
      const int f = seg.filter_base + a.target.df;
      const int y = seg.out_y + a.target.dy;
      const int x = out_x + a.target.dx;
      if (f < 0 || y < 0 || x < 0 || f >= os.c || y >= os.h || x >= os.w) {
        throw ScheduleError("adder net 1 writes outside the output at cycle " +
                            std::to_string(t.index));
      }
      acc.add(f, y, x, sum);
    }
    boundary_defer(reg, o, mt.adder_net1);
  }
};

void require_empty(const BoundaryRegister& reg, const TileCycle* t) {
  if (!reg.empty()) {
    throw ScheduleError(t ? "boundary register not empty at pass start, cycle " +
                                std::to_string(t->index)
                          : std::string("boundary register not empty after the last cycle"));
  }
}

bool starts_pass(const TileCycle& t) {
  return t.segment->pass_start && t.step == 0 && t.phase == 0;
}

}  // namespace

Tensor<PsumWord> execute_schedule(const Schedule& s, const Tensor<LogCode>& input,
                                  const Tensor<LogCode>& weights, const ThreadLut& lut,
                                  const FixedFormat& psum_format, bool parallel, ExecStats* stats) {
  const LayerConfig& cfg = s.config();
  if (!(input.shape() == cfg.input_shape())) {
    throw ShapeError("input " + input.shape().str() + " does not match layer " +
                     cfg.input_shape().str());
  }
  if (!(weights.shape() == cfg.weight_shape())) {
    throw ShapeError("weights " + weights.shape().str() + " do not match layer " +
                     cfg.weight_shape().str());
  }
  const Tensor<LogCode> gathered = s.flattened() ? gather_positions(input, cfg) : Tensor<LogCode>{};
  const Tensor<LogCode>& in = s.flattened() ? gathered : input;
  const Shape out_shape = s.flattened() ? Shape{1, cfg.out_c, 1, cfg.out_w() * cfg.out_h()}
                                        : cfg.output_shape();

  ChannelAccumulator acc(out_shape);
  ExecStats local;
  if (!parallel) {
    std::vector<BoundaryRegister> regs(kMatrixCount,
                                       BoundaryRegister(s.boundary_lanes(), s.lane_capacity()));
    s.for_each_cycle([&](const TileCycle& t) {
      for (int m = 0; m < kMatrixCount; ++m) {
        const MatrixTile& mt = t.tile->matrices[m];
        if (!mt.active) continue;
        if (starts_pass(t)) require_empty(regs[m], &t);
        MatrixRunner{in, weights, lut, acc, regs[m], local.threads}(mt, t);
      }
    });
    for (const auto& r : regs) {
      require_empty(r, nullptr);
      local.boundary_peak = std::max(local.boundary_peak, r.peak());
    }
  } else {
    struct Part {
      ChannelAccumulator acc;
      ThreadCounters counters;
      std::size_t peak = 0;
    };
    std::vector<std::future<Part>> jobs;
    for (int m = 0; m < kMatrixCount; ++m) {
      jobs.push_back(std::async(std::launch::async, [&, m] {
        Part part{ChannelAccumulator(out_shape), {}, 0};
        BoundaryRegister reg(s.boundary_lanes(), s.lane_capacity());
        s.for_each_cycle([&](const TileCycle& t) {
          const MatrixTile& mt = t.tile->matrices[m];
          if (!mt.active) return;
          if (starts_pass(t)) require_empty(reg, &t);
          MatrixRunner{in, weights, lut, part.acc, reg, part.counters}(mt, t);
        });
        require_empty(reg, nullptr);
        part.peak = reg.peak();
        return part;
      }));
    }
    // Merge in matrix order so the result never depends on thread timing.
    for (auto& j : jobs) {
      Part part = j.get();
      acc.merge(part.acc);
      local.threads.products += part.counters.products;
      local.threads.saturations += part.counters.saturations;
      local.boundary_peak = std::max(local.boundary_peak, part.peak);
    }
  }

  Tensor<PsumWord> out(cfg.output_shape());
  const auto& sums = acc.values().data();
  for (std::size_t i = 0; i < sums.size(); ++i) out.data()[i] = clamp_to_format(sums[i], psum_format);
  if (stats) *stats = local;
  return out;
}

ConvCore::ConvCore(CoreConfig cfg)
    : cfg_(cfg),
      lut_(ThreadLut::build(cfg.quant, cfg.psum_format)),
      table_(build_log_table(cfg.quant, cfg.psum_format, cfg.log_table_cap)) {
  if (!(cfg_.clock_hz > 0.0)) throw ConfigError("clock frequency must be positive");
}

LayerResult ConvCore::run_layer(const LayerConfig& cfg, const Tensor<LogCode>& input,
                                const Tensor<LogCode>& weights) const {
  return run_schedule(plan_layer(cfg), input, weights);
}

LayerResult ConvCore::run_schedule(const Schedule& s, const Tensor<LogCode>& input,
                                   const Tensor<LogCode>& weights) const {
  LayerResult r;
  r.sram = tile_for_sram(s.config(), cfg_.sram);
  if (r.sram.ddr_psum_bytes != 0) throw ScheduleError("plan spills partial sums to DDR");
  r.psums = execute_schedule(s, input, weights, lut_, cfg_.psum_format, cfg_.parallel, &r.stats);
  r.output = post_process(r.psums, table_);
  r.metrics = measure(s, cfg_.clock_hz, {}, r.sram.ddr_bytes());
  return r;
}

PoolLayer avg_pool_3x3(int in_w, int in_h, int channels, int stride, const QuantParams& p) {
  PoolLayer pool;
  pool.cfg = LayerConfig{3, stride, in_w, in_h, channels, channels, ConvType::depthwise};
  pool.cfg.validate();
  pool.weights = Tensor<LogCode>(pool.cfg.weight_shape(), log_quantize(1.0 / 9.0, p));
  return pool;
}

}  // namespace neuromax
