// SPDX-License-Identifier: Apache-2.0
#include "neuromax/dataflow.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <tuple>

#include "neuromax/errors.hpp"

namespace neuromax {

std::string_view to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::conv3x3: return "conv3x3";
    case ScheduleKind::pointwise: return "pointwise";
    case ScheduleKind::two_phase: return "two_phase";
  }
  return "?";
}

std::vector<std::uint8_t> MatrixTile::defer_set() const {
  std::vector<std::uint8_t> out;
  for (const auto& a : adder_net1) {
    if (a.deferred()) out.insert(out.end(), a.psums.begin(), a.psums.end());
  }
  return out;
}

std::vector<std::uint8_t> MatrixTile::consume_set() const {
  std::vector<std::uint8_t> out;
  for (const auto& a : adder_net1) {
    if (a.consume_lane >= 0) out.insert(out.end(), a.psums.begin(), a.psums.end());
  }
  return out;
}

Schedule::Schedule(LayerConfig cfg, ScheduleKind kind) : cfg_(cfg), kind_(kind) {}

std::uint32_t Schedule::add_template(TileTemplate t) {
  t.useful_ops = 0;
  t.active_matrices = 0;
  t.deferred_psums = 0;
  t.deferred_words = 0;
  for (auto& m : t.matrices) {
    m.useful_ops = 0;
    if (!m.active) continue;
    ++t.active_matrices;
    std::array<int, kPsumsPerMatrix> uses{};
    int deferred_psums = 0;
    int deferred_words = 0;
    for (const auto& a : m.adder_net1) {
      for (auto p : a.psums) {
        if (p >= kPsumsPerMatrix) throw ScheduleError("adder net 1: psum index out of range");
        ++uses[p];
      }
      if (a.deferred()) {
        deferred_psums += static_cast<int>(a.psums.size());
        ++deferred_words;
        lanes_ = std::max(lanes_, a.defer_lane + 1);
      }
      if (a.consume_lane >= 0) lanes_ = std::max(lanes_, a.consume_lane + 1);
    }
    for (int p = 0; p < kPsumsPerMatrix; ++p) {
      if (uses[p] > 1) throw ScheduleError("adder net 1: psum wired to more than one output");
    }
    for (int pe = 0; pe < kPesPerMatrix; ++pe) {
      if (!m.inputs[pe]) continue;
      const int r = pe / kMatrixCols;
      for (int j = 0; j < kThreadsPerPe; ++j) {
        if (m.weights[pe * kThreadsPerPe + j] && uses[r * kThreadsPerPe + j] == 1) ++m.useful_ops;
      }
    }
    t.useful_ops += m.useful_ops;
    t.deferred_psums = std::max(t.deferred_psums, deferred_psums);
    t.deferred_words = std::max(t.deferred_words, deferred_words);
  }
  max_deferred_psums_ = std::max(max_deferred_psums_, t.deferred_psums);
  max_deferred_words_ = std::max(max_deferred_words_, t.deferred_words);
  templates_.push_back(std::move(t));
  return static_cast<std::uint32_t>(templates_.size() - 1);
}

void Schedule::add_segment(const Segment& s) {
  if (s.phases == 0 || s.first_template + s.phases > templates_.size()) {
    throw ScheduleError("segment references missing templates");
  }
  if (s.repeat == 0) return;
  std::uint64_t ops = 0;
  for (std::uint32_t ph = 0; ph < s.phases; ++ph) {
    const auto& t = templates_[s.first_template + ph];
    ops += t.useful_ops;
    active_matrices_ = std::max(active_matrices_, t.active_matrices);
  }
  cycles_ += s.cycles();
  useful_ops_ += ops * s.repeat;
  segments_.push_back(s);
}

bool Schedule::inject_wiring_fault() {
  for (auto& t : templates_) {
    for (auto& m : t.matrices) {
      for (auto& a : m.adder_net1) {
        if (!m.active || a.psums.empty()) continue;
        a.psums[0] = static_cast<std::uint8_t>((a.psums[0] + 1) % kPsumsPerMatrix);
        return true;
      }
    }
  }
  return false;
}

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

// Template caches are keyed by the few facts a template depends on, so that
// large layers build only a handful of templates.
using Key = std::tuple<int, int, int, int>;

// 3x3: one tile = a 6-row column sector at one output column. PE (r, c) sees
// input (R0 + r, x*s + c); thread j holds filter tap (j, c). Row sum o[3r+j]
// therefore belongs to output row y with y*s + j = R0 + r. Outputs whose
// three rows straddle a sector boundary are split: the upper part is pushed
// to a boundary lane and completed in the next sector.
TileTemplate build_3x3_sector(const LayerConfig& cfg, int r0, int n_ch, bool depthwise) {
  const int s = cfg.stride;
  const int oh = cfg.out_h();
  const int out_base = r0 / s;
  const int r_end = r0 + kMatrixRows;  // exclusive

  std::vector<AdderOutput> consume, complete, defer;
  for (int y = std::max(0, ceil_div(r0 - 2, s)); y * s < r_end && y < oh; ++y) {
    const int ys = y * s;
    if (ys + 2 < r0) continue;
    AdderOutput a;
    for (int j = 0; j < 3; ++j) {
      const int row = ys + j;
      if (row >= r0 && row < r_end) {
        a.psums.push_back(static_cast<std::uint8_t>(3 * (row - r0) + j));
      }
    }
    a.target = OutputRef{0, y - out_base, 0};
    if (ys < r0) {
      a.consume_lane = ys - (r0 - 2);
      consume.push_back(std::move(a));
    } else if (ys + 2 >= r_end) {
      a.defer_lane = ys - (r_end - 2);
      defer.push_back(std::move(a));
    } else {
      complete.push_back(std::move(a));
    }
  }
  std::vector<AdderOutput> wiring;
  for (auto* v : {&consume, &complete, &defer}) wiring.insert(wiring.end(), v->begin(), v->end());

  TileTemplate t;
  t.label = "s" + std::to_string(s) + (r0 == 0 ? "-first" : "") +
            (r0 + kMatrixRows >= cfg.in_h ? "-last" : "");
  for (int m = 0; m < n_ch; ++m) {
    MatrixTile& mt = t.matrices[m];
    mt.active = true;
    for (int r = 0; r < kMatrixRows; ++r) {
      if (r0 + r >= cfg.in_h) continue;
      for (int c = 0; c < kMatrixCols; ++c) {
        const int pe = r * kMatrixCols + c;
        mt.inputs[pe] = InputRef{m, r, c};
        for (int j = 0; j < kThreadsPerPe; ++j) {
          mt.weights[pe * kThreadsPerPe + j] =
              depthwise ? WeightRef{m, 0, j, c} : WeightRef{0, m, j, c};
        }
      }
    }
    mt.adder_net1 = wiring;
    if (depthwise) {
      for (auto& a : mt.adder_net1) a.target.df = m;
    }
  }
  return t;
}

}  // namespace

Schedule schedule_3x3(const LayerConfig& cfg) {
  cfg.validate();
  if (cfg.kernel != 3) throw ConfigError("schedule_3x3: kernel must be 3");
  const bool depthwise = cfg.type == ConvType::depthwise;
  Schedule sched(cfg, ScheduleKind::conv3x3);
  std::map<Key, std::uint32_t> cache;
  const int groups = ceil_div(cfg.in_c, kMatrixCount);
  const int sectors = ceil_div(cfg.in_h, kMatrixRows);
  const int filters = depthwise ? 1 : cfg.out_c;
  const auto ow = static_cast<std::uint32_t>(cfg.out_w());

  for (int f = 0; f < filters; ++f) {
    for (int g = 0; g < groups; ++g) {
      const int n_ch = std::min(kMatrixCount, cfg.in_c - g * kMatrixCount);
      for (int q = 0; q < sectors; ++q) {
        const int r0 = q * kMatrixRows;
        const Key key{n_ch, r0 == 0, std::min(cfg.in_h - r0, 8), 0};
        auto it = cache.find(key);
        if (it == cache.end()) {
          it = cache.emplace(key, sched.add_template(build_3x3_sector(cfg, r0, n_ch, depthwise)))
                   .first;
        }
        Segment seg;
        seg.first_template = it->second;
        seg.repeat = ow;
        seg.filter_base = depthwise ? g * kMatrixCount : f;
        seg.channel_base = g * kMatrixCount;
        seg.weight_channel_base = depthwise ? 0 : g * kMatrixCount;
        seg.in_y = r0;
        seg.in_step = cfg.stride;
        seg.out_y = r0 / cfg.stride;
        seg.pass_start = q == 0;
        sched.add_segment(seg);
      }
    }
  }
  return sched;
}

// 1x1: spatial positions are flattened (stride-gathered). PE row r takes
// position p0 + r, PE column c takes channel 3m + c of the pass, and thread
// j holds filter j of the filter group. o[3r+j] is that position's partial
// dot product over the matrix's three channels; the channel accumulator sums
// matrices and passes.
Schedule schedule_1x1(const LayerConfig& cfg) {
  cfg.validate();
  if (cfg.kernel != 1) throw ConfigError("schedule_1x1: kernel must be 1");
  Schedule sched(cfg, ScheduleKind::pointwise);
  std::map<Key, std::uint32_t> cache;
  constexpr int kPassChannels = kMatrixCount * kMatrixCols;  // 18
  const int positions = cfg.out_w() * cfg.out_h();
  const int passes = ceil_div(cfg.in_c, kPassChannels);
  const int fgroups = ceil_div(cfg.out_c, kThreadsPerPe);

  auto get = [&](int n_ch, int n_f, int n_pos) {
    const Key key{n_ch, n_f, n_pos, 0};
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    TileTemplate t;
    t.label = "pw-c" + std::to_string(n_ch) + "-f" + std::to_string(n_f) + "-p" +
              std::to_string(n_pos);
    for (int m = 0; m < kMatrixCount && m * kMatrixCols < n_ch; ++m) {
      MatrixTile& mt = t.matrices[m];
      mt.active = true;
      for (int r = 0; r < n_pos; ++r) {
        for (int c = 0; c < kMatrixCols; ++c) {
          const int ch = m * kMatrixCols + c;
          if (ch >= n_ch) continue;
          const int pe = r * kMatrixCols + c;
          mt.inputs[pe] = InputRef{ch, 0, r};
          for (int j = 0; j < n_f; ++j) mt.weights[pe * kThreadsPerPe + j] = WeightRef{j, ch, 0, 0};
        }
        for (int j = 0; j < n_f; ++j) {
          AdderOutput a;
          a.psums = {static_cast<std::uint8_t>(r * kThreadsPerPe + j)};
          a.target = OutputRef{j, 0, r};
          mt.adder_net1.push_back(std::move(a));
        }
      }
    }
    const auto id = sched.add_template(std::move(t));
    cache.emplace(key, id);
    return id;
  };

  for (int pass = 0; pass < passes; ++pass) {
    const int n_ch = std::min(kPassChannels, cfg.in_c - pass * kPassChannels);
    for (int fg = 0; fg < fgroups; ++fg) {
      const int n_f = std::min(kThreadsPerPe, cfg.out_c - fg * kThreadsPerPe);
      Segment seg;
      seg.filter_base = fg * kThreadsPerPe;
      seg.channel_base = pass * kPassChannels;
      seg.weight_channel_base = seg.channel_base;
      seg.in_step = kMatrixRows;
      seg.out_step = kMatrixRows;
      seg.pass_start = true;
      const int full = positions / kMatrixRows;
      if (full > 0) {
        seg.first_template = get(n_ch, n_f, kMatrixRows);
        seg.repeat = static_cast<std::uint32_t>(full);
        sched.add_segment(seg);
        seg.pass_start = false;
      }
      if (const int rem = positions % kMatrixRows; rem > 0) {
        seg.first_template = get(n_ch, n_f, rem);
        seg.repeat = 1;
        seg.in_x = seg.out_x = full * kMatrixRows;
        sched.add_segment(seg);
      }
    }
  }
  return sched;
}

namespace {

// Filter rows held by thread j of PE row r in the two-phase schedules. The
// lower three PE rows reuse threads for the taps the upper rows lack.
int two_phase_row(int kernel, int r, int j) {
  static constexpr int k5[3][3] = {{3, 4, 2}, {3, 4, 2}, {3, 4, 2}};
  static constexpr int k4[3][3] = {{3, 2, 1}, {3, 2, 1}, {3, 2, 1}};
  if (r < 3) return j;
  return kernel == 5 ? k5[r - 3][j] : k4[r - 3][j];
}

int two_phase_outputs(int kernel, int stride) {
  if (kernel == 5) return stride == 1 ? 2 : 1;
  return stride == 1 ? 3 : 2;
}

// One 6-row tile of a 4x4/5x5 layer. Phase 0 covers filter columns 0..2 on
// PE columns 0..2; phase 1 covers the remaining columns. Both phases share
// the adder-net-1 wiring; the channel accumulator adds them.
std::array<TileTemplate, 2> build_two_phase(const LayerConfig& cfg, int r0, int n_ch, int n_valid) {
  const int k = cfg.kernel;
  const int s = cfg.stride;
  std::vector<AdderOutput> wiring;
  std::array<bool, kPsumsPerMatrix> used{};
  for (int dy = 0; dy < n_valid; ++dy) {
    AdderOutput a;
    a.target = OutputRef{0, dy, 0};
    for (int ky = 0; ky < k; ++ky) {
      const int r = dy * s + ky;
      int found = -1;
      for (int j = 0; j < kThreadsPerPe && r < kMatrixRows; ++j) {
        if (two_phase_row(k, r, j) == ky && !used[r * kThreadsPerPe + j]) {
          found = j;
          break;
        }
      }
      if (found < 0) throw std::logic_error("two-phase wiring: no free thread for filter row");
      used[r * kThreadsPerPe + found] = true;
      a.psums.push_back(static_cast<std::uint8_t>(r * kThreadsPerPe + found));
    }
    wiring.push_back(std::move(a));
  }

  std::array<TileTemplate, 2> phases;
  for (int ph = 0; ph < 2; ++ph) {
    TileTemplate& t = phases[ph];
    t.label = "k" + std::to_string(k) + "s" + std::to_string(s) + "-ph" + std::to_string(ph) +
              "-n" + std::to_string(n_valid);
    for (int m = 0; m < n_ch; ++m) {
      MatrixTile& mt = t.matrices[m];
      mt.active = true;
      for (int r = 0; r < kMatrixRows; ++r) {
        if (r0 + r >= cfg.in_h) continue;
        for (int c = 0; c < kMatrixCols; ++c) {
          const int kx = ph * kMatrixCols + c;
          if (kx >= k) continue;
          const int pe = r * kMatrixCols + c;
          mt.inputs[pe] = InputRef{m, r, kx};
          for (int j = 0; j < kThreadsPerPe; ++j) {
            const int ky = two_phase_row(k, r, j);
            if (ky < k) mt.weights[pe * kThreadsPerPe + j] = WeightRef{0, m, ky, kx};
          }
        }
      }
      mt.adder_net1 = wiring;
    }
  }
  return phases;
}

Schedule schedule_two_phase(const LayerConfig& cfg) {
  cfg.validate();
  Schedule sched(cfg, ScheduleKind::two_phase);
  std::map<Key, std::uint32_t> cache;
  const int n_out = two_phase_outputs(cfg.kernel, cfg.stride);
  const int oh = cfg.out_h();
  const int tiles = ceil_div(oh, n_out);
  const int groups = ceil_div(cfg.in_c, kMatrixCount);

  for (int f = 0; f < cfg.out_c; ++f) {
    for (int g = 0; g < groups; ++g) {
      const int n_ch = std::min(kMatrixCount, cfg.in_c - g * kMatrixCount);
      for (int tile = 0; tile < tiles; ++tile) {
        const int r0 = tile * n_out * cfg.stride;
        const int n_valid = std::min(n_out, oh - tile * n_out);
        const Key key{n_ch, std::min(cfg.in_h - r0, kMatrixRows), n_valid, 0};
        auto it = cache.find(key);
        if (it == cache.end()) {
          auto ph = build_two_phase(cfg, r0, n_ch, n_valid);
          const auto first = sched.add_template(std::move(ph[0]));
          sched.add_template(std::move(ph[1]));
          it = cache.emplace(key, first).first;
        }
        Segment seg;
        seg.first_template = it->second;
        seg.phases = 2;
        seg.repeat = static_cast<std::uint32_t>(cfg.out_w());
        seg.filter_base = f;
        seg.channel_base = g * kMatrixCount;
        seg.weight_channel_base = g * kMatrixCount;
        seg.in_y = r0;
        seg.in_step = cfg.stride;
        seg.out_y = tile * n_out;
        seg.pass_start = tile == 0;
        sched.add_segment(seg);
      }
    }
  }
  return sched;
}

}  // namespace

Schedule schedule_4x4(const LayerConfig& cfg) {
  if (cfg.kernel != 4) throw ConfigError("schedule_4x4: kernel must be 4");
  return schedule_two_phase(cfg);
}

Schedule schedule_5x5(const LayerConfig& cfg) {
  if (cfg.kernel != 5) throw ConfigError("schedule_5x5: kernel must be 5");
  return schedule_two_phase(cfg);
}

Schedule plan_layer(const LayerConfig& cfg) {
  cfg.validate();
  switch (cfg.kernel) {
    case 1: return schedule_1x1(cfg);
    case 3: return schedule_3x3(cfg);
    case 4: return schedule_4x4(cfg);
    case 5: return schedule_5x5(cfg);
    default: break;
  }
  throw ConfigError("unsupported kernel size " + std::to_string(cfg.kernel));
}

BoundaryRegister::BoundaryRegister(int lanes, std::size_t max_length)
    : lanes_(static_cast<std::size_t>(std::max(lanes, 0))), max_length_(max_length) {}

void BoundaryRegister::defer(int lane, PsumWord value) {
  if (lane < 0 || lane >= lanes()) throw ScheduleError("boundary register: no such lane");
  auto& q = lanes_[static_cast<std::size_t>(lane)];
  if (q.size() >= max_length_) {
    throw ScheduleError("boundary register overflow on lane " + std::to_string(lane));
  }
  q.push_back(value);
  peak_ = std::max(peak_, ++occupancy_);
}

PsumWord BoundaryRegister::consume(int lane) {
  if (lane < 0 || lane >= lanes()) throw ScheduleError("boundary register: no such lane");
  auto& q = lanes_[static_cast<std::size_t>(lane)];
  if (q.empty()) throw ScheduleError("boundary register underflow on lane " + std::to_string(lane));
  const PsumWord v = q.front();
  q.pop_front();
  --occupancy_;
  return v;
}

bool BoundaryRegister::empty() const { return occupancy_ == 0; }

void boundary_defer(BoundaryRegister& reg, const MatrixPsums& o,
                    std::span<const AdderOutput> outputs) {
  for (const auto& a : outputs) {
    if (!a.deferred()) continue;
    PsumWord sum = 0;
    for (auto p : a.psums) sum = saturating_add(sum, o[p]);
    reg.defer(a.defer_lane, sum);
  }
}

std::vector<PsumWord> boundary_consume(BoundaryRegister& reg, std::span<const AdderOutput> outputs) {
  std::vector<PsumWord> words;
  for (const auto& a : outputs) {
    if (a.consume_lane >= 0) words.push_back(reg.consume(a.consume_lane));
  }
  return words;
}

ChannelAccumulator::ChannelAccumulator(Shape output) : sums_(output) {}

void ChannelAccumulator::reset() { std::fill(sums_.data().begin(), sums_.data().end(), 0); }

void ChannelAccumulator::reset_filter(int f) {
  const auto plane = static_cast<std::size_t>(sums_.shape().h) * sums_.shape().w;
  auto first = sums_.data().begin() + static_cast<std::ptrdiff_t>(plane * f);
  std::fill(first, first + static_cast<std::ptrdiff_t>(plane), 0);
}

void ChannelAccumulator::add(int f, int y, int x, PsumWord v) {
  auto& cell = sums_.at(f, y, x);
  cell = saturating_add(cell, v);
}

void ChannelAccumulator::merge(const ChannelAccumulator& other) {
  if (!(other.sums_.shape() == sums_.shape())) throw ShapeError("accumulator merge: shape mismatch");
  auto& dst = sums_.data();
  const auto& src = other.sums_.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = saturating_add(dst[i], src[i]);
}

}  // namespace neuromax
