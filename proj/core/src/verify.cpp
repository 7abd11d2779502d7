// SPDX-License-Identifier: Apache-2.0
#include "neuromax/verify.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <ostream>
#include <vector>

#include "neuromax/errors.hpp"
#include "neuromax/grid.hpp"
#include "neuromax/reference.hpp"

namespace neuromax {

std::string describe(const LayerConfig& c) {
  return fmt::format("{} k={} s={} in={}x{}x{} out_c={}", to_string(c.type), c.kernel, c.stride,
                     c.in_w, c.in_h, c.in_c, c.out_c);
}

LayerConfig random_layer(std::mt19937_64& rng, const VerifyLimits& lim) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  static constexpr int kernels[] = {1, 3, 4, 5};
  LayerConfig c;
  c.kernel = kernels[pick(0, 3)];
  c.stride = pick(1, 2);
  c.in_w = pick(c.kernel, std::max(c.kernel, lim.max_spatial));
  c.in_h = pick(c.kernel, std::max(c.kernel, lim.max_spatial));
  c.in_c = pick(1, lim.max_channels);
  c.out_c = pick(1, lim.max_filters);
  if (c.kernel == 1) {
    c.type = pick(0, 1) ? ConvType::pointwise : ConvType::standard;
  } else if (c.kernel == 3 && pick(0, 3) == 0) {
    c.type = ConvType::depthwise;
    c.in_c = pick(1, std::min(lim.max_channels, lim.max_filters));
    c.out_c = c.in_c;
  }
  return c;
}

Tensor<LogCode> random_codes(std::mt19937_64& rng, Shape s, bool signed_values, int lo, int hi,
                             double zero_fraction) {
  Tensor<LogCode> t(s);
  std::uniform_int_distribution<int> exp(lo, hi);
  std::bernoulli_distribution zero(zero_fraction);
  std::bernoulli_distribution neg(0.5);
  for (auto& v : t.data()) {
    const bool z = zero(rng);
    const int e = exp(rng);
    const bool n = signed_values && neg(rng);
    v = z ? LogCode::zero_code() : LogCode::of(e, n);
  }
  return t;
}

std::optional<Mismatch> first_mismatch(const Tensor<PsumWord>& got, const Tensor<PsumWord>& want) {
  if (!(got.shape() == want.shape())) {
    throw ShapeError("compare: " + got.shape().str() + " vs " + want.shape().str());
  }
  const Shape& s = got.shape();
  for (int f = 0; f < s.c; ++f) {
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        if (got.at(f, y, x) != want.at(f, y, x)) {
          return Mismatch{f, y, x, got.at(f, y, x), want.at(f, y, x)};
        }
      }
    }
  }
  return std::nullopt;
}

std::string check_coverage(const Schedule& s) {
  const LayerConfig& cfg = s.config();
  const bool dw = cfg.type == ConvType::depthwise;
  const int k = cfg.kernel;
  const int st = cfg.stride;
  const int oh = cfg.out_h();
  const int ow = cfg.out_w();
  const int ceff = dw ? 1 : cfg.in_c;
  const int filters = dw ? cfg.in_c : cfg.out_c;
  std::vector<std::uint8_t> seen(cfg.macs(), 0);
  std::string err;

  s.for_each_cycle([&](const TileCycle& t) {
    if (!err.empty()) return;
    const Segment& seg = *t.segment;
    for (int m = 0; m < kMatrixCount && err.empty(); ++m) {
      const MatrixTile& mt = t.tile->matrices[m];
      if (!mt.active) continue;
      for (const AdderOutput& a : mt.adder_net1) {
        const int f = seg.filter_base + a.target.df;
        int y = seg.out_y + a.target.dy;
        int x = t.out_x() + a.target.dx;
        if (s.flattened()) {
          if (y != 0) {
            err = "pointwise output row must be 0";
            return;
          }
          y = x / ow;
          x = x % ow;
        }
        if (f < 0 || f >= filters || y < 0 || y >= oh || x < 0 || x >= ow) {
          err = fmt::format("cycle {}: output ({}, {}, {}) out of range", t.index, f, y, x);
          return;
        }
        for (auto p : a.psums) {
          const int r = p / kThreadsPerPe;
          const int j = p % kThreadsPerPe;
          for (int c = 0; c < kMatrixCols; ++c) {
            const int pe = r * kMatrixCols + c;
            const auto& in = mt.inputs[pe];
            const auto& w = mt.weights[pe * kThreadsPerPe + j];
            if (!in || !w) continue;
            const int ch = seg.channel_base + in->dc;
            int iy = seg.in_y + in->dy;
            int ix = t.in_x() + in->dx;
            if (s.flattened()) {
              iy = (ix / ow) * st;
              ix = (ix % ow) * st;
            }
            const int wf = seg.filter_base + w->df;
            const int wc = seg.weight_channel_base + w->dc;
            const bool ok = wf == f && (dw ? (ch == f && wc == 0) : wc == ch) && ch < cfg.in_c &&
                            w->ky >= 0 && w->ky < k && w->kx >= 0 && w->kx < k &&
                            iy == y * st + w->ky && ix == x * st + w->kx;
            if (!ok) {
              err = fmt::format(
                  "cycle {} matrix {} o{}: product (in c{} y{} x{}, w f{} c{} {}x{}) "
                  "wired to output ({}, {}, {})",
                  t.index, m, p + 1, ch, iy, ix, wf, wc, w->ky, w->kx, f, y, x);
              return;
            }
            const std::size_t idx =
                ((((static_cast<std::size_t>(f) * ceff + (dw ? 0 : ch)) * oh + y) * ow + x) * k +
                 w->ky) * k + w->kx;
            if (++seen[idx] > 1) {
              err = fmt::format("cycle {}: product f{} c{} ({}, {}) tap {}x{} computed twice",
                                t.index, f, ch, y, x, w->ky, w->kx);
              return;
            }
          }
        }
      }
    }
  });
  if (!err.empty()) return err;
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i] != 1) return fmt::format("product #{} never computed", i);
  }
  return {};
}

namespace {

struct Shared {
  ThreadLut lut = ThreadLut::build(QuantParams{});
  LogTable table = build_log_table(QuantParams{}, kDefaultPsumFormat);
};

const Shared& shared() {
  static const Shared s;
  return s;
}

VerifyFailure failure(const LayerConfig& cfg, std::string property, std::string detail,
                      std::optional<Mismatch> where = std::nullopt) {
  return VerifyFailure{0, cfg, std::move(property), std::move(detail), where};
}

}  // namespace

std::optional<VerifyFailure> verify_layer(const LayerConfig& cfg, std::uint64_t data_seed,
                                          const VerifyOptions& opt) {
  const Shared& sh = shared();
  Schedule plan = plan_layer(cfg);
  if (opt.inject_fault) plan.inject_wiring_fault();

  std::mt19937_64 rng(data_seed);
  const Tensor<LogCode> input = random_codes(rng, cfg.input_shape(), false, -12, 6);
  const Tensor<LogCode> weights = random_codes(rng, cfg.weight_shape(), true, -14, 3);
  const Tensor<PsumWord> want = conv2d_quant_oracle(input, weights, cfg);

  Tensor<PsumWord> got;
  try {
    got = execute_schedule(plan, input, weights, sh.lut, kDefaultPsumFormat, false);
  } catch (const ScheduleError& e) {
    return failure(cfg, "boundary register", e.what());
  }
  if (auto mm = first_mismatch(got, want)) {
    return failure(cfg, "oracle equivalence",
                   fmt::format("psum differs at filter {} y {} x {}: got {} want {}", mm->f, mm->y,
                               mm->x, mm->got, mm->want),
                   mm);
  }
  const Tensor<LogCode> post = post_process(got, sh.table);
  const Tensor<LogCode> post_want = relu_requantize_oracle(want);
  for (std::size_t i = 0; i < post.size(); ++i) {
    if (!(post.data()[i] == post_want.data()[i])) {
      return failure(cfg, "requantization", fmt::format("log code differs at flat index {}", i));
    }
  }
  if (plan.useful_ops() != cfg.macs()) {
    return failure(cfg, "conservation of work",
                   fmt::format("schedule counts {} useful ops, layer has {} MACs", plan.useful_ops(),
                               cfg.macs()));
  }
  if (auto err = check_coverage(plan); !err.empty()) {
    return failure(cfg, "coverage/exclusivity", err);
  }
  if (cfg.kernel == 3 && cfg.stride == 1 && plan.max_deferred_psums() > 3) {
    return failure(cfg, "psum storage",
                   fmt::format("{} psums deferred in one cycle", plan.max_deferred_psums()));
  }
  if (opt.check_parallel) {
    const Tensor<PsumWord> par = execute_schedule(plan, input, weights, sh.lut, kDefaultPsumFormat, true);
    if (auto mm = first_mismatch(par, got)) {
      return failure(cfg, "determinism",
                     fmt::format("parallel run differs at filter {} y {} x {}", mm->f, mm->y, mm->x),
                     mm);
    }
  }
  return std::nullopt;
}

namespace {

// Greedy shrink: keep any one-step reduction that still fails.
VerifyFailure minimize(VerifyFailure f, std::uint64_t data_seed, const VerifyOptions& opt) {
  for (int round = 0; round < 200; ++round) {
    bool progressed = false;
    const LayerConfig c = f.cfg;
    std::vector<LayerConfig> candidates;
    auto add = [&](LayerConfig n) {
      try {
        n.validate();
      } catch (const ConfigError&) {
        return;
      }
      candidates.push_back(n);
    };
    for (int step : {8, 1}) {
      LayerConfig n = c;
      n.in_w -= step;
      add(n);
      n = c;
      n.in_h -= step;
      add(n);
      n = c;
      n.in_c -= step;
      if (n.type == ConvType::depthwise) n.out_c = n.in_c;
      add(n);
      n = c;
      n.out_c -= step;
      add(n);
    }
    for (const auto& n : candidates) {
      if (n.out_c < 1) continue;
      if (auto again = verify_layer(n, data_seed, opt)) {
        again->trial = f.trial;
        f = *again;
        progressed = true;
        break;
      }
    }
    if (!progressed) break;
  }
  return f;
}

}  // namespace

VerifyReport run_verify(const VerifyOptions& opt, std::ostream* log) {
  VerifyReport rep;
  if (opt.trials <= 0) {
    if (log) fmt::print(*log, "warning: 0 trials requested; nothing verified\n");
    return rep;
  }
  std::mt19937_64 rng(opt.seed);
  for (int t = 0; t < opt.trials; ++t) {
    const LayerConfig cfg = random_layer(rng, opt.limits);
    const std::uint64_t data_seed = rng();
    ++rep.trials;
    auto f = verify_layer(cfg, data_seed, opt);
    if (!f) {
      ++rep.passed;
      continue;
    }
    f->trial = t;
    if (log) fmt::print(*log, "trial {} FAILED: {} [{}]: {}\n", t, f->property, describe(cfg), f->detail);
    if (opt.minimize) {
      *f = minimize(*f, data_seed, opt);
      if (log) fmt::print(*log, "minimized: [{}] {}: {}\n", describe(f->cfg), f->property, f->detail);
    }
    rep.failure = f;
    break;
  }
  if (log && rep.ok()) fmt::print(*log, "{} of {} trials passed (seed {})\n", rep.passed, rep.trials, opt.seed);
  return rep;
}

}  // namespace neuromax
